#include "chebotarev/quaddiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "chebotarev/theta.hpp"

namespace chebotarev {

namespace {

struct GaussRule {
  std::vector<double> x, w;  // on [0, 1]
};

// Golub-Welsch.
GaussRule make_gauss(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussRule g;
  for (int k = 0; k < n; ++k) {
    g.x.push_back(0.5 * (es.eigenvalues()(k) + 1.0));
    g.w.push_back(es.eigenvectors()(0, k) * es.eigenvectors()(0, k));
  }
  return g;
}

const GaussRule& gauss16() {
  static const GaussRule g = make_gauss(16);
  return g;
}

double dist_point_segment_lifted(const Surface& s, cplx x, cplx a, cplx b) {
  if (!s.is_torus()) return point_segment_distance(x, a, b);
  const cplx xm = s.nearest_lift(x, 0.5 * (a + b));
  double best = std::numeric_limits<double>::infinity();
  for (int m = -1; m <= 1; ++m)
    for (int n = -1; n <= 1; ++n) best = std::min(best, point_segment_distance(xm + s.lattice(m, n), a, b));
  return best;
}

// Sheet-continuing evaluation of v = sqrt(Q).
struct Tracker {
  cplx v{};
  bool set = false;
  double jump = 0.0;  // largest phase step seen
  cplx next(cplx Q) {
    cplx v1 = std::sqrt(Q);
    if (set) {
      if ((v1 * std::conj(v)).real() < 0.0) v1 = -v1;
      if (v != cplx(0.0) && v1 != cplx(0.0)) jump = std::max(jump, std::abs(std::arg(v1 / v)));
    }
    v = v1;
    set = true;
    return v1;
  }
};

enum class Ends { None, Start, End, Both };

struct SegmentMap {
  cplx z0, dz;
  Ends mode;
  void at(double t, cplx& z, cplx& dzdt) const {
    double s, ds;
    switch (mode) {
      case Ends::None: s = t; ds = 1.0; break;
      case Ends::Both: s = 0.5 * (1.0 - std::cos(kPi * t)); ds = 0.5 * kPi * std::sin(kPi * t); break;
      case Ends::Start: s = 1.0 - std::cos(0.5 * kPi * t); ds = 0.5 * kPi * std::sin(0.5 * kPi * t); break;
      default: s = std::sin(0.5 * kPi * t); ds = 0.5 * kPi * std::cos(0.5 * kPi * t); break;
    }
    z = z0 + dz * s;
    dzdt = dz * ds;
  }
};

cplx gauss_piece(const QuadDiff& q, const SegmentMap& m, double a, double b, Tracker& tr) {
  const auto& g = gauss16();
  cplx sum = 0.0;
  for (std::size_t k = 0; k < g.x.size(); ++k) {
    cplx z, dzdt;
    m.at(a + (b - a) * g.x[k], z, dzdt);
    const cplx Q = q(z);
    if (!std::isfinite(Q.real()) || !std::isfinite(Q.imag()))
      throw NumericalError("contour hits branch locus");
    sum += g.w[k] * tr.next(Q) * dzdt;
  }
  return sum * (b - a);
}

cplx adapt(const QuadDiff& q, const SegmentMap& m, double a, double b, Tracker& tr, double tol, int depth) {
  Tracker tw = tr;
  tw.jump = 0.0;
  const cplx whole = gauss_piece(q, m, a, b, tw);
  Tracker th = tr;
  th.jump = 0.0;
  const double c = 0.5 * (a + b);
  const cplx left = gauss_piece(q, m, a, c, th);
  const cplx right = gauss_piece(q, m, c, b, th);
  const double err = std::abs(whole - (left + right));
  if (depth >= 40 || (err <= std::max(tol * (b - a), 1e-15 * std::abs(whole)) && th.jump < 0.25 * kPi)) {
    const double j = std::max(tr.jump, th.jump);
    tr = th;
    tr.jump = j;
    return left + right;
  }
  const cplx l = adapt(q, m, a, c, tr, tol, depth + 1);
  return l + adapt(q, m, c, b, tr, tol, depth + 1);
}

// Obstacles for contours: anchors, odd zeros, infinity (torus) and even zeros.
std::vector<cplx> obstacles(const QuadDiff& q) {
  std::vector<cplx> out = q.anchors();
  for (const auto& z : q.zeros()) out.push_back(z.pos);
  if (q.surface().is_torus()) out.push_back(q.surface().infinity_coord());
  return out;
}

double path_clearance(const Surface& s, std::span<const cplx> path, std::span<const cplx> pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < path.size(); ++k)
    for (cplx p : pts) best = std::min(best, dist_point_segment_lifted(s, p, path[k], path[k + 1]));
  return best;
}

std::vector<cplx> stadium(cplx a, cplx b, double delta) {
  const cplx t = (b - a) / std::abs(b - a);
  std::vector<cplx> out;
  const int m = 24;
  for (int k = 0; k <= m; ++k) out.push_back(b + delta * t * std::polar(1.0, -0.5 * kPi + kPi * k / m));
  for (int k = 0; k <= m; ++k) out.push_back(a + delta * t * std::polar(1.0, 0.5 * kPi + kPi * k / m));
  out.push_back(out.front());
  return out;
}

double sgn_continuation(cplx v0, cplx v1) { return (v1 * std::conj(v0)).real() >= 0.0 ? 1.0 : -1.0; }

}  // namespace

QuadDiff::QuadDiff(const Surface& s, std::vector<cplx> anchors, std::vector<QuadZero> zeros)
    : s_(s), anchors_(std::move(anchors)), zeros_(std::move(zeros)) {
  const int N = static_cast<int>(anchors_.size());
  int deg = 0;
  for (const auto& z : zeros_) {
    if (z.mult < 1) throw InputError("zero multiplicity must be positive");
    deg += z.mult;
  }
  const int want = s_.is_torus() ? N + 2 : N - 2;
  if (deg != want || (!s_.is_torus() && N < 2)) throw InputError("divisor degree mismatch");
  if (!s_.is_torus()) return;
  const cplx tau = s_.tau(), inf = s_.infinity_coord();
  // Abel condition: move the last zero by the reduced defect / multiplicity.
  cplx D = -2.0 * inf;
  for (const auto& z : zeros_) D += double(z.mult) * z.pos;
  for (cplx e : anchors_) D -= e;
  QuadZero& last = zeros_.back();
  const cplx red = s_.nearest_lift(D, 0.0);
  last.pos -= red / double(last.mult);
  D -= red;
  abel_ = s_.lattice_coordinates(D, 1e-8);
  // bi-residue: scale * prod th1(-u_i)^m_i / (prod th1(-u_j) th1'(0)^2) = 1
  cplx P = 1.0;
  for (const auto& z : zeros_) P *= std::pow(jacobi_theta1(tau, inf - z.pos), z.mult);
  for (cplx e : anchors_) P /= jacobi_theta1(tau, inf - e);
  const cplx t1p = jacobi_theta1_prime(tau, 0.0);
  scale_ = t1p * t1p / P;
}

cplx QuadDiff::operator()(cplx z) const {
  if (!s_.is_torus()) {
    cplx num = 1.0, den = 1.0;
    for (const auto& a : zeros_) num *= std::pow(z - a.pos, a.mult);
    for (cplx e : anchors_) den *= z - e;
    return num / den;
  }
  const cplx tau = s_.tau(), inf = s_.infinity_coord();
  const cplx u = s_.nearest_lift(z - inf, 0.0);
  cplx v = scale_ * std::exp(-2.0 * kPi * kI * double(abel_.n) * u);
  for (const auto& a : zeros_) v *= std::pow(jacobi_theta1(tau, u - (a.pos - inf)), a.mult);
  cplx den = jacobi_theta1(tau, u);
  den *= den;
  for (cplx e : anchors_) den *= jacobi_theta1(tau, u - (e - inf));
  return v / den;
}

double QuadDiff::singular_distance(cplx z) const {
  double d = std::numeric_limits<double>::infinity();
  auto dist = [&](cplx a) { return s_.is_torus() ? s_.distance(z, a) : std::abs(z - a); };
  for (cplx e : anchors_) d = std::min(d, dist(e));
  for (const auto& a : zeros_) d = std::min(d, dist(a.pos));
  if (s_.is_torus()) d = std::min(d, dist(s_.infinity_coord()));
  return d;
}

double QuadDiff::diameter() const {
  std::vector<cplx> pts = anchors_;
  for (const auto& a : zeros_) pts.push_back(a.pos);
  double d = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      d = std::max(d, s_.is_torus() ? s_.distance(pts[i], pts[j]) : std::abs(pts[i] - pts[j]));
  return std::max(d, 1e-3);
}

cplx QuadDiff::bi_residue() const {
  const int m = 64;
  cplx acc = 0.0;
  if (!s_.is_torus()) {
    double R = 1.0;
    for (cplx e : anchors_) R = std::max(R, std::abs(e));
    for (const auto& a : zeros_) R = std::max(R, std::abs(a.pos));
    R *= 4.0;
    for (int k = 0; k < m; ++k) {
      const cplx z = std::polar(R, 2.0 * kPi * (k + 0.5) / m);
      acc += (*this)(z) * z * z;
    }
    return acc / double(m);
  }
  const cplx inf = s_.infinity_coord();
  double rho = 0.5 * std::min(std::abs(s_.lattice(1, 0)), std::abs(s_.tau()));
  for (cplx e : anchors_) rho = std::min(rho, s_.distance(e, inf));
  for (const auto& a : zeros_) rho = std::min(rho, s_.distance(a.pos, inf));
  rho *= 0.25;
  for (int k = 0; k < m; ++k) {
    const cplx u = std::polar(rho, 2.0 * kPi * (k + 0.5) / m);
    acc += (*this)(inf + u) * u * u;
  }
  return acc / double(m);
}

cplx QuadDiff::local_coefficient(cplx p, int mu) const {
  double rho = std::numeric_limits<double>::infinity();
  auto consider = [&](cplx a) {
    const double d = s_.is_torus() ? s_.distance(p, a) : std::abs(p - a);
    if (d > 1e-12) rho = std::min(rho, d);
  };
  for (cplx e : anchors_) consider(e);
  for (const auto& a : zeros_) consider(a.pos);
  if (s_.is_torus()) consider(s_.infinity_coord());
  if (!std::isfinite(rho)) rho = 1.0;
  rho *= 0.25;
  const int m = 64;
  cplx acc = 0.0;
  for (int k = 0; k < m; ++k) {
    const cplx d = std::polar(rho, 2.0 * kPi * (k + 0.5) / m);
    acc += (*this)(p + d) / std::pow(d, mu);
  }
  return acc / double(m);
}

std::vector<cplx> QuadDiff::branch_points() const {
  std::vector<cplx> b = anchors_;
  for (const auto& a : zeros_)
    if (a.mult % 2 == 1) b.push_back(a.pos);
  return b;
}

cplx integrate_sqrt(const QuadDiff& q, std::span<const cplx> path, bool singular_start, bool singular_end,
                    cplx v_start, cplx* v_end, double tol) {
  if (path.size() < 2) {
    if (v_end) *v_end = v_start;
    return 0.0;
  }
  Tracker tr;
  if (v_start != cplx(0.0) && !singular_start) {
    tr.v = v_start;
    tr.set = true;
  }
  cplx total = 0.0;
  const std::size_t ns = path.size() - 1;
  for (std::size_t k = 0; k < ns; ++k) {
    const bool sa = singular_start && k == 0, sb = singular_end && k + 1 == ns;
    const Ends mode = sa && sb ? Ends::Both : sa ? Ends::Start : sb ? Ends::End : Ends::None;
    if (path[k + 1] == path[k]) continue;
    total += adapt(q, SegmentMap{path[k], path[k + 1] - path[k], mode}, 0.0, 1.0, tr, tol, 0);
  }
  if (v_end) {
    // continue the tracker to the exact end point when it is regular
    if (!singular_end) {
      const cplx Q = q(path.back());
      *v_end = tr.next(Q);
    } else {
      *v_end = tr.v;
    }
  }
  return total;
}

DoubleCover make_double_cover(const QuadDiff& q) {
  const Surface& s = q.surface();
  DoubleCover dc;
  dc.base = q;
  dc.branch_points = q.branch_points();
  const auto& B = dc.branch_points;
  const int nb = static_cast<int>(B.size());
  // Prim on the surface metric.
  auto dist = [&](cplx a, cplx b) { return s.is_torus() ? s.distance(a, b) : std::abs(a - b); };
  std::vector<bool> in(nb, false);
  std::vector<double> best(nb, std::numeric_limits<double>::infinity());
  std::vector<int> parent(nb, -1);
  if (nb > 0) best[0] = 0.0;
  for (int it = 0; it < nb; ++it) {
    int u = -1;
    for (int v = 0; v < nb; ++v)
      if (!in[v] && (u < 0 || best[v] < best[u])) u = v;
    in[u] = true;
    if (parent[u] >= 0) dc.tree.push_back({parent[u], u});
    for (int v = 0; v < nb; ++v)
      if (!in[v] && dist(B[u], B[v]) < best[v]) {
        best[v] = dist(B[u], B[v]);
        parent[v] = u;
      }
  }
  const auto obs = obstacles(q);
  for (auto [i, j] : dc.tree) {
    const cplx a = B[i], b = s.nearest_lift(B[j], B[i]);
    std::vector<cplx> others;
    for (cplx o : obs)
      if (dist(o, a) > 1e-12 && dist(o, b) > 1e-12) others.push_back(o);
    const std::array<cplx, 2> seg = {a, b};
    double clear = others.empty() ? std::abs(b - a) : path_clearance(s, seg, others);
    const double delta = std::min(0.25 * std::abs(b - a), 0.45 * clear);
    dc.cycles.push_back({stadium(a, b, delta), "branch-pair", true});
  }
  if (s.is_torus()) {
    // Base point for the lattice cycles: maximise the clearance of the two cycles
    // and of the connecting segment from the first branch point.
    const cplx inf = s.infinity_coord();
    double best_score = -1.0;
    const int M = 16;
    for (int a = 0; a < M; ++a)
      for (int b = 0; b < M; ++b) {
        const cplx p = inf + (a + 0.5) / M - 0.5 + ((b + 0.5) / M - 0.5) * s.tau();
        const std::array<cplx, 2> ca = {p, p + 1.0}, cb = {p, p + s.tau()};
        double sc = std::min(path_clearance(s, ca, obs), path_clearance(s, cb, obs));
        if (nb > 0) {
          const cplx pl = s.nearest_lift(p, B[0]);
          std::vector<cplx> others;
          for (cplx o : obs)
            if (dist(o, B[0]) > 1e-12) others.push_back(o);
          const std::array<cplx, 2> link = {B[0], pl};
          if (!others.empty()) sc = std::min(sc, path_clearance(s, link, others));
        }
        if (sc > best_score) {
          best_score = sc;
          dc.base_point = nb > 0 ? s.nearest_lift(p, B[0]) : p;
        }
      }
    const cplx p = dc.base_point;
    for (int which = 0; which < 2; ++which) {
      const cplx w = which == 0 ? cplx(1.0) : s.tau();
      cplx vp = std::sqrt(q(p)), vq;
      const std::array<cplx, 2> cyc = {p, p + w};
      integrate_sqrt(q, cyc, false, false, vp, &vq);
      const bool closed = sgn_continuation(vp, vq) > 0.0;
      const std::string kind = which == 0 ? "lattice-a" : "lattice-b";
      if (closed) {
        dc.cycles.push_back({{p, p + w}, kind, true});
        dc.cycles.push_back({{p, p + w}, kind + "-", true});
        continue;
      }
      // The lift of the lattice cycle swaps the sheets: use its double and the
      // lift closed up by a loop around the nearest branch point.
      dc.cycles.push_back({{p, p + w, p + 2.0 * w}, kind + "-double", false});
      if (nb == 0) continue;
      const cplx end = p + w;
      cplx b0 = s.nearest_lift(B[0], end);
      double near = std::numeric_limits<double>::infinity();
      for (int j = 0; j < nb; ++j) {
        const cplx bj = s.nearest_lift(B[j], end);
        if (std::abs(bj - end) < near) {
          near = std::abs(bj - end);
          b0 = bj;
        }
      }
      double rad = 0.3 * std::abs(b0 - end);
      for (cplx o : obs)
        if (s.distance(o, b0) > 1e-12) rad = std::min(rad, 0.3 * s.distance(o, b0));
      const cplx dir = (end - b0) / std::abs(end - b0);
      std::vector<cplx> path = {p, end};
      const int m = 48;
      for (int k = 0; k <= m; ++k) path.push_back(b0 + rad * dir * std::polar(1.0, 2.0 * kPi * k / m));
      path.push_back(end);
      dc.cycles.push_back({std::move(path), kind + "-branch", false});
    }
  }
  dc.betti_number = s.is_torus() ? nb + 3 : nb - 1;
  // residue at infinity
  const int m = 256;
  cplx acc = 0.0;
  if (s.is_torus()) {
    double rho = 0.1;
    for (cplx o : obs)
      if (s.distance(o, s.infinity_coord()) > 1e-12) rho = std::min(rho, 0.25 * s.distance(o, s.infinity_coord()));
    std::vector<cplx> circ;
    for (int k = 0; k <= m; ++k) circ.push_back(s.infinity_coord() + std::polar(rho, 2.0 * kPi * k / m));
    acc = integrate_sqrt(q, circ, false, false);
  } else {
    double R = 1.0;
    for (cplx b : obs) R = std::max(R, std::abs(b));
    for (const auto& z : q.zeros()) R = std::max(R, std::abs(z.pos));
    R *= 4.0;
    std::vector<cplx> circ;
    for (int k = 0; k <= m; ++k) circ.push_back(std::polar(R, -2.0 * kPi * k / m));  // ccw around infinity
    acc = integrate_sqrt(q, circ, false, false);
  }
  dc.infinity_residue = acc / (2.0 * kPi * kI);
  return dc;
}

cplx contour_period(const QuadDiff& q, std::span<const cplx> path) {
  const Surface& s = q.surface();
  const auto B = q.branch_points();
  if (!B.empty() && path_clearance(s, path, B) < 1e-3) throw NumericalError("contour hits branch locus");
  return integrate_sqrt(q, path, false, false);
}

cplx sqrt_period(const DoubleCover& dc, std::size_t i) {
  if (i >= dc.cycles.size()) throw InputError("cycle index out of range");
  const auto& c = dc.cycles[i];
  const Surface& s = dc.base.surface();
  if (!dc.branch_points.empty() && path_clearance(s, c.path, dc.branch_points) < 1e-3)
    throw NumericalError("contour hits branch locus");
  cplx v0 = std::sqrt(dc.base(c.path.front()));
  if (c.kind.back() == '-') v0 = -v0;
  return integrate_sqrt(dc.base, c.path, false, false, v0);
}

double BoutrouxResidual::norm() const {
  double m = std::max(std::abs(bi_residue_defect.real()), std::abs(bi_residue_defect.imag()));
  for (double x : level) m = std::max(m, std::abs(x));
  for (double x : lattice) m = std::max(m, std::abs(x));
  return m;
}

BoutrouxResidual boutroux_residual(const QuadDiff& q, const DoubleCover& dc) {
  const Surface& s = q.surface();
  const auto B = q.branch_points();
  if (B.size() != dc.branch_points.size()) throw InputError("cover layout does not match the differential");
  BoutrouxResidual r;
  for (auto [i, j] : dc.tree) {
    const std::array<cplx, 2> seg = {B[i], s.nearest_lift(B[j], B[i])};
    const cplx I = integrate_sqrt(q, seg, true, true);
    r.level.push_back(I.real());
    r.periods.push_back(2.0 * I);
  }
  if (s.is_torus() && !B.empty()) {
    const cplx p = s.nearest_lift(dc.base_point, B[0]);
    cplx vp;
    const std::array<cplx, 2> link = {B[0], p};
    const double phi0 = integrate_sqrt(q, link, true, false, 0.0, &vp).real();
    for (cplx w : {cplx(1.0), s.tau()}) {
      cplx vq;
      const std::array<cplx, 2> cyc = {p, p + w};
      const cplx I = integrate_sqrt(q, cyc, false, false, vp, &vq);
      const double sigma = sgn_continuation(vp, vq);
      r.lattice.push_back(I.real() + (1.0 - sigma) * phi0);
      r.periods.push_back(sigma > 0 ? I : 0.0);
    }
  }
  r.bi_residue_defect = q.bi_residue() - 1.0;
  return r;
}

BoutrouxResidual boutroux_residual(const QuadDiff& q) { return boutroux_residual(q, make_double_cover(q)); }

BoutrouxSolve boutroux_solve(const QuadDiff& initial, const BoutrouxOptions& opt) {
  const Surface& s = initial.surface();
  const DoubleCover dc = make_double_cover(initial);
  std::vector<QuadZero> zeros = initial.zeros();
  const int nfree = static_cast<int>(zeros.size()) - (s.is_torus() ? 1 : 0);
  const int nx = 2 * std::max(nfree, 0);
  auto build = [&](const Eigen::VectorXd& x) {
    std::vector<QuadZero> z = zeros;
    for (int k = 0; k < nfree; ++k) z[k].pos = {x(2 * k), x(2 * k + 1)};
    return QuadDiff(s, initial.anchors(), z);
  };
  auto resid = [&](const QuadDiff& q) {
    const BoutrouxResidual br = boutroux_residual(q, dc);
    Eigen::VectorXd r(br.level.size() + br.lattice.size());
    int k = 0;
    for (double v : br.level) r(k++) = v;
    for (double v : br.lattice) r(k++) = v;
    return r;
  };
  Eigen::VectorXd x(nx);
  for (int k = 0; k < nfree; ++k) {
    x(2 * k) = zeros[k].pos.real();
    x(2 * k + 1) = zeros[k].pos.imag();
  }
  BoutrouxSolve out;
  QuadDiff q = build(x);
  Eigen::VectorXd r = resid(q);
  for (int it = 0;; ++it) {
    const double rn = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
    if (rn <= opt.tol) {
      out.q = q;
      out.residual = boutroux_residual(q, dc);
      out.iterations = it;
      if (out.residual.norm() > opt.tol)
        throw NumericalError("bi-residue defect " + std::to_string(out.residual.norm()));
      return out;
    }
    if (nx == 0 || it >= opt.max_iter)
      throw NumericalError("Boutroux solve did not converge: residual " + std::to_string(rn));
    Eigen::MatrixXd J(r.size(), nx);
    for (int c = 0; c < nx; ++c) {
      Eigen::VectorXd xp = x, xm = x;
      xp(c) += opt.fd_step;
      xm(c) -= opt.fd_step;
      J.col(c) = (resid(build(xp)) - resid(build(xm))) / (2.0 * opt.fd_step);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    // finite differences at step 1e-6 leave a floor of about 1e-7 on the relative
    // singular values of a coalescing pair
    if (sv.size() < nx || sv(sv.size() - 1) <= 1e-6 * sv(0))
      throw NumericalError("degenerate configuration (coalescing zeros?)");
    const Eigen::VectorXd dx = -svd.solve(r);
    double lam = 1.0;
    const double r2 = r.squaredNorm();
    for (;;) {
      const Eigen::VectorXd xt = x + lam * dx;
      QuadDiff qt;
      Eigen::VectorXd rt;
      try {
        qt = build(xt);
        rt = resid(qt);
      } catch (const NumericalError&) {
        if (lam < 1e-4) throw;
        lam *= 0.5;
        continue;
      }
      if (rt.squaredNorm() < r2 || lam < 1e-4) {
        x = xt;
        q = qt;
        r = rt;
        break;
      }
      lam *= 0.5;
    }
  }
}

SchifferProbe::SchifferProbe(const BipolarKernel& k, const CapacityResult& r) : k_(&k), r_(&r) {
  const auto& P = r.measure.disc.panels;
  const auto& w = r.measure.weights;
  const int n = static_cast<int>(P.size());
  psi_.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (w[i] == 0.0) continue;
    cplx acc = w[i] * k.omega_regular_part(P[i].mid);
    for (int j = 0; j < n; ++j)
      if (j != i && w[j] != 0.0) acc += w[j] * k.omega(P[i].mid, P[j].mid);
    psi_[i] = acc;
  }
}

cplx SchifferProbe::residual(const std::function<cplx(cplx)>& h, const std::function<cplx(cplx)>& dh) const {
  const auto& P = r_->measure.disc.panels;
  const auto& w = r_->measure.weights;
  cplx acc = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (w[i] == 0.0) continue;
    acc += w[i] * (2.0 * h(P[i].mid) * psi_[i] + w[i] * dh(P[i].mid));
  }
  return acc;
}

cplx SchifferProbe::residual(const CauchyKernel& c, cplx x) const {
  if (distance_to_set(k_->surface(), r_->measure.disc, x) <= 0.5 * r_->measure.disc.h)
    throw InputError("probe point on K");
  return residual([&](cplx p) { return c(x, p); }, [&](cplx p) { return c.dq(x, p); });
}

cplx SchifferProbe::quad_value(const CauchyKernel& c, cplx x) const {
  const cplx g = green_gradient(*k_, *r_, x);
  return -residual(c, x) + g * g;
}

cplx schiffer_residual(const BipolarKernel& k, const CapacityResult& r, const CauchyKernel& c, cplx x) {
  return SchifferProbe(k, r).residual(c, x);
}

std::vector<cplx> default_probes(const Surface& s, const PanelDiscretization& d, int count) {
  cplx c = 0.0;
  for (const auto& p : d.panels) c += p.mid;
  c /= double(std::max<std::size_t>(1, d.size()));
  double R = 0.0;
  for (const auto& p : d.panels) R = std::max({R, std::abs(p.a - c), std::abs(p.b - c)});
  std::vector<cplx> cand;
  const int M = 32;
  if (s.is_torus()) {
    const cplx inf = s.infinity_coord();
    for (int a = 0; a < M; ++a)
      for (int b = 0; b < M; ++b) cand.push_back(inf + ((a + 0.5) / M - 0.5) + ((b + 0.5) / M - 0.5) * s.tau());
  } else {
    const double L = 1.6 * std::max(R, 1e-3);
    for (int a = 0; a < M; ++a)
      for (int b = 0; b < M; ++b) cand.push_back(c + L * cplx(2.0 * (a + 0.5) / M - 1.0, 2.0 * (b + 0.5) / M - 1.0));
  }
  const double clear = std::max(3.0 * d.h, 0.15 * std::max(R, 1e-3));
  std::vector<cplx> ok;
  for (cplx z : cand) {
    if (distance_to_set(s, d, z) < clear) continue;
    if (s.is_torus() && s.distance(z, s.infinity_coord()) < 0.12) continue;
    ok.push_back(z);
  }
  std::vector<cplx> out;
  if (ok.empty()) return out;
  // farthest-point selection, starting nearest to the support
  std::size_t first = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ok.size(); ++i) {
    const double dd = distance_to_set(s, d, ok[i]);
    if (dd < bd) {
      bd = dd;
      first = i;
    }
  }
  std::vector<double> md(ok.size(), std::numeric_limits<double>::infinity());
  std::size_t cur = first;
  for (int k = 0; k < count && k < static_cast<int>(ok.size()); ++k) {
    out.push_back(ok[cur]);
    std::size_t nxt = cur;
    double far = -1.0;
    for (std::size_t i = 0; i < ok.size(); ++i) {
      md[i] = std::min(md[i], s.distance(ok[i], ok[cur]));
      if (md[i] > far) {
        far = md[i];
        nxt = i;
      }
    }
    cur = nxt;
  }
  return out;
}

CriticalFit from_critical_measure(const BipolarKernel& k, const CapacityResult& r, const CauchyKernel& c,
                                  std::span<const cplx> probes, const std::optional<QuadDiff>& guess) {
  const Surface& s = k.surface();
  if (probes.empty()) throw InputError("empty set");
  const SchifferProbe sp(k, r);
  CriticalFit fit;
  for (cplx x : probes) fit.probe_values.push_back(sp.quad_value(c, x));
  const auto& E = c.anchors();
  const int N = static_cast<int>(E.size());
  const int np = static_cast<int>(probes.size());
  if (!s.is_torus()) {
    const int deg = N - 2;
    if (deg < 0) throw InputError("divisor degree mismatch");
    // B(x) = Q(x) A(x), least squares in a centred, scaled variable
    cplx ctr = 0.0;
    for (cplx e : E) ctr += e;
    ctr /= double(N);
    double sc = 1e-3;
    for (cplx x : probes) sc = std::max(sc, std::abs(x - ctr));
    Eigen::MatrixXcd V(np, deg + 1);
    Eigen::VectorXcd y(np);
    for (int i = 0; i < np; ++i) {
      cplx A = 1.0;
      for (cplx e : E) A *= probes[i] - e;
      y(i) = fit.probe_values[i] * A;
      const cplx t = (probes[i] - ctr) / sc;
      for (int d = 0; d <= deg; ++d) V(i, d) = std::pow(t, d);
    }
    const Eigen::VectorXcd cf = V.colPivHouseholderQr().solve(y);
    fit.fit_residual = (V * cf - y).cwiseAbs().maxCoeff() / std::max(1e-300, y.cwiseAbs().maxCoeff());
    const cplx lead = cf(deg) / std::pow(sc, deg);
    fit.fitted_bi_residue = lead;
    std::vector<QuadZero> zeros;
    if (deg > 0) {
      Eigen::MatrixXcd Cm = Eigen::MatrixXcd::Zero(deg, deg);
      for (int i = 1; i < deg; ++i) Cm(i, i - 1) = 1.0;
      for (int i = 0; i < deg; ++i) Cm(i, deg - 1) = -cf(i) / cf(deg);
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Cm);
      for (int i = 0; i < deg; ++i) zeros.push_back({ctr + sc * es.eigenvalues()(i), 1});
    }
    // monomial coefficients of B / lead in the original variable
    std::vector<cplx> mono(1, 1.0);
    for (const auto& z : zeros) {
      std::vector<cplx> nx(mono.size() + 1, 0.0);
      for (std::size_t i = 0; i < mono.size(); ++i) {
        nx[i + 1] += mono[i];
        nx[i] -= z.pos * mono[i];
      }
      mono = nx;
    }
    for (auto& m : mono) m *= lead;
    fit.coefficients = mono;
    fit.q = QuadDiff(s, E, zeros);
  } else {
    if (!guess) throw InputError("torus fit needs a zero template");
    std::vector<QuadZero> zeros = guess->zeros();
    const int nfree = static_cast<int>(zeros.size()) - 1;
    auto build = [&](const Eigen::VectorXd& x) {
      std::vector<QuadZero> z = zeros;
      for (int i = 0; i < nfree; ++i) z[i].pos = {x(2 * i), x(2 * i + 1)};
      return QuadDiff(s, E, z);
    };
    auto misfit = [&](const QuadDiff& q, cplx* scale_out) {
      std::vector<cplx> m(np);
      cplx num = 0.0;
      double den = 0.0;
      for (int i = 0; i < np; ++i) {
        m[i] = q(probes[i]) / fit.probe_values[i];
        num += std::conj(m[i]);
        den += std::norm(m[i]);
      }
      const cplx sopt = num / den;
      if (scale_out) *scale_out = sopt;
      Eigen::VectorXd r(2 * np);
      for (int i = 0; i < np; ++i) {
        const cplx e = sopt * m[i] - 1.0;
        r(2 * i) = e.real();
        r(2 * i + 1) = e.imag();
      }
      return r;
    };
    Eigen::VectorXd x(2 * nfree);
    for (int i = 0; i < nfree; ++i) {
      x(2 * i) = zeros[i].pos.real();
      x(2 * i + 1) = zeros[i].pos.imag();
    }
    QuadDiff q = build(x);
    Eigen::VectorXd r = misfit(q, nullptr);
    for (int it = 0; it < 50 && 2 * nfree > 0; ++it) {
      Eigen::MatrixXd J(r.size(), x.size());
      for (int cidx = 0; cidx < x.size(); ++cidx) {
        Eigen::VectorXd xp = x, xm = x;
        xp(cidx) += 1e-6;
        xm(cidx) -= 1e-6;
        J.col(cidx) = (misfit(build(xp), nullptr) - misfit(build(xm), nullptr)) / 2e-6;
      }
      const Eigen::VectorXd dx = -J.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(r);
      double lam = 1.0;
      bool moved = false;
      while (lam > 1e-4) {
        const Eigen::VectorXd xt = x + lam * dx;
        const QuadDiff qt = build(xt);
        const Eigen::VectorXd rt = misfit(qt, nullptr);
        if (rt.squaredNorm() < r.squaredNorm()) {
          x = xt;
          q = qt;
          r = rt;
          moved = true;
          break;
        }
        lam *= 0.5;
      }
      if (!moved || dx.norm() < 1e-12) break;
    }
    cplx sopt;
    r = misfit(q, &sopt);
    fit.q = q;
    fit.fitted_bi_residue = 1.0 / sopt;
    fit.fit_residual = r.cwiseAbs().maxCoeff();
  }
  if (fit.fit_residual > 1e-3) fit.warning = "measure not critical at this mesh";
  return fit;
}

namespace {

// Accumulated argument change of g along [a, b], refining until steps are < pi/4.
double arg_change(const std::function<cplx(cplx)>& g, cplx a, cplx b, cplx ga, cplx gb, int depth = 0) {
  const double d = std::arg(gb / ga);
  if (depth >= 30) return d;
  if (std::abs(d) < 0.25 * kPi && depth >= 1) return d;
  const cplx m = 0.5 * (a + b);
  const cplx gm = g(m);
  return arg_change(g, a, m, ga, gm, depth + 1) + arg_change(g, m, b, gm, gb, depth + 1);
}

}  // namespace

int green_winding(const BipolarKernel& k, const CapacityResult& r, std::span<const cplx> path) {
  auto g = [&](cplx z) { return green_gradient(k, r, z); };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) total += arg_change(g, path[i], path[i + 1], g(path[i]), g(path[i + 1]));
  const double w = total / (2.0 * kPi);
  const double rw = std::round(w);
  if (std::abs(w - rw) > 0.1) throw NumericalError("contour too close to a zero");
  return static_cast<int>(rw);
}

GreenZeros count_green_zeros(const BipolarKernel& k, const CapacityResult& r, double clearance, double margin) {
  const Surface& s = k.surface();
  const auto& d = r.measure.disc;
  if (clearance < 0.0) clearance = 2.0 * d.h;
  auto g = [&](cplx z) { return green_gradient(k, r, z); };
  cplx origin, ea, eb;
  const int M = 24;
  if (s.is_torus()) {
    ea = 1.0 / M;
    eb = s.tau() / double(M);
    origin = s.infinity_coord() - 0.5 - 0.5 * s.tau() + 0.0137 * (ea + eb);
  } else {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& p : d.panels)
      for (cplx z : {p.a, p.b}) {
        x0 = std::min(x0, z.real());
        x1 = std::max(x1, z.real());
        y0 = std::min(y0, z.imag());
        y1 = std::max(y1, z.imag());
      }
    const double diam = std::max({x1 - x0, y1 - y0, 1e-3});
    const double L = diam * (1.0 + 2.0 * margin);
    const cplx c(0.5 * (x0 + x1), 0.5 * (y0 + y1));
    ea = L / M;
    eb = kI * L / double(M);
    origin = c - 0.5 * L * cplx(1.0, 1.0) + 0.0137 * (ea + eb);
  }
  auto vert = [&](int a, int b) { return origin + double(a) * ea + double(b) * eb; };
  std::vector<cplx> gv((M + 1) * (M + 1));
  for (int b = 0; b <= M; ++b)
    for (int a = 0; a <= M; ++a) gv[b * (M + 1) + a] = g(vert(a, b));
  auto gat = [&](int a, int b) { return gv[b * (M + 1) + a]; };
  const double cell_diam = std::abs(ea) + std::abs(eb);
  GreenZeros out;
  for (int b = 0; b < M; ++b)
    for (int a = 0; a < M; ++a) {
      const cplx ctr = vert(a, b) + 0.5 * (ea + eb);
      if (distance_to_set(s, d, ctr) < clearance + cell_diam) continue;
      if (s.is_torus() && s.distance(ctr, s.infinity_coord()) < 1.5 * cell_diam) continue;
      double tot = arg_change(g, vert(a, b), vert(a + 1, b), gat(a, b), gat(a + 1, b)) +
                   arg_change(g, vert(a + 1, b), vert(a + 1, b + 1), gat(a + 1, b), gat(a + 1, b + 1)) +
                   arg_change(g, vert(a + 1, b + 1), vert(a, b + 1), gat(a + 1, b + 1), gat(a, b + 1)) +
                   arg_change(g, vert(a, b + 1), vert(a, b), gat(a, b + 1), gat(a, b));
      const double w = tot / (2.0 * kPi);
      const double rw = std::round(w);
      if (std::abs(w - rw) > 0.1) throw NumericalError("contour too close to a zero");
      if (rw == 0.0) continue;
      out.count += static_cast<int>(rw);
      // Newton refinement from the cell centre
      cplx z = ctr;
      const double hstep = 1e-5 * std::abs(ea);
      for (int it = 0; it < 30; ++it) {
        const cplx gz = g(z);
        const cplx dg = (g(z + hstep) - g(z - hstep)) / (2.0 * hstep);
        if (dg == cplx(0.0)) break;
        const cplx step = gz / dg;
        z -= step;
        if (std::abs(step) < 1e-13 || std::abs(z - ctr) > 2.0 * cell_diam) break;
      }
      if (std::abs(z - ctr) > 2.0 * cell_diam) z = ctr;
      for (int rep = 0; rep < std::abs(static_cast<int>(rw)); ++rep) out.locations.push_back(z);
    }
  return out;
}

}  // namespace chebotarev
