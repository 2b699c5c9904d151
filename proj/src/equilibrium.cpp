#include "chebotarev/equilibrium.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace chebotarev {

namespace {

// Near field: panels closer than this many panel lengths get analytic log integrals.
// Not an integer, so uniform panels never sit on the switch.
constexpr double kNearFactor = 3.5;

constexpr std::array<double, 8> kGLx = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                        -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                        0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGLw = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                        0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                        0.2223810344533745, 0.1012285362903763};

// Antiderivative in a of ln sqrt(a^2 + y^2).
double log_antideriv(double a, double y) {
  double r = -a;
  const double r2 = a * a + y * y;
  if (a != 0.0 && r2 > 0.0) r += 0.5 * a * std::log(r2);
  if (y != 0.0) r += y * std::atan(a / y);
  return r;
}

Panel make_panel(cplx a, cplx b, int edge) {
  Panel p;
  p.a = a;
  p.b = b;
  p.mid = 0.5 * (a + b);
  p.length = std::abs(b - a);
  p.tangent = p.length > 0.0 ? (b - a) / p.length : cplx(1.0);
  p.edge = edge;
  return p;
}

// Panel j translated to the lift nearest to z.
Panel lifted(const Surface& s, const Panel& pj, cplx z) {
  if (!s.is_torus()) return pj;
  const cplx d = s.nearest_lift(pj.mid, z) - pj.mid;
  if (d == cplx(0.0)) return pj;
  Panel q = pj;
  q.a += d;
  q.b += d;
  q.mid += d;
  return q;
}

// Panel-averaged G(x, .) over panel pj (x a point).
double point_panel_green(const BipolarKernel& k, const Panel& pj0, cplx x) {
  const Panel pj = lifted(k.surface(), pj0, x);
  if (std::abs(pj.mid - x) < kNearFactor * pj.length)
    return panel_log_average(x, pj.a, pj.b) + k.green_smooth(x, pj.mid);
  return k.green(x, pj.mid);
}

// Panel-averaged Omega(x, .) over pj.
cplx point_panel_omega(const BipolarKernel& k, const Panel& pj0, cplx x) {
  const Panel pj = lifted(k.surface(), pj0, x);
  const cplx d = x - pj.mid;
  if (std::abs(d) < kNearFactor * pj.length) {
    cplx smooth = 0.0;
    if (k.surface().is_torus())
      smooth = std::abs(d) < 1e-8 ? k.omega_regular_part(x) : k.omega(x, pj.mid) - 1.0 / d;
    return panel_cauchy_average(x, pj.a, pj.b) + smooth;
  }
  return k.omega(x, pj.mid);
}

}  // namespace

double panel_log_average(cplx x, cplx a, cplx b) {
  const double L = std::abs(b - a);
  if (L == 0.0) return std::log(std::abs(x - a));
  const cplx t = (b - a) / L;
  const cplx xi = (x - a) * std::conj(t);  // panel-local coordinates
  const double u = xi.real(), y = xi.imag();
  // (1/L) int_0^L ln|xi - s| ds, substitution r = u - s.
  return (log_antideriv(u, y) - log_antideriv(u - L, y)) / L;
}

cplx panel_cauchy_average(cplx x, cplx a, cplx b) {
  const cplx d = b - a;
  if (std::abs(d) == 0.0) return 1.0 / (x - a);
  // (1/L) int_0^L ds / (x - a - t s) = ln((x - a)/(x - b)) / (b - a)
  return std::log((x - a) / (x - b)) / d;
}

namespace {

// Panels at free ends and sharp corners are split geometrically toward the node,
// down to 2^-kGradeDepth of the base length, to follow the density singularity.
constexpr int kGradeDepth = 10;
constexpr double kCornerAngle = 0.3;

}  // namespace

std::vector<bool> singular_nodes(const Surface& s, const PolyContinuum& K) {
  const int nn = static_cast<int>(K.nodes.size());
  std::vector<std::vector<cplx>> out(nn);  // outgoing unit directions
  for (std::size_t e = 0; e < K.edges.size(); ++e) {
    const cplx a = K.edge_start(s, e), b = K.edge_end(s, e);
    const double L = std::abs(b - a);
    if (L == 0.0) continue;
    out[K.edges[e].a].push_back((b - a) / L);
    out[K.edges[e].b].push_back((a - b) / L);
  }
  std::vector<bool> sing(nn, true);
  for (int v = 0; v < nn; ++v)
    if (out[v].size() == 2) sing[v] = std::abs(std::arg(-out[v][0] / out[v][1])) > kCornerAngle;
  return sing;
}

PanelDiscretization PanelDiscretization::from_continuum(const Surface& s, const PolyContinuum& K,
                                                        double h, std::span<const int> counts) {
  if (!(h > 0.0)) throw InputError("mesh must be positive");
  const std::vector<bool> sing = singular_nodes(s, K);
  PanelDiscretization d;
  d.h = h;
  for (std::size_t e = 0; e < K.edges.size(); ++e) {
    const cplx a = K.edge_start(s, e), b = K.edge_end(s, e);
    const double L = std::abs(b - a);
    if (L == 0.0) continue;
    const int n = counts.size() == K.edges.size() ? std::max(1, counts[e])
                                                   : std::max(1, static_cast<int>(std::ceil(L / h - 1e-9)));
    // breakpoints as fractions of the edge
    std::vector<double> t;
    for (int k = 0; k <= n; ++k) t.push_back(double(k) / n);
    const double first = 1.0 / n;
    const bool ga = sing[K.edges[e].a], gb = sing[K.edges[e].b];
    std::vector<double> pts;
    const double span = (n == 1 && ga && gb) ? 0.5 * first : first;
    if (ga)
      for (int k = kGradeDepth; k >= 1; --k) pts.push_back(span * std::ldexp(1.0, -k));
    if (gb)
      for (int k = 1; k <= kGradeDepth; ++k) pts.push_back(1.0 - span * std::ldexp(1.0, -k));
    if (n == 1 && ga && gb) pts.push_back(0.5);
    t.insert(t.end(), pts.begin(), pts.end());
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end(), [](double x, double y) { return y - x < 1e-14; }), t.end());
    for (std::size_t k = 0; k + 1 < t.size(); ++k)
      d.panels.push_back(make_panel(a + (b - a) * t[k], a + (b - a) * t[k + 1], static_cast<int>(e)));
  }
  return d;
}

PanelDiscretization PanelDiscretization::segment(cplx a, cplx b, int n) {
  PanelDiscretization d;
  d.h = std::abs(b - a) / n;
  for (int k = 0; k < n; ++k)
    d.panels.push_back(make_panel(a + (b - a) * (double(k) / n), a + (b - a) * (double(k + 1) / n), 0));
  return d;
}

PanelDiscretization PanelDiscretization::circle(cplx center, double radius, int n) {
  PanelDiscretization d;
  for (int k = 0; k < n; ++k)
    d.panels.push_back(make_panel(center + std::polar(radius, 2.0 * kPi * k / n),
                                  center + std::polar(radius, 2.0 * kPi * (k + 1) / n), 0));
  d.h = d.panels[0].length;
  return d;
}

Eigen::MatrixXd assemble_kernel(const BipolarKernel& k, const PanelDiscretization& d) {
  const int n = static_cast<int>(d.size());
  const Surface& s = k.surface();
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i) {
    const Panel& pi = d.panels[i];
    if (pi.length <= 0.0) throw NumericalError("degenerate discretization");
    G(i, i) = std::log(pi.length) - 1.5 + k.green_smooth(pi.mid, pi.mid);
    for (int j = i + 1; j < n; ++j) {
      const Panel pj = lifted(s, d.panels[j], pi.mid);
      const double dist = std::abs(pj.mid - pi.mid);
      double v;
      if (dist < kNearFactor * std::max(pi.length, pj.length)) {
        // Gauss-Legendre on one panel, exact log integral on the other; symmetrised.
        double aij = 0.0, aji = 0.0;
        for (std::size_t g = 0; g < kGLx.size(); ++g) {
          const double t = 0.5 * (kGLx[g] + 1.0);
          aij += 0.5 * kGLw[g] * panel_log_average(pi.a + t * (pi.b - pi.a), pj.a, pj.b);
          aji += 0.5 * kGLw[g] * panel_log_average(pj.a + t * (pj.b - pj.a), pi.a, pi.b);
        }
        v = 0.5 * (aij + aji) + k.green_smooth(pi.mid, pj.mid);
      } else {
        v = k.green(pi.mid, pj.mid);
      }
      G(i, j) = G(j, i) = v;
    }
  }
  if (!G.allFinite()) throw NumericalError("degenerate discretization");
  return G;
}

double energy(const BipolarKernel& k, const DiscreteMeasure& m) {
  const Eigen::MatrixXd G = assemble_kernel(k, m.disc);
  const Eigen::Map<const Eigen::VectorXd> w(m.weights.data(), m.weights.size());
  return -w.dot(G * w);
}

CapacityResult equilibrium_measure(const BipolarKernel& k, const PanelDiscretization& d) {
  const int n = static_cast<int>(d.size());
  if (n < 2) throw InputError("equilibrium measure needs at least two panels");
  const Eigen::MatrixXd G = assemble_kernel(k, d);
  std::vector<bool> active(n, true);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  double lambda = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (active[i]) idx.push_back(i);
    const int m = static_cast<int>(idx.size());
    if (m == 0) throw NumericalError("degenerate discretization");
    Eigen::MatrixXd A(m + 1, m + 1);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) A(a, b) = G(idx[a], idx[b]);
    A.col(m).setOnes();
    A.row(m).setOnes();
    A(m, m) = 0.0;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    rhs(m) = 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    const Eigen::VectorXd x = lu.solve(rhs);
    if (!x.allFinite() || (A * x - rhs).cwiseAbs().maxCoeff() > 1e-6)
      throw NumericalError("degenerate discretization");
    w.setZero();
    for (int a = 0; a < m; ++a) w(idx[a]) = x(a);
    lambda = x(m);
    bool changed = false;
    for (int a = 0; a < m; ++a)
      if (x(a) < -1e-10) {
        active[idx[a]] = false;
        changed = true;
      }
    if (changed) continue;
    // Inactive panels re-enter where the potential exceeds the Robin constant.
    const Eigen::VectorXd Gw = G * w.cwiseMax(0.0);
    for (int i = 0; i < n; ++i)
      if (!active[i] && Gw(i) > -lambda + 1e-10) {
        active[i] = true;
        changed = true;
      }
    if (!changed) break;
  }
  w = w.cwiseMax(0.0);
  w /= w.sum();
  CapacityResult r{k.surface(), {d, std::vector<double>(w.data(), w.data() + n)}, 0.0, 0.0, 0.0, 0.0, 0};
  const Eigen::VectorXd Gw = G * w;
  r.energy = -w.dot(Gw);
  r.capacity = std::exp(-r.energy);
  r.robin_constant = -r.energy;
  double res = 0.0;
  for (int i = 0; i < n; ++i) {
    if (active[i]) {
      res = std::max(res, std::abs(Gw(i) - r.robin_constant));
      ++r.active_panels;
    }
  }
  r.kkt_residual = res;
  return r;
}

double potential(const BipolarKernel& k, const CapacityResult& r, cplx p) {
  const auto& panels = r.measure.disc.panels;
  double u = 0.0;
  for (std::size_t j = 0; j < panels.size(); ++j) {
    const double w = r.measure.weights[j];
    if (w == 0.0) continue;
    u += w * point_panel_green(k, panels[j], p);
  }
  return u;
}

double green_raw(const BipolarKernel& k, const CapacityResult& r, cplx p) {
  return potential(k, r, p) - r.robin_constant;
}

double distance_to_set(const Surface& s, const PanelDiscretization& d, cplx p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pn : d.panels) {
    const cplx z = s.nearest_lift(p, pn.mid);
    best = std::min(best, point_segment_distance(z, pn.a, pn.b));
  }
  return best;
}

double green_function(const BipolarKernel& k, const CapacityResult& r, cplx p) {
  const auto& d = r.measure.disc;
  if (distance_to_set(k.surface(), d, p) <= 0.5 * d.h) return 0.0;
  const double g = green_raw(k, r, p);
  const double tol = 5e-3 * std::max(1.0, d.h / 0.01);
  if (g < 0.0 && g > -tol) return 0.0;
  return g;
}

cplx green_gradient(const BipolarKernel& k, const CapacityResult& r, cplx p) {
  const auto& panels = r.measure.disc.panels;
  cplx g = 0.0;
  for (std::size_t j = 0; j < panels.size(); ++j) {
    const double w = r.measure.weights[j];
    if (w == 0.0) continue;
    g += w * point_panel_omega(k, panels[j], p);
  }
  return g;
}

std::pair<double, double> normal_derivatives(const BipolarKernel& k, const CapacityResult& r, int i) {
  const auto& panels = r.measure.disc.panels;
  const Panel& pi = panels[i];
  const cplx p = pi.mid;
  cplx rest = 0.0;
  for (std::size_t j = 0; j < panels.size(); ++j) {
    const double w = r.measure.weights[j];
    if (w == 0.0) continue;
    if (static_cast<int>(j) == i) {
      // The principal value over a straight panel at its midpoint vanishes.
      if (k.surface().is_torus()) rest += w * k.omega_regular_part(p);
      continue;
    }
    rest += w * point_panel_omega(k, panels[j], p);
  }
  const cplx n = kI * pi.tangent;
  const double sigma = r.measure.weights[i] / pi.length;
  const double normal = (rest * n).real();
  return {kPi * sigma + normal, kPi * sigma - normal};
}

CapacityResult capacity_rescale(const CapacityResult& r, cplx new_chart_coeff) {
  if (new_chart_coeff == cplx(0.0)) throw InputError("chart coefficient must be nonzero");
  CapacityResult out = r;
  const double la = std::log(std::abs(new_chart_coeff));
  out.energy = r.energy + la;
  out.robin_constant = -out.energy;
  out.capacity = std::exp(-out.energy);
  const cplx c = r.surface.chart_coeff() * new_chart_coeff;
  out.surface = r.surface.is_torus() ? Surface::torus(r.surface.tau(), r.surface.infinity_coord(), c)
                                     : Surface::sphere(c);
  return out;
}

PolyContinuum bump_continuum(const Surface& s, const PolyContinuum& K, double eps) {
  const int nn = static_cast<int>(K.nodes.size());
  std::vector<std::vector<std::pair<int, cplx>>> inc(nn);  // (edge, unit normal)
  for (std::size_t e = 0; e < K.edges.size(); ++e) {
    const cplx a = K.edge_start(s, e), b = K.edge_end(s, e);
    const double L = std::abs(b - a);
    if (L == 0.0) continue;
    const cplx nrm = kI * (b - a) / L;
    inc[K.edges[e].a].push_back({(int)e, nrm});
    inc[K.edges[e].b].push_back({(int)e, nrm});
  }
  std::vector<cplx> fixed;
  for (int v = 0; v < nn; ++v)
    if (K.anchor_of[v] >= 0 || inc[v].size() != 2) fixed.push_back(K.nodes[v]);
  std::vector<double> dist(nn, 0.0);
  double dmax = 0.0;
  for (int v = 0; v < nn; ++v) {
    double d = std::numeric_limits<double>::infinity();
    for (cplx f : fixed) d = std::min(d, s.distance(K.nodes[v], f));
    if (fixed.empty()) d = 1.0;
    dist[v] = d;
    dmax = std::max(dmax, d);
  }
  PolyContinuum out = K;
  if (dmax <= 0.0) return out;
  const double rho = 0.5 * dmax;
  for (int v = 0; v < nn; ++v) {
    if (K.anchor_of[v] >= 0 || inc[v].size() != 2) continue;
    cplx n1 = inc[v][0].second, n2 = inc[v][1].second;
    if ((n1 * std::conj(n2)).real() < 0.0) n2 = -n2;
    cplx nrm = n1 + n2;
    if (std::abs(nrm) == 0.0) continue;
    nrm /= std::abs(nrm);
    const double t = std::min(1.0, dist[v] / rho);
    const double b = std::sin(0.5 * kPi * t);
    out.nodes[v] += eps * b * b * nrm;
  }
  return out;
}

ContinuityProbe continuity_probe(const BipolarKernel& k, const PolyContinuum& K, double eps, double h) {
  const Surface& s = k.surface();
  ContinuityProbe pr;
  if (eps == 0.0) return pr;
  const PolyContinuum K1 = refine(s, K, h);
  const PolyContinuum K2 = bump_continuum(s, K1, eps);
  // same panel count per edge on both, so only the geometry moves
  std::vector<int> counts;
  for (std::size_t e = 0; e < K1.edges.size(); ++e)
    counts.push_back(std::max(1, static_cast<int>(std::ceil(K1.edge_length(s, e) / h - 1e-9))));
  const auto r1 = equilibrium_measure(k, PanelDiscretization::from_continuum(s, K1, h, counts));
  const auto r2 = equilibrium_measure(k, PanelDiscretization::from_continuum(s, K2, h, counts));
  const auto a = K1.sample(s, h / 4), b = K2.sample(s, h / 4);
  pr.hausdorff = hausdorff_distance(s, std::span<const cplx>(a), std::span<const cplx>(b));
  pr.delta_log_cap = std::abs(r2.robin_constant - r1.robin_constant);
  return pr;
}

std::vector<double> divergence_probe(const BipolarKernel& k, const std::vector<PolyContinuum>& seq,
                                     int panels_per_continuum) {
  std::vector<double> caps;
  for (const auto& K : seq) {
    const double h = K.total_length(k.surface()) / panels_per_continuum;
    caps.push_back(equilibrium_measure(k, PanelDiscretization::from_continuum(k.surface(), K, h)).capacity);
  }
  return caps;
}

}  // namespace chebotarev
