#include "chebotarev/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace chebotarev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 8-point Gauss-Legendre on [0, 1].
constexpr double kGx[8] = {0.019855071751231856, 0.10166676129318664, 0.2372337950418355, 0.4082826787521751,
                           0.5917173212478249,   0.7627662049581645,  0.8983332387068134, 0.9801449282487681};
constexpr double kGw[8] = {0.05061426814518813, 0.11119051722668724, 0.15685332293894363, 0.18134189168918100,
                           0.18134189168918100, 0.15685332293894363, 0.11119051722668724, 0.05061426814518813};

cplx align(cplx v, cplx ref) { return (v * std::conj(ref)).real() < 0.0 ? -v : v; }

double lifted_distance(const Surface& s, cplx a, cplx b) {
  return s.is_torus() ? std::abs(s.nearest_lift(a, b) - b) : std::abs(a - b);
}

// Straight integral of sqrt(Q) from z to a singular point p, sheet continued from v.
// The substitution z(t) = z + (p - z)(1 - (1 - t)^2) absorbs a simple pole.
cplx landing_integral(const std::function<cplx(cplx)>& Q, cplx z, cplx p, cplx v) {
  cplx acc = 0.0, ref = v;
  const int pieces = 4;
  for (int piece = 0; piece < pieces; ++piece)
    for (int k = 0; k < 8; ++k) {
      const double t = (piece + kGx[k]) / pieces;
      const double u = 1.0 - t;
      const cplx zt = z + (p - z) * (1.0 - u * u);
      const cplx vt = align(std::sqrt(Q(zt)), ref);
      ref = vt;
      acc += kGw[k] / pieces * vt * (p - z) * (2.0 * u);
    }
  return acc;
}

cplx chord_integral(const std::function<cplx(cplx)>& Q, cplx a, cplx b, cplx& vref) {
  cplx acc = 0.0;
  for (int k = 0; k < 8; ++k) {
    const cplx v = align(std::sqrt(Q(a + (b - a) * kGx[k])), vref);
    vref = v;
    acc += kGw[k] * v;
  }
  return acc * (b - a);
}

struct Landing {
  double radius = 0.0;
};

std::vector<double> landing_radii(const Surface& s, const std::vector<SingularPoint>& sing) {
  std::vector<double> r(sing.size(), 0.05);
  for (std::size_t i = 0; i < sing.size(); ++i)
    for (std::size_t j = 0; j < sing.size(); ++j)
      if (i != j) {
        const double d = lifted_distance(s, sing[j].pos, sing[i].pos);
        if (d > 1e-12) r[i] = std::min(r[i], 0.25 * d);
      }
  return r;
}

double nearest_singular(const Surface& s, const std::vector<SingularPoint>& sing, cplx z) {
  double d = kInf;
  for (const auto& p : sing) d = std::min(d, lifted_distance(s, p.pos, z));
  return d;
}

// Core tracer. z0/v0 on the chosen sheet; `sigma` picks the direction i*sigma/v.
Trajectory trace_core(const Surface& s, const std::function<cplx(cplx)>& Q, const std::vector<SingularPoint>& sing,
                      cplx z0, cplx v0, double sigma, int origin, double launch_radius, double diameter,
                      const TraceOptions& opt, std::vector<cplx> prefix) {
  Trajectory T;
  T.origin = origin;
  T.points = std::move(prefix);
  T.points.push_back(z0);
  const double budget = opt.budget > 0.0 ? opt.budget : 50.0 * diameter;
  const std::vector<double> rland = landing_radii(s, sing);
  cplx z = z0, v = v0;
  double phi = 0.0;  // Re int v from the start, kept at zero by projection
  double ds = 1e-3 * diameter * std::abs(v);
  bool left_origin = origin < 0;
  const cplx origin_pos = origin >= 0 ? sing[origin].pos : cplx{};
  auto field = [&](cplx w, cplx& ref) {
    const cplx vw = align(std::sqrt(Q(w)), ref);
    ref = vw;
    return sigma * kI / vw;
  };
  for (int step = 0; step < opt.max_steps; ++step) {
    if (T.q_length >= budget) {
      T.stop = "budget";
      return T;
    }
    const double dsing = nearest_singular(s, sing, z);
    const double dmax = std::isfinite(dsing) ? 0.1 * dsing : 0.05 * diameter;
    ds = std::min({ds, dmax * std::abs(v), budget - T.q_length + 1e-12});
    // Dormand-Prince 5(4)
    cplx ref = v;
    const cplx k1 = field(z, ref);
    const cplx k2 = field(z + ds * (k1 / 5.0), ref);
    const cplx k3 = field(z + ds * (3.0 / 40 * k1 + 9.0 / 40 * k2), ref);
    const cplx k4 = field(z + ds * (44.0 / 45 * k1 - 56.0 / 15 * k2 + 32.0 / 9 * k3), ref);
    const cplx k5 = field(z + ds * (19372.0 / 6561 * k1 - 25360.0 / 2187 * k2 + 64448.0 / 6561 * k3 - 212.0 / 729 * k4), ref);
    const cplx k6 = field(z + ds * (9017.0 / 3168 * k1 - 355.0 / 33 * k2 + 46732.0 / 5247 * k3 + 49.0 / 176 * k4 -
                                    5103.0 / 18656 * k5), ref);
    const cplx z5 = z + ds * (35.0 / 384 * k1 + 500.0 / 1113 * k3 + 125.0 / 192 * k4 - 2187.0 / 6784 * k5 + 11.0 / 84 * k6);
    const cplx k7 = field(z5, ref);
    const cplx z4 = z + ds * (5179.0 / 57600 * k1 + 7571.0 / 16695 * k3 + 393.0 / 640 * k4 - 92097.0 / 339200 * k5 +
                              187.0 / 2100 * k6 + 1.0 / 40 * k7);
    const double err = std::abs(z5 - z4);
    const double scale = opt.tol * std::max(diameter, 1e-3);
    if (!std::isfinite(err)) {
      ds *= 0.25;
      if (ds < 1e-15) break;
      continue;
    }
    if (err > scale) {
      ds *= std::max(0.1, 0.9 * std::pow(scale / err, 0.2));
      if (ds < 1e-15 * std::max(1.0, T.q_length)) break;
      continue;
    }
    // accept; project back onto the level
    cplx vr = v;
    phi += chord_integral(Q, z, z5, vr).real();
    T.level_defect = std::max(T.level_defect, std::abs(phi));
    cplx zn = z5;
    const cplx vn = align(std::sqrt(Q(zn)), vr);
    zn -= phi * std::conj(vn) / std::norm(vn);
    phi = 0.0;
    v = align(std::sqrt(Q(zn)), vn);
    z = zn;
    T.q_length += ds;
    T.points.push_back(z);
    ds *= std::min(5.0, 0.9 * std::pow(scale / std::max(err, 1e-300), 0.2));

    if (!left_origin && std::abs(z - origin_pos) > 3.0 * launch_radius) left_origin = true;
    for (std::size_t i = 0; i < sing.size(); ++i) {
      if (sing[i].order <= -2) continue;  // vertical trajectories circle a double pole
      if (static_cast<int>(i) == origin && !left_origin) continue;
      const cplx p = s.is_torus() ? s.nearest_lift(sing[i].pos, z) : sing[i].pos;
      if (std::abs(p - z) >= rland[i]) continue;
      const cplx I = landing_integral(Q, z, p, v);
      if (std::abs(I.real()) <= std::max(1e-6, 1e-3 * std::abs(I))) {
        // heading towards p?
        if ((sigma * kI / v * std::conj(p - z)).real() <= 0.0) continue;
        T.points.push_back(p);
        T.q_length += std::abs(I);
        T.end = static_cast<int>(i);
        T.stop = "landed";
        return T;
      }
    }
    if (!s.is_torus() && std::abs(z) > opt.window) {
      T.stop = "window";
      return T;
    }
  }
  T.stop = "stalled";
  return T;
}

std::vector<SingularPoint> singular_points(const QuadDiff& q) {
  std::vector<SingularPoint> out;
  for (cplx e : q.anchors()) out.push_back({e, -1});
  for (const auto& z : q.zeros()) out.push_back({z.pos, z.mult});
  if (q.surface().is_torus()) out.push_back({q.surface().infinity_coord(), -2});
  return out;
}

}  // namespace

Trajectory trace_vertical(const Surface& s, const std::function<cplx(cplx)>& Q,
                          const std::vector<SingularPoint>& singular, cplx start, int sign, double diameter,
                          const TraceOptions& opt) {
  const cplx v0 = std::sqrt(Q(start));
  if (v0 == cplx(0.0) || !std::isfinite(std::abs(v0))) throw InputError("trajectory start at a zero or pole");
  return trace_core(s, Q, singular, start, v0, sign >= 0 ? 1.0 : -1.0, -1, 0.0, diameter, opt, {});
}

Trajectory trace_vertical(const QuadDiff& q, cplx start, int sign, const TraceOptions& opt) {
  return trace_vertical(q.surface(), [&](cplx z) { return q(z); }, singular_points(q), start, sign, q.diameter(), opt);
}

std::vector<cplx> launch_directions(const QuadDiff& q, cplx p, int order) {
  const cplx k = q.local_coefficient(p, order);
  const int n = order + 2;
  std::vector<cplx> dirs;
  const double base = std::arg(-1.0 / k);
  for (int j = 0; j < n; ++j) dirs.push_back(std::polar(1.0, (base + 2.0 * kPi * j) / n));
  return dirs;
}

PolyContinuum CriticalGraph::continuum(const Surface& s) const {
  const int nv = static_cast<int>(vertices.size());
  std::vector<int> comp(nv);
  std::iota(comp.begin(), comp.end(), 0);
  std::function<int(int)> find = [&](int x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
  for (const auto& e : edges) comp[find(e.a)] = find(e.b);
  std::vector<bool> keep(nv, false);
  for (int v = 0; v < nv; ++v)
    if (vertices[v].anchor >= 0) keep[find(v)] = true;
  PolyContinuum K;
  std::vector<int> id(nv, -1);
  for (int v = 0; v < nv; ++v)
    if (keep[find(v)]) id[v] = K.add_node(vertices[v].pos, vertices[v].anchor);
  for (const auto& e : edges) {
    if (!keep[find(e.a)]) continue;
    const auto& P = e.path.points;
    int prev = id[e.a];
    for (std::size_t i = 1; i + 1 < P.size(); ++i) {
      const int n = K.add_node(P[i]);
      K.add_edge(prev, n);
      prev = n;
    }
    const cplx end = P.back();
    K.add_edge(prev, id[e.b], s.is_torus() ? s.lattice_coordinates(end - vertices[e.b].pos, 1e-6) : Lift{});
  }
  return K;
}

CriticalGraph build_critical_graph(const QuadDiff& q, const TraceOptions& opt) {
  const Surface& s = q.surface();
  const auto sing = singular_points(q);
  CriticalGraph G;
  for (std::size_t i = 0; i < q.anchors().size(); ++i) G.vertices.push_back({q.anchors()[i], -1, static_cast<int>(i)});
  for (const auto& z : q.zeros()) G.vertices.push_back({z.pos, z.mult, -1});
  const int nv = static_cast<int>(G.vertices.size());
  const std::function<cplx(cplx)> Q = [&](cplx z) { return q(z); };
  struct Ray {
    int a, dir, b;
    double arrive;
    Trajectory t;
  };
  std::vector<Ray> rays;
  std::vector<std::vector<double>> launch_angles(nv);
  for (int v = 0; v < nv; ++v) {
    const cplx p = G.vertices[v].pos;
    const int order = G.vertices[v].order;
    double dnear = kInf;
    for (int w = 0; w < static_cast<int>(sing.size()); ++w)
      if (w != v) dnear = std::min(dnear, lifted_distance(s, sing[w].pos, p));
    const double r0 = std::min(1e-2, 0.1 * dnear);
    const auto dirs = launch_directions(q, p, order);
    for (std::size_t j = 0; j < dirs.size(); ++j) {
      launch_angles[v].push_back(std::arg(dirs[j]));
      cplx z0 = p + r0 * dirs[j];
      cplx v0 = std::sqrt(q(z0));
      // level of the start relative to the vertex, then project onto it
      const std::array<cplx, 2> seg = {p, z0};
      cplx vend;
      const cplx I = integrate_sqrt(q, seg, true, false, 0.0, &vend);
      v0 = align(v0, vend);
      z0 -= I.real() * std::conj(v0) / std::norm(v0);
      v0 = align(std::sqrt(q(z0)), v0);
      const double sigma = ((kI / v0) * std::conj(dirs[j])).real() > 0.0 ? 1.0 : -1.0;
      Trajectory t = trace_core(s, Q, sing, z0, v0, sigma, v, r0, q.diameter(), opt, {p});
      if (t.stop != "landed") throw NumericalError("non-closing trajectory: Boutroux residual too large?");
      t.q_length += std::abs(I);
      const cplx pend = t.points.back();
      const cplx before = t.points[t.points.size() - 2];
      rays.push_back({v, static_cast<int>(j), t.end, std::arg(before - pend), std::move(t)});
    }
  }
  auto dir_index = [&](int v, double ang) {
    int best = 0;
    double bd = kInf;
    for (std::size_t j = 0; j < launch_angles[v].size(); ++j) {
      const double d = std::abs(std::remainder(ang - launch_angles[v][j], 2.0 * kPi));
      if (d < bd) {
        bd = d;
        best = static_cast<int>(j);
      }
    }
    return best;
  };
  std::vector<int> ray_of(rays.size());
  std::vector<std::vector<int>> by_vertex(nv);
  for (std::size_t r = 0; r < rays.size(); ++r) by_vertex[rays[r].a].push_back(static_cast<int>(r));
  std::vector<bool> used(rays.size(), false);
  G.valence.assign(nv, 0);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    if (used[r]) continue;
    used[r] = true;
    const Ray& R = rays[r];
    const int jb = dir_index(R.b, R.arrive);
    int partner = -1;
    for (int c : by_vertex[R.b])
      if (!used[c] && rays[c].dir == jb && rays[c].b == R.a) partner = c;
    if (partner >= 0)
      used[partner] = true;
    else
      G.unmatched.push_back(static_cast<int>(G.edges.size()));
    G.edges.push_back({R.a, R.b, R.t});
    G.edges.back().path.critical = true;
    ++G.valence[R.a];
    ++G.valence[R.b];
  }
  return G;
}

double boutroux_green(const QuadDiff& q, cplx p) {
  const Surface& s = q.surface();
  const cplx a = q.anchors().front();
  const cplx pl = s.is_torus() ? s.nearest_lift(p, a) : p;
  std::vector<cplx> obs;
  for (std::size_t i = 1; i < q.anchors().size(); ++i) obs.push_back(q.anchors()[i]);
  for (const auto& z : q.zeros()) obs.push_back(z.pos);
  if (s.is_torus()) obs.push_back(s.infinity_coord());
  auto clearance = [&](const std::vector<cplx>& path) {
    double c = kInf;
    for (std::size_t k = 0; k + 1 < path.size(); ++k)
      for (cplx o : obs) {
        if (!s.is_torus()) {
          c = std::min(c, point_segment_distance(o, path[k], path[k + 1]));
          continue;
        }
        const cplx om = s.nearest_lift(o, 0.5 * (path[k] + path[k + 1]));
        for (int m = -1; m <= 1; ++m)
          for (int n = -1; n <= 1; ++n)
            c = std::min(c, point_segment_distance(om + s.lattice(m, n), path[k], path[k + 1]));
      }
    return c;
  };
  std::vector<cplx> path = {a, pl};
  const double L = std::abs(pl - a);
  if (clearance(path) < 1e-3 * std::max(L, 1.0)) {
    double best = -1.0;
    std::vector<cplx> bestp;
    for (double off : {0.15, -0.15, 0.3, -0.3, 0.5, -0.5}) {
      const std::vector<cplx> cand = {a, 0.5 * (a + pl) + off * kI * (pl - a), pl};
      const double c = clearance(cand);
      if (c > best) {
        best = c;
        bestp = cand;
      }
    }
    path = bestp;
  }
  return std::abs(integrate_sqrt(q, path, true, false).real());
}

SPropertyReport s_property_residual(const BipolarKernel& k, const CapacityResult& r, const PolyContinuum& K,
                                    int samples, double h) {
  const Surface& s = k.surface();
  if (h <= 0.0) h = r.measure.disc.h;
  const std::vector<bool> sing = singular_nodes(s, K);
  std::vector<cplx> ends;
  for (std::size_t v = 0; v < K.nodes.size(); ++v)
    if (sing[v]) ends.push_back(K.nodes[v]);
  const double total = K.total_length(s);
  SPropertyReport rep;
  const double spacing = total / samples;
  double acc = 0.0;
  int next = 0;
  for (std::size_t e = 0; e < K.edges.size() && next < samples; ++e) {
    const cplx a = K.edge_start(s, e), b = K.edge_end(s, e);
    const double L = std::abs(b - a);
    while (next < samples && (next + 0.5) * spacing <= acc + L) {
      const double t = ((next + 0.5) * spacing - acc) / L;
      ++next;
      const cplx p = a + t * (b - a);
      double dend = kInf;
      for (cplx q : ends) dend = std::min(dend, lifted_distance(s, q, p));
      if (dend < h) {
        ++rep.skipped;
        continue;
      }
      const cplx n = kI * (b - a) / L;
      auto side = [&](double sg) {
        const double g1 = green_function(k, r, p + sg * h * n), g2 = green_function(k, r, p + sg * 2.0 * h * n);
        return (4.0 * g1 - g2) / (2.0 * h);
      };
      const double dp = side(1.0), dm = side(-1.0);
      rep.points.push_back(p);
      rep.derivatives.push_back({dp, dm});
      ++rep.used;
      const double mx = std::max(dp, dm);
      if (mx > 0.0) rep.residual = std::max(rep.residual, std::abs(dp - dm) / mx);
    }
    acc += L;
  }
  return rep;
}

FoliationSample classify_foliation(const BipolarKernel& k, const CapacityResult& r, double tie) {
  FoliationSample f;
  const auto& P = r.measure.disc.panels;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const auto [dp, dm] = normal_derivatives(k, r, static_cast<int>(i));
    FoliationPoint pt;
    pt.pos = P[i].mid;
    pt.normal = kI * P[i].tangent;
    pt.dplus = std::max(dp, 0.0);
    pt.dminus = std::max(dm, 0.0);
    pt.length = P[i].length;
    const double mx = std::max(pt.dplus, pt.dminus);
    if (std::min(pt.dplus, pt.dminus) <= 1e-12 * mx)
      pt.cls = Dominance::Single;
    else if (std::abs(pt.dplus - pt.dminus) <= tie * mx)
      pt.cls = Dominance::Both;
    else
      pt.cls = pt.dplus > pt.dminus ? Dominance::Plus : Dominance::Minus;
    f.total_mass += (pt.dplus + pt.dminus) * pt.length;
    f.points.push_back(pt);
  }
  return f;
}

namespace {

struct FarZone {
  bool torus;
  cplx center;   // sphere: centre of K; torus: infinity
  double radius; // sphere: escape radius; torus: capture radius around infinity
};

FarZone far_zone(const BipolarKernel& k, const CapacityResult& r) {
  const Surface& s = k.surface();
  const auto& P = r.measure.disc.panels;
  if (s.is_torus()) {
    double d = 0.1;
    for (const auto& p : P) d = std::min(d, 0.25 * s.distance(p.mid, s.infinity_coord()));
    return {true, s.infinity_coord(), d};
  }
  double R = 0.0;
  for (const auto& p : P) R = std::max({R, std::abs(p.a), std::abs(p.b)});
  return {false, 0.0, 2.0 * R + 1.0};
}

// Gradient line of G: dz/dG = 1/(2 dG), RK4 in G. direction +1 ascends, -1 descends.
// `stop(z)` ends the line early.
Trajectory gradient_line(const BipolarKernel& k, const CapacityResult& r, cplx z0, double direction,
                         double g_step, const std::function<std::string(cplx)>& stop, int max_steps = 20000,
                         double room_factor = 0.1) {
  Trajectory T;
  T.points.push_back(z0);
  const auto& d = r.measure.disc;
  cplx z = z0;
  auto f = [&](cplx w) { return 1.0 / green_gradient(k, r, w); };
  for (int it = 0; it < max_steps; ++it) {
    const std::string why = stop(z);
    if (!why.empty()) {
      T.stop = why;
      return T;
    }
    const cplx g = green_gradient(k, r, z);
    if (!(std::abs(g) > 1e-9)) break;
    const double room = std::max(distance_to_set(k.surface(), d, z), 0.5 * d.h);
    double dG = std::min(g_step, room_factor * room * std::abs(g)) * direction;
    const cplx k1 = f(z), k2 = f(z + 0.5 * dG * k1), k3 = f(z + 0.5 * dG * k2), k4 = f(z + dG * k3);
    const cplx zn = z + dG / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(zn.real()) || !std::isfinite(zn.imag())) break;
    T.q_length += std::abs(dG);
    z = zn;
    T.points.push_back(z);
  }
  T.stop = "stalled";
  return T;
}

}  // namespace

Trajectory ascent_line(const BipolarKernel& k, const CapacityResult& r, cplx p, double g_step) {
  const FarZone fz = far_zone(k, r);
  const Surface& s = k.surface();
  return gradient_line(k, r, p, 1.0, g_step, [&](cplx z) -> std::string {
    if (fz.torus ? s.distance(z, fz.center) <= fz.radius : std::abs(z - fz.center) >= fz.radius) return "infinity";
    return {};
  });
}

bool flows_to_infinity(const BipolarKernel& k, const CapacityResult& r, cplx p) {
  return ascent_line(k, r, p).stop == "infinity";
}

cplx conformal_map_W(const BipolarKernel& k, const CapacityResult& r, cplx p) {
  const Surface& s = k.surface();
  const Trajectory line = ascent_line(k, r, p);
  if (line.stop != "infinity") throw NumericalError("ascent line stalls at a critical point");
  const cplx zend = line.points.back();
  const cplx inf = s.is_torus() ? s.nearest_lift(s.infinity_coord(), zend) : cplx{};
  auto g = [&](cplx z) {
    const cplx gg = green_gradient(k, r, z);
    return s.is_torus() ? gg + 1.0 / (z - inf) : gg - 1.0 / z;
  };
  cplx J = 0.0;
  for (std::size_t i = 0; i + 1 < line.points.size(); ++i) {
    const cplx a = line.points[i], b = line.points[i + 1];
    cplx acc = 0.0;
    for (int j = 0; j < 8; ++j) acc += kGw[j] * g(a + (b - a) * kGx[j]);
    J += acc * (b - a);
  }
  // tail to infinity
  if (s.is_torus()) {
    cplx acc = 0.0;
    for (int j = 0; j < 8; ++j) acc += kGw[j] * g(zend + (inf - zend) * kGx[j]);
    J += acc * (inf - zend);
  } else {
    const cplx w0 = 1.0 / zend;
    cplx acc = 0.0;
    for (int j = 0; j < 8; ++j) {
      const cplx w = w0 * (1.0 - kGx[j]);
      acc += kGw[j] * g(1.0 / w) * (-1.0 / (w * w));
    }
    J += acc * (-w0);
  }
  const cplx c = s.chart_coeff();
  const cplx zinf = s.is_torus() ? c * (p - inf) : c / p;
  return zinf * r.capacity * std::exp(J);
}

std::vector<Trajectory> dissection(const BipolarKernel& k, const CapacityResult& r) {
  return dissection(k, r, count_green_zeros(k, r));
}

std::vector<Trajectory> dissection(const BipolarKernel& k, const CapacityResult& r, const GreenZeros& z) {
  const Surface& s = k.surface();
  const auto& d = r.measure.disc;
  std::vector<Trajectory> out;
  // group coincident locations into orders
  std::vector<std::pair<cplx, int>> crit;
  for (cplx p : z.locations) {
    bool merged = false;
    for (auto& c : crit)
      if (lifted_distance(s, p, c.first) < 1e-6) {
        ++c.second;
        merged = true;
      }
    if (!merged) crit.push_back({p, 1});
  }
  for (std::size_t ci = 0; ci < crit.size(); ++ci) {
    const auto [b, mu] = crit[ci];
    const double dk = distance_to_set(s, d, b);
    const double r0 = std::min(1e-2, 0.1 * dk);
    // 2 dG ~ A (z - b)^mu; A from a circle mean
    cplx A = 0.0;
    for (int j = 0; j < 16; ++j) {
      const cplx e = std::polar(r0, 2.0 * kPi * (j + 0.5) / 16);
      A += green_gradient(k, r, b + e) / std::pow(e, mu);
    }
    A /= 16.0;
    for (int j = 0; j <= mu; ++j) {
      const double th = (kPi - std::arg(A) + 2.0 * kPi * j) / (mu + 1);
      const cplx z0 = b + r0 * std::polar(1.0, th);
      Trajectory T = gradient_line(k, r, z0, -1.0, 0.02, [&](cplx w) -> std::string {
        if (distance_to_set(s, d, w) <= 0.5 * d.h) return "K";
        for (std::size_t cj = 0; cj < crit.size(); ++cj)
          if (cj != ci && lifted_distance(s, w, crit[cj].first) < r0) return "critical";
        return {};
      });
      if (T.stop != "K" && T.stop != "critical") throw NumericalError("descent line fails to land");
      T.points.insert(T.points.begin(), b);
      T.origin = static_cast<int>(ci);
      out.push_back(std::move(T));
    }
  }
  return out;
}

JipReport jip_check(const BipolarKernel& k, const CapacityResult& F, const FoliationSample& fol,
                    const PolyContinuum& K, int samples) {
  const Surface& s = k.surface();
  const auto& P = F.measure.disc.panels;
  const double h = F.measure.disc.h;
  const double tol = 0.5 * h;
  std::vector<std::pair<cplx, cplx>> kseg;
  for (std::size_t e = 0; e < K.edges.size(); ++e) kseg.push_back({K.edge_start(s, e), K.edge_end(s, e)});
  auto near_K = [&](cplx a, cplx b) {
    for (const auto& [c, d] : kseg) {
      if (!s.is_torus()) {
        if (segment_segment_distance(a, b, c, d) <= tol) return true;
        continue;
      }
      const cplx shift = s.nearest_lift(c, a) - c;
      for (int m = -1; m <= 1; ++m)
        for (int n = -1; n <= 1; ++n) {
          const cplx t = shift + s.lattice(m, n);
          if (segment_segment_distance(a, b, c + t, d + t) <= tol) return true;
        }
    }
    return false;
  };
  double total = 0.0;
  for (const auto& p : P) total += p.length;
  // G_F increases along an ascent line, so past the largest value of G_F on K the
  // line cannot meet K any more.
  double gmax = 0.0;
  for (const auto& [c, d] : kseg)
    for (int i = 0; i <= 32; ++i) gmax = std::max(gmax, green_function(k, F, c + (d - c) * (i / 32.0)));
  gmax += 0.05;
  JipReport rep;
  std::size_t pi = 0;
  double acc = 0.0;
  for (int j = 0; j < samples; ++j) {
    const double target = (j + 0.5) * total / samples;
    while (pi + 1 < P.size() && acc + P[pi].length < target) acc += P[pi++].length;
    const Panel& pan = P[pi];
    const cplx p = pan.a + (target - acc) / pan.length * (pan.b - pan.a);
    ++rep.samples;
    if (near_K(p, p)) continue;
    const FoliationPoint& fp = fol.points[std::min(pi, fol.points.size() - 1)];
    std::vector<double> sides;
    if (fp.cls == Dominance::Plus || fp.cls == Dominance::Both || (fp.cls == Dominance::Single && fp.dplus > 0))
      sides.push_back(1.0);
    if (fp.cls == Dominance::Minus || fp.cls == Dominance::Both || (fp.cls == Dominance::Single && fp.dminus > 0))
      sides.push_back(-1.0);
    bool hit = false;
    for (double sg : sides) {
      const FarZone fz = far_zone(k, F);
      cplx prev = p;
      int step = 0;
      const Trajectory line = gradient_line(k, F, p + sg * 0.25 * h * fp.normal, 1.0, 0.02, [&](cplx z) -> std::string {
        if (near_K(prev, z)) return "K";
        prev = z;
        if (fz.torus ? s.distance(z, fz.center) <= fz.radius : std::abs(z - fz.center) >= fz.radius)
          return "infinity";
        if (++step % 8 == 0 && green_function(k, F, z) > gmax) return "escaped";
        return {};
      }, 20000, 0.3);
      ++rep.traced;
      if (line.stop == "K") {
        hit = true;
        break;
      }
    }
    if (!hit) rep.missed.push_back(p);
  }
  rep.holds = rep.missed.empty();
  return rep;
}

}  // namespace chebotarev
