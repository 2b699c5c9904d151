#include "chebotarev/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "chebotarev/trajectories.hpp"

namespace chebotarev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// A chain of edges between key nodes (anchors, junctions, free ends). `pts` are the
// lifted coordinates of `nodes` continued along the chain from nodes.front().
struct Chain {
  std::vector<int> nodes;
  std::vector<cplx> pts;
};

std::vector<int> degrees(const PolyContinuum& K) {
  std::vector<int> deg(K.nodes.size(), 0);
  for (const auto& e : K.edges) {
    ++deg[e.a];
    ++deg[e.b];
  }
  return deg;
}

std::vector<Chain> chains(const Surface& s, const PolyContinuum& K) {
  const int nn = static_cast<int>(K.nodes.size());
  const auto deg = degrees(K);
  std::vector<bool> key(nn);
  for (int v = 0; v < nn; ++v) key[v] = K.anchor_of[v] >= 0 || deg[v] != 2;
  // (edge, other node, offset to the other node's lift)
  struct Inc {
    int e, other;
    cplx step;
  };
  std::vector<std::vector<Inc>> inc(nn);
  for (std::size_t i = 0; i < K.edges.size(); ++i) {
    const auto& e = K.edges[i];
    const cplx sh = s.is_torus() ? s.lattice(e.shift.m, e.shift.n) : cplx{};
    const cplx d = K.nodes[e.b] + sh - K.nodes[e.a];
    inc[e.a].push_back({(int)i, e.b, d});
    inc[e.b].push_back({(int)i, e.a, -d});
  }
  std::vector<bool> used(K.edges.size(), false);
  std::vector<Chain> out;
  auto walk = [&](int start) {
    for (const auto& first : inc[start]) {
      if (used[first.e]) continue;
      Chain c;
      c.nodes = {start};
      c.pts = {K.nodes[start]};
      Inc cur = first;
      while (true) {
        used[cur.e] = true;
        c.nodes.push_back(cur.other);
        c.pts.push_back(c.pts.back() + cur.step);
        if (key[cur.other] || cur.other == start) break;
        const Inc* next = nullptr;
        for (const auto& x : inc[cur.other])
          if (!used[x.e]) next = &x;
        if (!next) break;
        cur = *next;
      }
      out.push_back(std::move(c));
    }
  };
  for (int v = 0; v < nn; ++v)
    if (key[v]) walk(v);
  // closed loops of free nodes
  for (std::size_t i = 0; i < K.edges.size(); ++i)
    if (!used[i]) {
      key[K.edges[i].a] = true;
      walk(K.edges[i].a);
    }
  return out;
}

std::vector<double> arclength(const std::vector<cplx>& p) {
  std::vector<double> s(p.size(), 0.0);
  for (std::size_t i = 1; i < p.size(); ++i) s[i] = s[i - 1] + std::abs(p[i] - p[i - 1]);
  return s;
}

cplx point_at(const std::vector<cplx>& p, const std::vector<double>& s, double t) {
  std::size_t i = std::upper_bound(s.begin(), s.end(), t) - s.begin();
  i = std::clamp<std::size_t>(i, 1, p.size() - 1);
  const double len = s[i] - s[i - 1];
  const double u = len > 0 ? (t - s[i - 1]) / len : 0.0;
  return p[i - 1] + u * (p[i] - p[i - 1]);
}

// Straight chain from node u to the lift nodes[v] + shift with interior nodes at <= step.
void add_straight(const Surface& s, PolyContinuum& K, int u, int v, Lift shift, double step) {
  const cplx a = K.nodes[u];
  const cplx b = K.nodes[v] + (s.is_torus() ? s.lattice(shift.m, shift.n) : cplx{});
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / step - 1e-9)));
  int prev = u;
  for (int j = 1; j < n; ++j) {
    const int id = K.add_node(a + (b - a) * (double(j) / n));
    K.add_edge(prev, id);
    prev = id;
  }
  K.add_edge(prev, v, shift);
}

double distance_to_infinity(const Surface& s, const PolyContinuum& K, double step) {
  if (!s.is_torus()) return kInf;
  double d = kInf;
  for (cplx z : K.sample(s, step)) d = std::min(d, s.distance(z, s.infinity_coord()));
  return d;
}

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  void join(int a, int b) { p[find(a)] = find(b); }
};

// Unit normal at a free node of degree 2 from its two neighbours (lifted).
cplx node_normal(const Surface& s, const PolyContinuum& K, int v) {
  cplx nb[2];
  int c = 0;
  for (const auto& e : K.edges) {
    if (c == 2) break;
    const cplx sh = s.is_torus() ? s.lattice(e.shift.m, e.shift.n) : cplx{};
    if (e.a == v) nb[c++] = K.nodes[e.b] + sh;
    else if (e.b == v) nb[c++] = K.nodes[e.a] - sh;
  }
  if (c < 2) return 0.0;
  const cplx d = nb[1] - nb[0];
  return std::abs(d) > 0 ? kI * d / std::abs(d) : cplx{};
}

PolyContinuum split_long_edges(const Surface& s, const PolyContinuum& K, double limit) {
  PolyContinuum out;
  out.nodes = K.nodes;
  out.anchor_of = K.anchor_of;
  for (std::size_t i = 0; i < K.edges.size(); ++i) {
    const auto& e = K.edges[i];
    if (K.edge_length(s, i) <= limit) {
      out.edges.push_back(e);
      continue;
    }
    const int mid = out.add_node(0.5 * (K.edge_start(s, i) + K.edge_end(s, i)));
    out.add_edge(e.a, mid);
    out.add_edge(mid, e.b, e.shift);
  }
  return out;
}

// Merges free node w into free node u (u keeps its position); edges are re-lifted.
PolyContinuum merge_nodes(const Surface& s, const PolyContinuum& K, int u, int w) {
  PolyContinuum out;
  std::vector<int> id(K.nodes.size(), -1);
  for (std::size_t v = 0; v < K.nodes.size(); ++v)
    if ((int)v != w) id[v] = out.add_node(K.nodes[v], K.anchor_of[v]);
  auto lift_near = [&](cplx stored, cplx target) {
    return s.is_torus() ? s.lattice_coordinates(s.nearest_lift(stored, target) - stored, 1e-6) : Lift{};
  };
  for (std::size_t i = 0; i < K.edges.size(); ++i) {
    const auto& e = K.edges[i];
    const int a = id[e.a == w ? u : e.a], b = id[e.b == w ? u : e.b];
    if (a == b && (e.a == w || e.b == w)) continue;
    const cplx S = K.edge_start(s, i), T = K.edge_end(s, i);
    const Lift la = lift_near(out.nodes[a], S);
    const cplx Tt = T - (s.is_torus() ? s.lattice(la.m, la.n) : cplx{});
    out.add_edge(a, b, lift_near(out.nodes[b], Tt));
  }
  return out;
}

double anchor_spread(const Surface& s, const std::vector<cplx>& pts) {
  double d = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, s.distance(pts[i], pts[j]));
  return d > 0.0 ? d : 1.0;
}

// Capacity is nearly flat in the junction position (a 1e-3 offset moves it by ~1e-8),
// while the jump of the one-sided normal derivatives is first order. This pass moves the
// free nodes by damped Gauss-Newton on that jump, measured on panels at least 2h away
// from anchors and junctions. Panel counts stay frozen.
struct Balance {
  int iterations = 0;
  double before = 0.0, after = 0.0;  // max relative jump
};

Balance balance_sides(const BipolarKernel& k, PolyContinuum& K, double h, const std::vector<int>& counts,
                      const std::function<bool(const PolyContinuum&)>& admissible, double cap_slack) {
  const Surface& s = k.surface();
  const auto deg = degrees(K);
  struct Param {
    int node;
    cplx dir;
  };
  std::vector<Param> params;
  std::vector<cplx> ends;
  for (std::size_t v = 0; v < K.nodes.size(); ++v) {
    if (K.anchor_of[v] >= 0 || deg[v] != 2) ends.push_back(K.nodes[v]);
    if (K.anchor_of[v] >= 0) continue;
    if (deg[v] == 2) {
      const cplx n = node_normal(s, K, static_cast<int>(v));
      if (std::abs(n) > 0.0) params.push_back({static_cast<int>(v), n});
    } else {
      params.push_back({static_cast<int>(v), 1.0});
      params.push_back({static_cast<int>(v), kI});
    }
  }
  Balance b;
  if (params.empty()) return b;

  struct Eval {
    Eigen::VectorXd r;
    double cap = kInf;
    double worst = kInf;
  };
  std::vector<char> used;  // panel mask, fixed by the starting geometry
  auto evaluate = [&](const PolyContinuum& C) {
    Eval ev;
    CapacityResult res;
    try {
      res = equilibrium_measure(k, PanelDiscretization::from_continuum(s, C, h, counts));
    } catch (const NumericalError&) {
      return ev;
    }
    const auto& P = res.measure.disc.panels;
    if (used.empty()) {
      used.assign(P.size(), 1);
      for (std::size_t i = 0; i < P.size(); ++i)
        for (cplx e : ends)
          if (s.distance(P[i].mid, e) < 2 * h) used[i] = 0;
    }
    if (used.size() != P.size()) return ev;
    std::vector<double> r;
    ev.worst = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
      if (!used[i]) continue;
      const auto [dp, dm] = normal_derivatives(k, res, static_cast<int>(i));
      const double rel = (dp - dm) / std::max(dp + dm, 1e-300);
      ev.worst = std::max(ev.worst, std::abs(rel));
      r.push_back(rel * std::sqrt(P[i].length));
    }
    ev.r = Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    ev.cap = res.capacity;
    return ev;
  };
  auto moved = [&](const PolyContinuum& C, const Eigen::VectorXd& x) {
    PolyContinuum out = C;
    for (std::size_t j = 0; j < params.size(); ++j) out.nodes[params[j].node] += x[j] * params[j].dir;
    return out;
  };

  Eval cur = evaluate(K);
  if (!std::isfinite(cur.cap) || cur.r.size() == 0) return b;
  b.before = b.after = cur.worst;
  const double cap0 = cur.cap;
  const double fd = 1e-3 * h, max_step = 0.5 * h;
  double lambda = 1e-6;
  for (int it = 0; it < 8 && cur.worst > 1e-4; ++it) {
    const Eigen::Index m = cur.r.size(), n = static_cast<Eigen::Index>(params.size());
    Eigen::MatrixXd J(m, n);
    bool ok = true;
    for (Eigen::Index j = 0; j < n && ok; ++j) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      x[j] = fd;
      const Eval e = evaluate(moved(K, x));
      if (e.r.size() != m) ok = false;
      else J.col(j) = (e.r - cur.r) / fd;
    }
    if (!ok) break;
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * cur.r;
    bool accepted = false;
    for (int tries = 0; tries < 6 && !accepted; ++tries) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal() += lambda * (JtJ.diagonal().array() + 1e-12).matrix();
      Eigen::VectorXd x = -A.ldlt().solve(g);
      const double big = x.cwiseAbs().maxCoeff();
      if (!std::isfinite(big)) break;
      if (big > max_step) x *= max_step / big;
      PolyContinuum C = moved(K, x);
      const Eval e = evaluate(C);
      if (e.r.size() == m && e.r.squaredNorm() < cur.r.squaredNorm() && e.cap <= cap0 + cap_slack && admissible(C)) {
        K = std::move(C);
        cur = e;
        lambda = std::max(lambda / 10, 1e-9);
        accepted = true;
      } else {
        lambda *= 10;
      }
    }
    if (!accepted) break;
    ++b.iterations;
  }
  b.after = cur.worst;
  return b;
}

}  // namespace

double ProblemInstance::diameter() const { return anchor_spread(surface, anchors.points()); }

void ProblemInstance::validate() const {
  if (pattern.size() != static_cast<int>(anchors.size())) throw InputError("pattern size does not match anchors");
  pattern.validate();
  for (const auto& l : pattern.labels())
    if (!surface.is_torus() && (l.m != 0 || l.n != 0)) throw InputError("winding labels need a torus");
}

PolyContinuum resample(const Surface& s, const PolyContinuum& K, double step) {
  const auto cs = chains(s, K);
  PolyContinuum out;
  std::vector<int> id(K.nodes.size(), -1);
  auto keep = [&](int v) {
    if (id[v] < 0) id[v] = out.add_node(K.nodes[v], K.anchor_of[v]);
    return id[v];
  };
  for (const auto& c : cs) {
    const int a = keep(c.nodes.front()), b = keep(c.nodes.back());
    const auto sl = arclength(c.pts);
    const double L = sl.back();
    const int n = std::max(1, static_cast<int>(std::ceil(L / step - 1e-9)));
    int prev = a;
    for (int j = 1; j < n; ++j) {
      const int id2 = out.add_node(point_at(c.pts, sl, L * j / n));
      out.add_edge(prev, id2);
      prev = id2;
    }
    const Lift sh = s.is_torus() ? s.lattice_coordinates(c.pts.back() - K.nodes[c.nodes.back()], 1e-6) : Lift{};
    out.add_edge(prev, b, sh);
  }
  for (std::size_t v = 0; v < K.nodes.size(); ++v)
    if (K.anchor_of[v] >= 0) keep(static_cast<int>(v));
  return out;
}

PolyContinuum initial_continuum(const ProblemInstance& inst, double spacing) {
  const Surface& s = inst.surface;
  const auto& E = inst.anchors.points();
  const int N = static_cast<int>(E.size());
  PolyContinuum K;
  for (int i = 0; i < N; ++i) K.add_node(E[i], i);
  UnionFind uf(N);
  for (const auto& l : inst.pattern.labels())
    if (l.m == 0 && l.n == 0) uf.join(l.i, l.j);
  std::vector<std::vector<int>> groups(N);
  for (int i = 0; i < N; ++i) groups[uf.find(i)].push_back(i);
  for (const auto& g : groups) {
    if (g.size() < 2) continue;
    if (g.size() == 2) {
      add_straight(s, K, g[0], g[1], {}, spacing);
      continue;
    }
    cplx c = 0.0;
    for (int i : g) c += E[i];
    c /= double(g.size());
    const int hub = K.add_node(c);
    for (int i : g) add_straight(s, K, hub, i, {}, spacing);
  }
  const double eps = 2.0 * inst.panel_size();
  for (const auto& l : inst.pattern.labels()) {
    if (l.m == 0 && l.n == 0) continue;
    if (contains_class(s, K, inst.anchors, l, eps)) continue;
    const cplx w = s.lattice(l.m, l.n);
    // is e_i on the closed line through e_j with direction w?
    double t_on = -1.0;
    {
      const cplx u = E[l.i] - E[l.j];
      // u - t w in the lattice: solve in cell coordinates
      const auto [x, y] = s.cell_coordinates(u);
      const double gm = l.m, gn = l.n;
      const int bound = std::abs(l.m) + std::abs(l.n) + 2;
      for (int a = -bound; a <= bound && t_on < 0; ++a) {
        const double t = gm != 0 ? (x - a) / gm : (y - a) / gn;
        if (t <= 1e-9 || t >= 1 - 1e-9) continue;
        const double rx = x - t * gm, ry = y - t * gn;
        if (std::abs(rx - std::round(rx)) < 1e-9 && std::abs(ry - std::round(ry)) < 1e-9) t_on = t;
      }
    }
    if (t_on > 0) {
      const cplx pi = E[l.j] + t_on * w;
      const Lift Li = s.lattice_coordinates(pi - E[l.i], 1e-6);
      add_straight(s, K, l.j, l.i, Li, spacing);
      add_straight(s, K, l.i, l.j, {l.m - Li.m, l.n - Li.n}, spacing);
    } else {
      if (uf.find(l.i) != uf.find(l.j)) {
        add_straight(s, K, l.i, l.j, {}, spacing);
        uf.join(l.i, l.j);
      }
      add_straight(s, K, l.j, l.j, {l.m, l.n}, spacing);
    }
  }
  return K;
}

PolyContinuum random_deformation(const Surface& s, const PolyContinuum& K, double amplitude, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  PolyContinuum out = K;
  const auto deg = degrees(K);
  std::vector<cplx> disp(K.nodes.size(), 0.0);
  for (std::size_t v = 0; v < K.nodes.size(); ++v)
    if (K.anchor_of[v] < 0 && deg[v] != 2) disp[v] = 0.5 * amplitude * cplx(U(rng), U(rng));
  for (const auto& c : chains(s, K)) {
    const auto sl = arclength(c.pts);
    const double L = sl.back();
    if (L <= 0.0) continue;
    const double c1 = U(rng), c2 = U(rng) / 2, c3 = U(rng) / 3;
    const cplx d0 = disp[c.nodes.front()], d1 = disp[c.nodes.back()];
    for (std::size_t k = 1; k + 1 < c.nodes.size(); ++k) {
      const double t = sl[k] / L;
      const cplx tan = c.pts[k + 1] - c.pts[k - 1];
      const cplx nrm = std::abs(tan) > 0 ? kI * tan / std::abs(tan) : cplx{};
      const double bump = amplitude * (c1 * std::sin(kPi * t) + c2 * std::sin(2 * kPi * t) + c3 * std::sin(3 * kPi * t));
      out.nodes[c.nodes[k]] += (1 - t) * d0 + t * d1 + bump * nrm;
    }
  }
  for (std::size_t v = 0; v < K.nodes.size(); ++v)
    if (K.anchor_of[v] < 0 && deg[v] != 2) out.nodes[v] += disp[v];
  return out;
}

double continuum_distance(const Surface& s, const PolyContinuum& a, const PolyContinuum& b, double step) {
  const auto pa = a.sample(s, step), pb = b.sample(s, step);
  return hausdorff_distance(s, std::span<const cplx>(pa), std::span<const cplx>(pb));
}

CapacityResult continuum_capacity(const Surface& s, const PolyContinuum& K, double h) {
  return equilibrium_measure(BipolarKernel(s), PanelDiscretization::from_continuum(s, K, h));
}

Certificates certify(const ProblemInstance& inst, const PolyContinuum& K, const CapacityResult& r, int jip_trials) {
  const Surface& s = inst.surface;
  const BipolarKernel k(s);
  Certificates c;
  c.s_property = s_property_residual(k, r, K).residual;
  std::mt19937_64 rng(inst.seed);
  const auto probes = default_probes(s, r.measure.disc, 16);
  const CauchyKernel ck = s.is_torus() ? CauchyKernel::with_random_spectators(s, inst.anchors.points(), probes, rng)
                                       : CauchyKernel(s, inst.anchors.points());
  const SchifferProbe sp(k, r);
  // D_h is quadratic in h; normalised by max |h|^2 on the support so that the torus
  // kernel (whose size depends on the spectators) and the sphere kernel compare
  for (cplx x : probes) {
    double hmax = 0.0;
    for (const auto& p : r.measure.disc.panels) hmax = std::max(hmax, std::abs(ck(x, p.mid)));
    if (hmax > 0.0) c.schiffer = std::max(c.schiffer, std::abs(sp.residual(ck, x)) / (hmax * hmax));
  }
  if (jip_trials > 0) {
    const auto fol = classify_foliation(k, r);
    const double h = r.measure.disc.h;
    std::uniform_real_distribution<double> amp(0.02, 0.15);
    for (int t = 0; t < jip_trials; ++t) {
      const PolyContinuum D = random_deformation(s, K, amp(rng) * inst.diameter(), rng);
      ++c.jip_trials;
      if (jip_check(k, r, fol, D).holds) ++c.jip_held;
      if (continuum_capacity(s, D, h).capacity >= r.capacity - 5e-3) ++c.jip_ordered;
    }
  }
  return c;
}

Solution solve_shape_descent(const ProblemInstance& inst, const DescentOptions& opt) {
  inst.validate();
  const Surface& s = inst.surface;
  const double diam = inst.diameter();
  const double h = inst.panel_size();
  const double spacing = opt.node_spacing > 0 ? opt.node_spacing : diam / 8;
  double beta = opt.beta0 > 0 ? opt.beta0 : 0.05 * diam;
  const double floor = opt.beta_floor > 0 ? opt.beta_floor : 1e-4 * diam;
  const double eps = 2.0 * h;
  const BipolarKernel k(s);

  PolyContinuum K = inst.initial ? resample(s, *inst.initial, spacing) : initial_continuum(inst, spacing);
  auto feasible = [&](const PolyContinuum& C) {
    return exceeds_pattern(s, C, inst.anchors, inst.pattern, eps) && distance_to_infinity(s, C, h) > 2 * h;
  };
  if (!feasible(K)) throw InputError("infeasible start");
  // panel counts are frozen within a sweep so that node moves vary the objective smoothly;
  // rounding (not ceil) keeps arms of exactly k h from flipping count on tiny moves
  std::vector<int> counts;
  auto freeze = [&](const PolyContinuum& C) {
    counts.clear();
    for (std::size_t e = 0; e < C.edges.size(); ++e)
      counts.push_back(std::max(1, static_cast<int>(std::lround(C.edge_length(s, e) / h))));
  };
  auto cap_of = [&](const PolyContinuum& C) {
    try {
      return equilibrium_measure(k, PanelDiscretization::from_continuum(s, C, h, counts)).capacity;
    } catch (const NumericalError&) {
      return kInf;
    }
  };
  // cheap per-candidate guard; node moves keep the edge lifts so classes are unchanged
  auto clear_of_infinity = [&](const PolyContinuum& C, int v) {
    if (!s.is_torus()) return true;
    return s.distance(C.nodes[v], s.infinity_coord()) > 4 * h;
  };

  Solution sol;
  sol.seed = inst.seed;
  sol.route = "shape";
  freeze(K);
  double cap = cap_of(K);
  sol.history.push_back(cap);
  int sweep = 0;
  for (; sweep < opt.max_sweeps; ++sweep) {
    const double start = cap;
    const auto deg = degrees(K);
    for (std::size_t v = 0; v < K.nodes.size(); ++v) {
      if (K.anchor_of[v] >= 0) continue;
      std::vector<cplx> dirs;
      if (deg[v] == 2) {
        const cplx n = node_normal(s, K, static_cast<int>(v));
        if (std::abs(n) == 0.0) continue;
        dirs = {n, -n};
      } else {
        dirs = {1.0, kI, -1.0, -kI};
      }
      for (cplx d : dirs) {
        PolyContinuum C = K;
        C.nodes[v] += beta * d;
        if (!clear_of_infinity(C, static_cast<int>(v))) continue;
        const double c = cap_of(C);
        if (c < cap) {
          if (!feasible(C)) continue;
          K = std::move(C);
          cap = c;
          sol.history.push_back(cap);
          break;
        }
      }
    }
    // keep the shape resolution as arcs stretch
    if (K.max_edge_length(s) > 2 * spacing) K = split_long_edges(s, K, 2 * spacing);
    freeze(K);
    cap = cap_of(K);
    // junction birth: free nodes of different chains closer than 2h
    {
      const auto dg = degrees(K);
      bool merged = false;
      for (std::size_t u = 0; u < K.nodes.size() && !merged; ++u)
        for (std::size_t w = u + 1; w < K.nodes.size() && !merged; ++w) {
          if (K.anchor_of[u] >= 0 || K.anchor_of[w] >= 0 || dg[u] != 2 || dg[w] != 2) continue;
          if (s.distance(K.nodes[u], K.nodes[w]) >= 2 * h) continue;
          bool adjacent = false;
          for (const auto& e : K.edges)
            if ((e.a == (int)u && e.b == (int)w) || (e.a == (int)w && e.b == (int)u)) adjacent = true;
          if (adjacent) continue;
          PolyContinuum C = merge_nodes(s, K, static_cast<int>(u), static_cast<int>(w));
          const auto kept = counts;
          freeze(C);
          const double c = cap_of(C);
          if (c < cap && feasible(C)) {
            K = std::move(C);
            cap = c;
            sol.history.push_back(cap);
            merged = true;
          } else {
            counts = kept;
          }
        }
    }
    if (start - cap < inst.tol.capacity) {
      if (beta / 2 < floor) break;
      beta /= 2;
    }
  }
  sol.sweeps = sweep;
  sol.final_step = beta;
  if (sweep == opt.max_sweeps) sol.warnings.push_back("sweep limit reached before the step floor");
  freeze(K);
  balance_sides(k, K, h, counts, feasible, inst.tol.capacity);
  sol.minimizer = K;
  sol.capacity = equilibrium_measure(k, PanelDiscretization::from_continuum(s, K, h));
  sol.certificates = certify(inst, K, sol.capacity, 0);
  return sol;
}

QuadDiff boutroux_ansatz(const ProblemInstance& inst, int start, std::mt19937_64& rng) {
  const Surface& s = inst.surface;
  const auto& E = inst.anchors.points();
  const int N = static_cast<int>(E.size());
  const double diam = inst.diameter();
  std::normal_distribution<double> nd(0.0, 1.0);
  auto jitter = [&]() { return start == 0 ? cplx{} : 0.1 * diam * cplx(nd(rng), nd(rng)); };
  cplx c = 0.0;
  for (cplx e : E) c += s.is_torus() ? s.nearest_lift(e, E[0]) : e;
  c /= double(N);
  // principal direction of the anchors
  cplx m2 = 0.0;
  for (cplx e : E) {
    const cplx d = (s.is_torus() ? s.nearest_lift(e, E[0]) : e) - c;
    m2 += d * d;
  }
  const cplx dir = std::abs(m2) > 0 ? std::sqrt(m2 / std::abs(m2)) : cplx(1.0);
  std::vector<QuadZero> zeros;
  const int simple = N - 2;
  for (int j = 0; j < simple; ++j) {
    const double t = simple == 1 ? 0.0 : (double(j) / (simple - 1) - 0.5);
    zeros.push_back({c + 0.5 * diam * t * dir + jitter(), 1});
  }
  if (s.is_torus()) {
    zeros.push_back({s.infinity_coord() + 0.5 + jitter(), 2});
    zeros.push_back({s.infinity_coord() + 0.5 * s.tau() + jitter(), 2});
  }
  return QuadDiff(s, E, zeros);
}

Solution solve_boutroux_route(const ProblemInstance& inst) {
  inst.validate();
  const Surface& s = inst.surface;
  const double h = inst.panel_size();
  const double step = std::max(h, inst.diameter() / 64);
  std::mt19937_64 rng(inst.seed);
  bool solved = false;
  BoutrouxOptions bo;
  bo.tol = inst.tol.boutroux;
  for (int start = 0; start < 10; ++start) {
    QuadDiff q;
    BoutrouxSolve bs;
    try {
      q = boutroux_ansatz(inst, start, rng);
      bs = boutroux_solve(q, bo);
    } catch (const NumericalError&) {
      continue;
    } catch (const InputError&) {
      continue;
    }
    solved = true;
    CriticalGraph g;
    try {
      g = build_critical_graph(bs.q);
    } catch (const NumericalError&) {
      continue;
    }
    const PolyContinuum K = resample(s, g.continuum(s), step);
    if (!exceeds_pattern(s, K, inst.anchors, inst.pattern, 2 * h)) continue;
    Solution sol;
    sol.seed = inst.seed;
    sol.route = "boutroux";
    sol.minimizer = K;
    sol.capacity = continuum_capacity(s, K, h);
    sol.quaddiff = bs.q;
    sol.certificates = certify(inst, K, sol.capacity, 0);
    sol.certificates.boutroux = bs.residual.norm();
    sol.history = {sol.capacity.capacity};
    if (start > 0) sol.warnings.push_back("converged from perturbed start " + std::to_string(start));
    return sol;
  }
  if (!solved) throw NumericalError("no Boutroux solution found from 10 starts");
  throw NumericalError("pattern unreachable from ansatz");
}

RouteComparison solve_both(const ProblemInstance& inst, const DescentOptions& opt) {
  RouteComparison rc;
  rc.shape = solve_shape_descent(inst, opt);
  rc.boutroux = solve_boutroux_route(inst);
  rc.capacity_gap = std::abs(rc.shape.capacity.capacity - rc.boutroux.capacity.capacity);
  rc.hausdorff = continuum_distance(inst.surface, rc.shape.minimizer, rc.boutroux.minimizer, 0.25 * inst.panel_size());
  return rc;
}

UniquenessReport uniqueness_probe(const ProblemInstance& inst, const Solution& sol, int trials,
                                  const DescentOptions& opt) {
  UniquenessReport rep;
  std::mt19937_64 rng(inst.seed ^ 0x9e3779b97f4a7c15ULL);
  const double diam = inst.diameter();
  const double spacing = opt.node_spacing > 0 ? opt.node_spacing : diam / 8;
  const double h = inst.panel_size();
  std::vector<PolyContinuum> mins = {sol.minimizer};
  rep.capacities.push_back(sol.capacity.capacity);
  for (int t = 0; t < trials; ++t) {
    ProblemInstance run = inst;
    const PolyContinuum base = initial_continuum(inst, spacing);
    PolyContinuum start;
    for (int attempt = 0; attempt < 20; ++attempt) {
      start = random_deformation(inst.surface, base, 0.1 * diam, rng);
      if (exceeds_pattern(inst.surface, start, inst.anchors, inst.pattern, 2 * h)) break;
    }
    run.initial = start;
    const Solution s = solve_shape_descent(run, opt);
    mins.push_back(s.minimizer);
    rep.capacities.push_back(s.capacity.capacity);
  }
  for (std::size_t i = 0; i < mins.size(); ++i)
    for (std::size_t j = i + 1; j < mins.size(); ++j)
      rep.hausdorff_spread = std::max(rep.hausdorff_spread, continuum_distance(inst.surface, mins[i], mins[j], 0.25 * h));
  const auto [lo, hi] = std::minmax_element(rep.capacities.begin(), rep.capacities.end());
  rep.capacity_spread = *hi - *lo;
  rep.supports_uniqueness = rep.capacity_spread <= 2 * inst.tol.capacity;
  return rep;
}

}  // namespace chebotarev
