#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "chebotarev/trajectories.hpp"
#include "doctest.h"

using namespace chebotarev;

namespace {

const Surface kSphere = Surface::sphere();
const Surface kTorus = Surface::torus({0.0, 1.0}, {0.5, 0.5});

std::vector<cplx> cube_roots() { return {1.0, std::polar(1.0, 2 * kPi / 3), std::polar(1.0, 4 * kPi / 3)}; }

PolyContinuum segment(cplx a, cplx b) {
  PolyContinuum K;
  const int u = K.add_node(a, 0), v = K.add_node(b, 1);
  K.add_edge(u, v);
  return K;
}

PolyContinuum star3() {
  PolyContinuum K;
  const int c = K.add_node(0.0);
  int i = 0;
  for (cplx a : cube_roots()) K.add_edge(c, K.add_node(a, i++));
  return K;
}

// Polyline through -1 and 1 displaced by `bump(t)` along i, t in [-1, 1].
template <class F>
PolyContinuum deformed_segment(F bump, int pieces = 40) {
  PolyContinuum K;
  int prev = K.add_node(-1.0, 0);
  for (int j = 1; j < pieces; ++j) {
    const double t = -1.0 + 2.0 * j / pieces;
    const int id = K.add_node(cplx(t, bump(t)));
    K.add_edge(prev, id);
    prev = id;
  }
  K.add_edge(prev, K.add_node(1.0, 1));
  return K;
}

PolyContinuum bulged_arc(double sagitta) {
  const double R = (1 + sagitta * sagitta) / (2 * sagitta);
  return deformed_segment([&](double t) { return sagitta - R + std::sqrt(R * R - t * t); });
}

CapacityResult solve(const Surface& s, const PolyContinuum& K, double h) {
  return equilibrium_measure(BipolarKernel(s), PanelDiscretization::from_continuum(s, K, h));
}

double max_re_drift(const QuadDiff& q, const Trajectory& t) {
  // Re int sqrt Q from the first point along the polyline
  double worst = 0.0;
  cplx v = 0.0;
  cplx acc = 0.0;
  for (std::size_t i = 0; i + 1 < t.points.size(); ++i) {
    const cplx seg[2] = {t.points[i], t.points[i + 1]};
    cplx vend;
    acc += integrate_sqrt(q, seg, i == 0, i + 2 == t.points.size(), v, &vend);
    v = vend;
    worst = std::max(worst, std::abs(acc.real()));
  }
  return worst;
}

// Angular spread of W along a line, averaging the two sides to cancel the offset.
double radial_deviation(const BipolarKernel& k, const CapacityResult& r, const Trajectory& L) {
  double a0 = 0.0, dev = 0.0;
  bool first = true;
  const std::size_t stride = std::max<std::size_t>(1, L.points.size() / 8);
  for (std::size_t i = 2; i + 1 < 0.9 * L.points.size(); i += stride) {
    const cplx z = L.points[i];
    const cplx n = kI * (L.points[i + 1] - z) / std::abs(L.points[i + 1] - z);
    const double a1 = std::arg(conformal_map_W(k, r, z + 1e-4 * n));
    const double a2 = std::arg(conformal_map_W(k, r, z - 1e-4 * n));
    const double a = a1 + 0.5 * std::remainder(a2 - a1, 2 * kPi);
    if (first) {
      a0 = a;
      first = false;
    }
    dev = std::max(dev, std::abs(std::remainder(a - a0, 2 * kPi)));
  }
  return dev;
}

}  // namespace

TEST_CASE("flat differential: vertical lines") {
  TraceOptions opt;
  opt.budget = 3.0;
  const auto t = trace_vertical(kSphere, [](cplx) { return cplx(1.0); }, {}, {0.3, -1.0}, 1, 1.0, opt);
  REQUIRE(t.points.size() > 2);
  double drift = 0.0;
  for (cplx z : t.points) drift = std::max(drift, std::abs(z.real() - 0.3));
  CHECK(drift < 1e-12);
  CHECK(t.points.back().imag() > 1.9);
  CHECK(t.q_length == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("segment critical graph") {
  const QuadDiff q(kSphere, {-1.0, 1.0}, {});
  const auto g = build_critical_graph(q);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.unmatched.empty());
  for (int v : g.valence) CHECK(v == 1);
  const auto& path = g.edges[0].path;
  double off = 0.0;
  for (cplx z : path.points) off = std::max(off, std::abs(z.imag()));
  CHECK(off < 1e-6);
  CHECK(path.level_defect <= 1e-8 * path.q_length);
  CHECK(max_re_drift(q, path) <= 1e-8 * std::max(1.0, path.q_length));
  // |sqrt Q| length of the segment is pi
  CHECK(path.q_length == doctest::Approx(kPi).epsilon(1e-6));
}

TEST_CASE("three-star critical graph") {
  const QuadDiff q(kSphere, cube_roots(), {{0.0, 1}});
  const auto g = build_critical_graph(q);
  CHECK(g.edges.size() == 3);
  CHECK(g.unmatched.empty());
  for (std::size_t i = 0; i < g.vertices.size(); ++i)
    CHECK(g.valence[i] == (g.vertices[i].order == 1 ? 3 : 1));
  for (const auto& e : g.edges) {
    CHECK(e.path.level_defect <= 1e-8 * e.path.q_length);
    // edges are the rays to the anchors
    for (cplx z : e.path.points) {
      const cplx a = q.anchors()[g.vertices[e.a].anchor >= 0 ? g.vertices[e.a].anchor : g.vertices[e.b].anchor];
      if (std::abs(z) > 1e-9) CHECK(std::abs(std::arg(z / a)) < 1e-5);
    }
  }
  const PolyContinuum K = g.continuum(kSphere);
  CHECK(K.total_length(kSphere) == doctest::Approx(3.0).epsilon(1e-5));
}

TEST_CASE("symmetric torus critical graph") {
  const QuadDiff q(kTorus, {-0.25, 0.25}, {{0.5, 2}, {{0.0, 0.5}, 2}});
  REQUIRE(boutroux_residual(q).norm() < 1e-8);
  const auto g = build_critical_graph(q);
  CHECK(g.unmatched.empty());
  for (std::size_t i = 0; i < g.vertices.size(); ++i)
    CHECK(g.valence[i] == (g.vertices[i].order == 2 ? 4 : 1));
  bool found = false;
  for (const auto& e : g.edges) {
    CHECK(e.path.level_defect <= 1e-8 * e.path.q_length);
    if (g.vertices[e.a].anchor >= 0 && g.vertices[e.b].anchor >= 0) {
      double off = 0.0;
      for (cplx z : e.path.points) off = std::max(off, std::abs(z.imag()));
      CHECK(off < 1e-6);
      found = true;
    }
  }
  CHECK(found);
  const PolyContinuum K = g.continuum(kTorus);
  CHECK(K.total_length(kTorus) == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("non-Boutroux differential does not close") {
  // star with the zero moved off centre
  const QuadDiff q(kSphere, cube_roots(), {{{0.2, 0.1}, 1}});
  TraceOptions opt;
  opt.budget = 20.0;
  CHECK_THROWS_WITH_AS(build_critical_graph(q, opt), "non-closing trajectory: Boutroux residual too large?",
                       NumericalError);
}

TEST_CASE("Green function from the Boutroux differential") {
  const BipolarKernel k(kSphere);
  SUBCASE("segment") {
    const QuadDiff q(kSphere, {-1.0, 1.0}, {});
    const auto r = solve(kSphere, segment(-1.0, 1.0), 2.0 / 400);
    for (cplx p : {cplx(0.3, 0.5), cplx(-1.5, 0.2), cplx(2, -1), cplx(0, -0.4), cplx(1.2, 0.05)}) {
      const double exact = std::log(std::abs(p + std::sqrt(p - 1.0) * std::sqrt(p + 1.0)));
      CHECK(boutroux_green(q, p) == doctest::Approx(exact).epsilon(1e-9));
      CHECK(std::abs(green_function(k, r, p) - boutroux_green(q, p)) < 5e-3);
    }
  }
  SUBCASE("three-star") {
    const QuadDiff q(kSphere, cube_roots(), {{0.0, 1}});
    const auto g = build_critical_graph(q);
    const auto r = solve(kSphere, g.continuum(kSphere), 0.01);
    for (cplx p : {cplx(0.3, 0.5), cplx(-1.5, 0.2), cplx(2, -1), cplx(0, -0.4), cplx(1.2, 0.05)})
      CHECK(std::abs(green_function(k, r, p) - boutroux_green(q, p)) < 5e-3);
  }
}

TEST_CASE("S-property residual") {
  const BipolarKernel k(kSphere);
  const auto Ks = segment(-1.0, 1.0);
  const auto rs = solve(kSphere, Ks, 2.0 / 400);
  const auto seg = s_property_residual(k, rs, Ks);
  CHECK(seg.used > 32);
  CHECK(seg.residual <= 2e-2);

  const auto Kb = bulged_arc(0.3);
  const auto rb = solve(kSphere, Kb, 2.0 / 400);
  CHECK(s_property_residual(k, rb, Kb).residual >= 0.2);

  const BipolarKernel kt(kTorus);
  const auto Kt = segment(-0.25, 0.25);
  const auto rt = solve(kTorus, Kt, 0.5 / 400);
  const auto tor = s_property_residual(kt, rt, Kt);
  CHECK(tor.used > 32);
  CHECK(tor.residual <= 2e-2);
}

TEST_CASE("foliation classification and mass") {
  const BipolarKernel k(kSphere);
  const auto rs = solve(kSphere, segment(-1.0, 1.0), 2.0 / 400);
  const auto fs = classify_foliation(k, rs);
  CHECK(fs.total_mass == doctest::Approx(2 * kPi).epsilon(1e-2 / (2 * kPi)));
  for (const auto& p : fs.points) CHECK(p.cls == Dominance::Both);

  const auto rb = solve(kSphere, bulged_arc(0.3), 2.0 / 400);
  const auto fb = classify_foliation(k, rb);
  CHECK(std::abs(fb.total_mass - 2 * kPi) < 1e-2);
  // the panel nearest the apex at 0.3i
  std::size_t mid = 0;
  for (std::size_t i = 0; i < fb.points.size(); ++i)
    if (std::abs(fb.points[i].pos - cplx(0, 0.3)) < std::abs(fb.points[mid].pos - cplx(0, 0.3))) mid = i;
  const auto& m = fb.points[mid];
  const Dominance convex = m.normal.imag() > 0 ? Dominance::Plus : Dominance::Minus;
  CHECK(m.cls == convex);
}

TEST_CASE("conformal map W") {
  const BipolarKernel k(kSphere);
  const auto K = segment(-1.0, 1.0);
  const std::vector<cplx> grid = {{0.3, 0.5}, {-1.5, 0.2}, {2, -1}, {0, -0.4}, {1.2, 0.01}, {-0.7, -0.9}};
  double err[2];
  int idx = 0;
  for (int n : {200, 400}) {
    const auto r = solve(kSphere, K, 2.0 / n);
    double worst = 0.0;
    for (cplx p : grid) {
      const cplx W = conformal_map_W(k, r, p);
      CHECK(std::abs(std::abs(W) - std::exp(-green_function(k, r, p))) < 1e-9);
      const cplx joukowski = 1.0 / (p + std::sqrt(p - 1.0) * std::sqrt(p + 1.0));
      worst = std::max(worst, std::abs(W - joukowski));
    }
    err[idx++] = worst;
  }
  // limited by the piecewise-constant density near the endpoints; converges under refinement
  CHECK(err[1] < 1e-4);
  CHECK(err[1] < 0.7 * err[0]);

  const auto r = solve(kSphere, K, 2.0 / 200);
  const cplx far = 1e3 * cplx(0.6, 0.8);
  CHECK(std::abs(conformal_map_W(k, r, far) / (1.0 / far) - r.capacity) < 1e-3);

  const BipolarKernel kt(kTorus);
  const auto rt = solve(kTorus, segment(-0.25, 0.25), 0.5 / 200);
  const cplx near_inf = cplx(0.5, 0.5) + 1e-3 * cplx(0.8, 0.6);
  const cplx W = conformal_map_W(kt, rt, near_inf);
  CHECK(std::abs(W / (kTorus.chart_coeff() * (near_inf - kTorus.infinity_coord())) - rt.capacity) < 1e-3);
  CHECK(std::abs(std::abs(W) - std::exp(-green_function(kt, rt, near_inf))) < 1e-9);
}

TEST_CASE("dissection") {
  const BipolarKernel k(kSphere);
  const auto rs = solve(kSphere, segment(-1.0, 1.0), 2.0 / 200);
  CHECK(dissection(k, rs).empty());
  for (cplx p : {cplx(0.3, 0.5), cplx(-1.5, 0.2), cplx(0.0, -0.05), cplx(3, 3)}) CHECK(flows_to_infinity(k, rs, p));

  const BipolarKernel kt(kTorus);
  const auto rt = solve(kTorus, segment(-0.25, 0.25), 0.5 / 400);
  const auto sigma = dissection(kt, rt);
  std::set<int> origins;
  for (const auto& L : sigma) {
    origins.insert(L.origin);
    CHECK(L.stop == "K");
    CHECK(radial_deviation(kt, rt, L) <= 1e-3);
  }
  CHECK(origins.size() == 2);
  CHECK(count_green_zeros(kt, rt).count == 2);
  // off Sigma and K the complement flows out to infinity
  for (cplx p : {cplx(0.1, 0.3), cplx(0.7, 0.2), cplx(-0.3, -0.3), cplx(0.4, 0.8)}) CHECK(flows_to_infinity(kt, rt, p));
}

TEST_CASE("Jenkins interception") {
  const BipolarKernel k(kSphere);
  const auto F = segment(-1.0, 1.0);
  const auto rF = solve(kSphere, F, 2.0 / 200);
  const auto fol = classify_foliation(k, rF);

  const auto self = jip_check(k, rF, fol, F);
  CHECK(self.samples == 200);
  CHECK(self.holds);

  const auto moved = jip_check(k, rF, fol, segment(19.0, 21.0));
  CHECK_FALSE(moved.holds);
  CHECK(moved.missed.size() == 200);

  const auto Kb = bulged_arc(0.3);
  const auto bul = jip_check(k, rF, fol, Kb);
  CHECK(bul.holds);
  CHECK(solve(kSphere, Kb, 2.0 / 200).capacity >= rF.capacity - 5e-3);
}

TEST_CASE("interception implies larger capacity on random deformations") {
  const BipolarKernel k(kSphere);
  const auto rF = solve(kSphere, segment(-1.0, 1.0), 2.0 / 200);
  const auto fol = classify_foliation(k, rF);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> amp(-0.4, 0.4);
  int intercepting = 0;
  for (int trial = 0; trial < 4; ++trial) {
    const double a1 = amp(rng), a2 = amp(rng), a3 = amp(rng);
    const auto K = deformed_segment([&](double t) {
      const double w = 1 - t * t;
      return w * (a1 + a2 * t + a3 * t * t);
    });
    if (!jip_check(k, rF, fol, K, 200).holds) continue;
    ++intercepting;
    CHECK(solve(kSphere, K, 2.0 / 200).capacity >= rF.capacity - 5e-3);
  }
  CHECK(intercepting > 0);
}
