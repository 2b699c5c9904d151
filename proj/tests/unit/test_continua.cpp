#include <random>
#include <vector>

#include "chebotarev/continua.hpp"
#include "doctest.h"

using namespace chebotarev;

namespace {

const Surface kTorus = Surface::torus({0.0, 1.0}, {0.5, 0.5});

PolyContinuum segment_continuum(cplx a, cplx b, int pieces) {
  PolyContinuum K;
  int prev = K.add_node(a, 0);
  for (int k = 1; k < pieces; ++k) {
    const int id = K.add_node(a + (b - a) * (double(k) / pieces));
    K.add_edge(prev, id);
    prev = id;
  }
  const int last = K.add_node(b, 1);
  K.add_edge(prev, last);
  return K;
}

// Horizontal closed loop at height y through anchors at x0 < x1.
PolyContinuum horizontal_circle(double y, double x0, double x1) {
  PolyContinuum K;
  const int a = K.add_node({x0, y}, 0);
  const int b = K.add_node({x1, y}, 1);
  K.add_edge(a, b);
  K.add_edge(b, a, {1, 0});
  return K;
}

}  // namespace

TEST_CASE("contains_class on the torus segment and circle") {
  const AnchorSet E(kTorus, {0.2, 0.8});
  const PolyContinuum seg = segment_continuum(0.2, 0.8, 6);
  CHECK(contains_class(kTorus, seg, E, {0, 1, 0, 0}, 0.02));
  CHECK_FALSE(contains_class(kTorus, seg, E, {0, 1, 1, 0}, 0.02));
  CHECK_FALSE(contains_class(kTorus, seg, E, {0, 1, 0, 1}, 0.02));

  const PolyContinuum circ = horizontal_circle(0.0, 0.2, 0.8);
  CHECK(contains_class(kTorus, circ, E, {0, 1, 1, 0}, 0.02));
  CHECK(contains_class(kTorus, circ, E, {0, 1, 0, 0}, 0.02));
  CHECK(contains_class(kTorus, circ, E, {0, 1, -1, 0}, 0.02));
  CHECK_FALSE(contains_class(kTorus, circ, E, {0, 1, 0, 1}, 0.02));
  // the loop itself: e_0 to its own translate
  CHECK(contains_class(kTorus, circ, E, {0, 0, 1, 0}, 0.02));

  CHECK_THROWS_AS(contains_class(kTorus, seg, E, {0, 1, 0, 0}, 0.0), InputError);
  CHECK_THROWS_AS(contains_class(kTorus, seg, E, {0, 1, 0, 0}, -1.0), InputError);
}

TEST_CASE("gap closes once eps reaches half of it") {
  const AnchorSet E(kTorus, {0.1, 0.6});
  PolyContinuum K;
  const int a = K.add_node(0.1, 0), c = K.add_node(0.3);
  const int d = K.add_node(0.4), b = K.add_node(0.6, 1);
  K.add_edge(a, c);
  K.add_edge(d, b);
  CHECK_FALSE(contains_class(kTorus, K, E, {0, 1, 0, 0}, 0.049));
  CHECK(contains_class(kTorus, K, E, {0, 1, 0, 0}, 0.051));
}

TEST_CASE("exceeds_pattern examples") {
  const AnchorSet E(kTorus, {0.2, 0.8});
  const ConnectivityPattern P(2, {{0, 1, 0, 0}});
  CHECK(exceeds_pattern(kTorus, segment_continuum(0.2, 0.8, 4), E, P, 0.02));

  // anchor 1 isolated
  PolyContinuum iso = segment_continuum(0.2, 0.5, 3);
  iso.anchor_of.back() = -1;
  iso.add_node(0.8, 1);
  CHECK_FALSE(exceeds_pattern(kTorus, iso, E, P, 0.02));

  // extra idle component
  PolyContinuum extra = segment_continuum(0.2, 0.8, 4);
  const int u = extra.add_node({0.3, 0.3}), v = extra.add_node({0.6, 0.3});
  extra.add_edge(u, v);
  CHECK(extra.component_count() == 2);
  CHECK(fattened_component_count(kTorus, extra, 0.02) == 2);
  CHECK_FALSE(exceeds_pattern(kTorus, extra, E, P, 0.02));
  // once the idle piece is swallowed by the fattening it stops counting
  CHECK(exceeds_pattern(kTorus, extra, E, P, 0.2));

  // inadmissible: anchor 2 never appears
  const AnchorSet E3(kTorus, {0.2, 0.8, {0.3, 0.7}});
  const ConnectivityPattern bad(3, {{0, 1, 0, 0}});
  CHECK_FALSE(bad.admissible());
  CHECK_THROWS_WITH_AS(exceeds_pattern(kTorus, segment_continuum(0.2, 0.8, 4), E3, bad, 0.02),
                       "inadmissible pattern", InputError);
}

TEST_CASE("pattern canonicalisation") {
  const ConnectivityPattern P(2, {{0, 1, 1, 0}, {1, 0, -1, 0}, {0, 1, 0, 0}});
  CHECK(P.class_count() == 2);
  CHECK(P.max_winding() == 1);
  CHECK(P.entry(0, 1).size() == 2);
  const auto back = P.entry(1, 0);
  REQUIRE(back.size() == 2);
  bool has_inverse = false;
  for (const auto& l : back) has_inverse |= (l.m == -1 && l.n == 0);
  CHECK(has_inverse);
}

TEST_CASE("anchor set validation") {
  CHECK_THROWS_AS(AnchorSet(kTorus, {0.1, 0.1}), InputError);
  CHECK_THROWS_AS(AnchorSet(kTorus, {0.1, {1.1, 0.0}}), InputError);
  CHECK_THROWS_AS(AnchorSet(kTorus, {{0.5, 0.5}}), InputError);
}

TEST_CASE("fatten samples stay within eps") {
  const PolyContinuum K = segment_continuum({0.1, 0.1}, {0.7, 0.3}, 3);
  const double eps = 0.03;
  const auto pts = fatten(kTorus, K, eps);
  const auto pts2 = fatten(kTorus, segment_continuum({0.1, 0.1}, {0.7, 0.3}, 3), 2 * eps);
  double worst = 0.0;
  for (cplx z : pts) {
    double d = 1e9;
    for (std::size_t e = 0; e < K.edges.size(); ++e)
      d = std::min(d, point_segment_distance(z, K.edge_start(kTorus, e), K.edge_end(kTorus, e)));
    worst = std::max(worst, d);
  }
  CHECK(worst <= eps * (1 + 1e-12));
  // sample count is linear in length
  const auto longer = fatten(kTorus, segment_continuum({0.1, 0.1}, {1.3, 0.7}, 6), eps);
  CHECK(double(longer.size()) / pts.size() == doctest::Approx(2.0).epsilon(0.15));
  CHECK(pts2.size() < pts.size());
}

TEST_CASE("refine preserves support and anchors") {
  const PolyContinuum K = horizontal_circle(0.2, 0.1, 0.6);
  const PolyContinuum R1 = refine(kTorus, K, 0.05);
  const PolyContinuum R2 = refine(kTorus, K, 0.025);
  CHECK(R1.max_edge_length(kTorus) <= 0.05 + 1e-12);
  CHECK(R2.nodes.size() == doctest::Approx(2.0 * R1.nodes.size()).epsilon(0.1));
  CHECK(R1.node_of_anchor(0) == K.node_of_anchor(0));
  CHECK(R1.node_of_anchor(1) == K.node_of_anchor(1));
  CHECK(R1.total_length(kTorus) == doctest::Approx(K.total_length(kTorus)).epsilon(1e-12));
  const auto a = K.sample(kTorus, 0.01), b = R1.sample(kTorus, 0.01);
  CHECK(hausdorff_distance(kTorus, std::span<const cplx>(a), std::span<const cplx>(b)) < 1e-2);
  for (cplx z : b) {
    double d = 1e9;
    for (std::size_t e = 0; e < K.edges.size(); ++e)
      d = std::min(d, point_segment_distance(kTorus.nearest_lift(z, K.edge_start(kTorus, e)),
                                             K.edge_start(kTorus, e), K.edge_end(kTorus, e)));
    CHECK(d < 1e-12);
  }
  const AnchorSet E(kTorus, {{0.1, 0.2}, {0.6, 0.2}});
  CHECK(contains_class(kTorus, R2, E, {0, 1, 1, 0}, 0.01));
}

TEST_CASE("membership is Hausdorff continuous") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const AnchorSet E(kTorus, {0.15, 0.75});
  const PolyContinuum K = segment_continuum(0.15, 0.75, 12);
  const double eps = 0.01, delta = 0.004;
  for (int trial = 0; trial < 20; ++trial) {
    PolyContinuum Kp = K;
    for (std::size_t v = 0; v < Kp.nodes.size(); ++v)
      if (Kp.anchor_of[v] < 0) Kp.nodes[v] += delta / std::sqrt(2.0) * cplx(u(rng), u(rng));
    for (const HomotopyLabel l : {HomotopyLabel{0, 1, 0, 0}, HomotopyLabel{0, 1, 1, 0}}) {
      if (contains_class(kTorus, K, E, l, eps)) CHECK(contains_class(kTorus, Kp, E, l, eps + 2 * delta));
    }
  }
}

TEST_CASE("exceeds_pattern is monotone in eps") {
  const AnchorSet E(kTorus, {0.1, 0.6});
  const ConnectivityPattern P(2, {{0, 1, 0, 0}});
  PolyContinuum K;
  const int a = K.add_node(0.1, 0), c = K.add_node(0.3);
  const int d = K.add_node(0.36), b = K.add_node(0.6, 1);
  K.add_edge(a, c);
  K.add_edge(d, b);
  bool seen = false;
  for (double eps = 0.005; eps < 0.2; eps *= 1.3) {
    const bool in = exceeds_pattern(kTorus, K, E, P, eps);
    if (seen) CHECK(in);
    seen = seen || in;
  }
  CHECK(seen);
}

TEST_CASE("union-find and BFS component counts agree") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick(0, 29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    PolyContinuum K;
    for (int v = 0; v < 30; ++v) K.add_node({u(rng), u(rng)});
    const int ne = trial % 40;
    for (int e = 0; e < ne; ++e) K.add_edge(pick(rng), pick(rng));
    CHECK(K.component_count() == K.component_count_bfs());
  }
}

TEST_CASE("sphere membership records the pairing only") {
  const Surface s = Surface::sphere();
  const AnchorSet E(s, {-1.0, 1.0, {0.0, 2.0}});
  PolyContinuum K = segment_continuum(-1.0, 1.0, 5);
  K.add_node({0.0, 2.0}, 2);
  CHECK(contains_class(s, K, E, {0, 1, 0, 0}, 0.01));
  CHECK_FALSE(contains_class(s, K, E, {0, 2, 0, 0}, 0.01));
}
