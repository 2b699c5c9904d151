#include <algorithm>
#include <random>
#include <vector>

#include "chebotarev/optimizer.hpp"
#include "chebotarev/trajectories.hpp"
#include "doctest.h"

using namespace chebotarev;

namespace {

ProblemInstance two_anchor_sphere() {
  ProblemInstance in;
  in.surface = Surface::sphere();
  in.anchors = AnchorSet(in.surface, {-1.0, 1.0});
  in.pattern = ConnectivityPattern(2, {{0, 1, 0, 0}});
  return in;
}

ProblemInstance three_star() {
  ProblemInstance in;
  in.surface = Surface::sphere();
  in.anchors = AnchorSet(in.surface, {1.0, std::polar(1.0, 2 * kPi / 3), std::polar(1.0, 4 * kPi / 3)});
  in.pattern = ConnectivityPattern(3, {{0, 1, 0, 0}, {1, 2, 0, 0}});
  in.mesh = 0.01;
  return in;
}

ProblemInstance symmetric_torus(int m = 0) {
  ProblemInstance in;
  in.surface = Surface::torus({0.0, 1.0}, {0.5, 0.5});
  in.anchors = AnchorSet(in.surface, {-0.25, 0.25});
  in.pattern = ConnectivityPattern(2, {{0, 1, m, 0}});
  return in;
}

PolyContinuum straight(cplx a, cplx b) {
  PolyContinuum K;
  K.add_edge(K.add_node(a, 0), K.add_node(b, 1));
  return K;
}

double distance_to(const ProblemInstance& in, const PolyContinuum& K, const PolyContinuum& ref) {
  return continuum_distance(in.surface, K, ref, 0.25 * in.panel_size());
}

}  // namespace

TEST_CASE("initial continua realise their patterns") {
  for (const auto& in : {two_anchor_sphere(), three_star(), symmetric_torus(0), symmetric_torus(1)}) {
    const PolyContinuum K = initial_continuum(in, in.diameter() / 8);
    CHECK(exceeds_pattern(in.surface, K, in.anchors, in.pattern, 2 * in.panel_size()));
    CHECK(K.max_edge_length(in.surface) <= in.diameter() / 8 + 1e-12);
    for (std::size_t i = 0; i < in.anchors.size(); ++i) CHECK(K.node_of_anchor(static_cast<int>(i)) >= 0);
  }
  // the winding class is a closed loop through both anchors
  const auto in = symmetric_torus(1);
  const PolyContinuum K = initial_continuum(in, in.diameter() / 8);
  CHECK(K.total_length(in.surface) == doctest::Approx(1.0));
  CHECK_FALSE(exceeds_pattern(in.surface, initial_continuum(symmetric_torus(0), 0.0625), in.anchors, in.pattern,
                              2 * in.panel_size()));
}

TEST_CASE("resampling keeps the geometry") {
  const auto in = symmetric_torus(1);
  const PolyContinuum K = initial_continuum(in, 0.0625);
  const PolyContinuum R = resample(in.surface, K, 0.03);
  CHECK(R.max_edge_length(in.surface) <= 0.03 + 1e-12);
  CHECK(R.total_length(in.surface) == doctest::Approx(K.total_length(in.surface)).epsilon(1e-12));
  // every new node lies on the old polyline
  double off = 0.0;
  for (cplx z : R.nodes) {
    double d = 1e9;
    for (std::size_t e = 0; e < K.edges.size(); ++e) {
      const cplx a = K.edge_start(in.surface, e), b = K.edge_end(in.surface, e);
      d = std::min(d, point_segment_distance(in.surface.nearest_lift(z, 0.5 * (a + b)), a, b));
    }
    off = std::max(off, d);
  }
  CHECK(off < 1e-12);
  CHECK(exceeds_pattern(in.surface, R, in.anchors, in.pattern, 0.01));
}

TEST_CASE("random deformations keep the anchors") {
  const auto in = three_star();
  const PolyContinuum K = initial_continuum(in, in.diameter() / 8);
  std::mt19937_64 rng(3);
  const PolyContinuum D = random_deformation(in.surface, K, 0.1, rng);
  for (std::size_t i = 0; i < in.anchors.size(); ++i)
    CHECK(D.nodes[D.node_of_anchor(static_cast<int>(i))] == in.anchors[i]);
  const double d = distance_to(in, D, K);
  CHECK(d > 1e-3);
  CHECK(d < 0.3);
  CHECK(exceeds_pattern(in.surface, D, in.anchors, in.pattern, 0.02));
}

TEST_CASE("shape descent: segment") {
  auto in = two_anchor_sphere();
  in.mesh = 2.0 / 400;
  const Solution sol = solve_shape_descent(in);
  CHECK(sol.capacity.capacity == doctest::Approx(0.5).epsilon(2e-3));
  CHECK(distance_to(in, sol.minimizer, straight(-1.0, 1.0)) <= 1e-2);
  CHECK(exceeds_pattern(in.surface, sol.minimizer, in.anchors, in.pattern, 2 * in.panel_size()));
  for (std::size_t i = 1; i < sol.history.size(); ++i) CHECK(sol.history[i] < sol.history[i - 1]);
  CHECK(sol.certificates.s_property <= 2e-2);
  CHECK(sol.certificates.schiffer <= 1e-2);
  CHECK(sol.warnings.empty());
}

TEST_CASE("shape descent: three-star") {
  const auto in = three_star();
  const Solution sol = solve_shape_descent(in);
  CHECK(std::abs(sol.capacity.capacity - std::pow(4.0, -1.0 / 3.0)) <= 1e-3);
  // one junction of valence 3 near the origin
  std::vector<int> deg(sol.minimizer.nodes.size(), 0);
  for (const auto& e : sol.minimizer.edges) {
    ++deg[e.a];
    ++deg[e.b];
  }
  int junctions = 0;
  for (std::size_t v = 0; v < deg.size(); ++v)
    if (deg[v] == 3) {
      ++junctions;
      CHECK(std::abs(sol.minimizer.nodes[v]) <= 1e-2);
    }
  CHECK(junctions == 1);
  CHECK(sol.certificates.s_property <= 2e-2);
  CHECK(sol.certificates.schiffer <= 1e-2);
  // balanced sides: both-dominant everywhere except the graded panels at the junction
  const BipolarKernel k(in.surface);
  const auto fol = classify_foliation(k, sol.capacity);
  for (const auto& p : fol.points)
    if (std::abs(p.pos) > 2 * in.mesh) CHECK(p.cls == Dominance::Both);
}

TEST_CASE("shape descent from a bent start") {
  auto in = two_anchor_sphere();
  PolyContinuum K;
  const int a = K.add_node(-1.0, 0), b = K.add_node(1.0, 1), c = K.add_node({0.0, 0.3});
  K.add_edge(a, c);
  K.add_edge(c, b);
  in.initial = K;
  const Solution sol = solve_shape_descent(in);
  CHECK(sol.history.size() > 5);
  CHECK(sol.history.back() < sol.history.front() - 1e-2);
  CHECK(distance_to(in, sol.minimizer, straight(-1.0, 1.0)) <= 2e-2);
}

TEST_CASE("infeasible start is rejected") {
  auto in = three_star();
  PolyContinuum K = straight(1.0, std::polar(1.0, 2 * kPi / 3));
  K.add_node(std::polar(1.0, 4 * kPi / 3), 2);
  in.initial = K;
  CHECK_THROWS_WITH_AS(solve_shape_descent(in), "infeasible start", InputError);
}

TEST_CASE("Boutroux route") {
  SUBCASE("two anchors agree with shape descent") {
    const auto rc = solve_both(two_anchor_sphere());
    CHECK(rc.capacity_gap <= 2e-3);
    CHECK(rc.hausdorff <= 1e-2);
    REQUIRE(rc.boutroux.certificates.boutroux.has_value());
    CHECK(*rc.boutroux.certificates.boutroux <= 1e-9);
    CHECK(rc.boutroux.capacity.capacity == doctest::Approx(0.5).epsilon(2e-3));
  }
  SUBCASE("three-star centre") {
    const Solution sol = solve_boutroux_route(three_star());
    REQUIRE(sol.quaddiff.has_value());
    REQUIRE(sol.quaddiff->zeros().size() == 1);
    CHECK(std::abs(sol.quaddiff->zeros()[0].pos) <= 1e-6);
    CHECK(std::abs(sol.capacity.capacity - std::pow(4.0, -1.0 / 3.0)) <= 1e-3);
  }
  SUBCASE("symmetric torus agrees with shape descent") {
    const auto in = symmetric_torus();
    const auto rc = solve_both(in);
    CHECK(rc.capacity_gap <= 5e-3);
    CHECK(rc.hausdorff <= 2e-2);
    CHECK(distance_to(in, rc.shape.minimizer, straight(-0.25, 0.25)) <= 2e-2);
    CHECK(rc.boutroux.certificates.s_property <= 2e-2);
    CHECK(rc.shape.certificates.schiffer <= 1e-2);
    CHECK(rc.boutroux.certificates.schiffer <= 1e-2);
  }
  SUBCASE("winding class not produced by the ansatz") {
    CHECK_THROWS_WITH_AS(solve_boutroux_route(symmetric_torus(1)), "pattern unreachable from ansatz",
                         NumericalError);
  }
}

TEST_CASE("uniqueness probe") {
  const auto in = two_anchor_sphere();
  const Solution sol = solve_shape_descent(in);
  const auto rep = uniqueness_probe(in, sol, 5);
  CHECK(rep.capacities.size() == 6);
  CHECK(rep.hausdorff_spread <= 2e-2);
  CHECK(rep.capacity_spread <= 1e-4);
  // same seed, same numbers
  const Solution again = solve_shape_descent(in);
  CHECK(again.capacity.capacity == sol.capacity.capacity);
  CHECK(uniqueness_probe(in, sol, 1).capacities[1] == rep.capacities[1]);
}

TEST_CASE("torus winding classes give different minimizers") {
  const auto a = symmetric_torus(0), b = symmetric_torus(1);
  const Solution sa = solve_shape_descent(a), sb = solve_shape_descent(b);
  CHECK(exceeds_pattern(b.surface, sb.minimizer, b.anchors, b.pattern, 2 * b.panel_size()));
  CHECK_FALSE(exceeds_pattern(a.surface, sa.minimizer, b.anchors, b.pattern, 2 * b.panel_size()));
  CHECK(distance_to(a, sa.minimizer, sb.minimizer) > 0.1);
  CHECK(sb.capacity.capacity > sa.capacity.capacity + 0.1);
}

TEST_CASE("interception certificates at the segment minimizer") {
  const auto in = two_anchor_sphere();
  const Solution sol = solve_shape_descent(in);
  const Certificates c = certify(in, sol.minimizer, sol.capacity, 5);
  CHECK(c.jip_trials == 5);
  CHECK(c.jip_held == 5);
  CHECK(c.jip_ordered == 5);
}

TEST_CASE("instance validation") {
  auto in = two_anchor_sphere();
  in.pattern = ConnectivityPattern(2, {{0, 1, 1, 0}});
  CHECK_THROWS_AS(in.validate(), InputError);
  in.pattern = ConnectivityPattern(3, {{0, 1, 0, 0}});
  CHECK_THROWS_AS(in.validate(), InputError);
}
