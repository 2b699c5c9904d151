#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "chebotarev/equilibrium.hpp"
#include "doctest.h"

using namespace chebotarev;

namespace {

const Surface kSphere = Surface::sphere();
const Surface kTorus = Surface::torus({0.0, 1.0}, {0.5, 0.5});

PolyContinuum chain(const std::vector<cplx>& pts, int first_anchor = 0) {
  PolyContinuum K;
  int prev = K.add_node(pts.front(), first_anchor);
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const int id = K.add_node(pts[k], k + 1 == pts.size() ? first_anchor + 1 : -1);
    K.add_edge(prev, id);
    prev = id;
  }
  return K;
}

double slope(double x0, double y0, double x1, double y1) {
  return (std::log(y1) - std::log(y0)) / (std::log(x1) - std::log(x0));
}

}  // namespace

TEST_CASE("panel log average against quadrature") {
  const cplx a(0.1, 0.2), b(0.5, -0.1);
  const double L = std::abs(b - a);
  for (cplx x : {cplx(0.3, 0.3), cplx(2.0, 1.0), cplx(0.6, -0.2)}) {
    const int n = 200000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::log(std::abs(x - (a + (b - a) * ((i + 0.5) / n))));
    CHECK(panel_log_average(x, a, b) == doctest::Approx(s / n).epsilon(1e-9));
  }
  // on the panel: t ln(tL) + (1 - t) ln((1 - t)L) - 1
  for (double t : {0.0, 0.3, 0.5, 1.0}) {
    const double exact = (t > 0 ? t * std::log(t * L) : 0.0) + (t < 1 ? (1 - t) * std::log((1 - t) * L) : 0.0) - 1.0;
    CHECK(panel_log_average(a + t * (b - a), a, b) == doctest::Approx(exact).epsilon(1e-13));
  }
  // exact double integral over a segment of length L: ln L - 3/2
  const auto d = PanelDiscretization::segment(0.0, 0.25, 1);
  const Eigen::MatrixXd G = assemble_kernel(BipolarKernel(kSphere), d);
  CHECK(G(0, 0) == doctest::Approx(std::log(0.25) - 1.5).epsilon(1e-12));
}

TEST_CASE("two point panels energy decomposition") {
  const BipolarKernel k(kSphere);
  PanelDiscretization d;
  const double L = 0.01, dist = 0.7;
  d = PanelDiscretization::segment(-0.5 * L, 0.5 * L, 1);
  auto far = PanelDiscretization::segment(dist - 0.5 * L, dist + 0.5 * L, 1);
  d.panels.push_back(far.panels[0]);
  d.h = L;
  const DiscreteMeasure m{d, {0.5, 0.5}};
  const double hand = -0.5 * std::log(dist) - 0.5 * (std::log(L) - 1.5);
  CHECK(energy(k, m) == doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("energy is invariant under panel reordering") {
  const BipolarKernel k(kTorus);
  auto d = PanelDiscretization::segment({0.1, 0.1}, {0.4, 0.3}, 20);
  std::vector<double> w(d.size());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  double sum = 0.0;
  for (auto& x : w) sum += (x = u(rng));
  for (auto& x : w) x /= sum;
  const double e0 = energy(k, {d, w});
  std::vector<int> perm(d.size());
  for (int i = 0; i < (int)perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  PanelDiscretization d2 = d;
  std::vector<double> w2(w.size());
  for (int i = 0; i < (int)perm.size(); ++i) {
    d2.panels[i] = d.panels[perm[i]];
    w2[i] = w[perm[i]];
  }
  CHECK(energy(k, {d2, w2}) == doctest::Approx(e0).epsilon(1e-12));
}

TEST_CASE("arcsine weights on [-1, 1]") {
  const BipolarKernel k(kSphere);
  const int n = 400;
  const auto d = PanelDiscretization::segment(-1.0, 1.0, n);
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    const double x0 = -1.0 + 2.0 * i / n, x1 = -1.0 + 2.0 * (i + 1) / n;
    w[i] = (std::asin(x1) - std::asin(x0)) / kPi;
  }
  CHECK(energy(k, {d, w}) == doctest::Approx(std::log(2.0)).epsilon(1e-3));
}

TEST_CASE("segment equilibrium") {
  const BipolarKernel k(kSphere);
  const int n = 400;
  const auto r = equilibrium_measure(k, PanelDiscretization::segment(-1.0, 1.0, n));
  CHECK(std::abs(r.capacity - 0.5) < 1e-3);
  CHECK(r.capacity == doctest::Approx(std::exp(-r.energy)).epsilon(1e-12));
  CHECK(r.robin_constant == doctest::Approx(std::log(r.capacity)).epsilon(1e-12));
  CHECK(r.kkt_residual <= 1e-9);
  double sum = 0.0;
  for (double w : r.measure.weights) {
    CHECK(w >= 0.0);
    sum += w;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  // density against 1/(pi sqrt(1 - x^2)) on interior panels
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& p = r.measure.disc.panels[i];
    const double x = p.mid.real();
    if (std::abs(x) > 0.9) continue;
    const double x0 = p.a.real(), x1 = p.b.real();
    const double exact = (std::asin(std::max(x0, x1)) - std::asin(std::min(x0, x1))) / kPi;
    worst = std::max(worst, std::abs(r.measure.weights[i] / exact - 1.0));
  }
  CHECK(worst < 0.02);
}

TEST_CASE("circle equilibrium is uniform") {
  const BipolarKernel k(kSphere);
  const int n = 256;
  const auto r = equilibrium_measure(k, PanelDiscretization::circle({0.2, -0.1}, 0.3, n));
  CHECK(std::abs(r.capacity - 0.3) < 1e-3);
  for (double w : r.measure.weights) CHECK(std::abs(w - 1.0 / n) < 1e-6);
  // refining moves the value toward 0.3
  const auto r2 = equilibrium_measure(k, PanelDiscretization::circle({0.2, -0.1}, 0.3, 2 * n));
  CHECK(std::abs(r2.capacity - 0.3) <= std::abs(r.capacity - 0.3) + 1e-12);
}

TEST_CASE("green function boundary values and expansion at infinity") {
  SUBCASE("sphere") {
    const BipolarKernel k(kSphere);
    const auto r = equilibrium_measure(k, PanelDiscretization::segment(-1.0, 1.0, 200));
    CHECK(green_function(k, r, 0.3) == 0.0);
    CHECK(std::abs(green_raw(k, r, 0.3)) < 5e-3);
    const cplx p(3e3, 4e3);
    CHECK(std::abs(green_function(k, r, p) - std::log(std::abs(p)) + r.robin_constant) < 1e-3);
    // exact Green function of the segment
    const cplx z(0.4, 0.7);
    const double exact = std::log(std::abs(z + std::sqrt(z - 1.0) * std::sqrt(z + 1.0)));
    CHECK(green_function(k, r, z) == doctest::Approx(exact).epsilon(2e-3));
  }
  SUBCASE("torus") {
    const BipolarKernel k(kTorus);
    const auto K = chain({{0.1, 0.1}, {0.3, 0.15}, {0.2, 0.35}});
    const auto r = equilibrium_measure(k, PanelDiscretization::from_continuum(kTorus, K, 0.01));
    CHECK(green_function(k, r, {0.2, 0.125}) == 0.0);
    for (double t : {0.2, 0.5, 0.8})
      CHECK(std::abs(green_raw(k, r, cplx(0.1, 0.1) + t * cplx(0.2, 0.05))) < 5e-3);
    std::vector<double> err;
    for (double eps : {1e-4, 1e-5}) {
      const cplx p = kTorus.infinity_coord() + eps * cplx(0.6, 0.8);
      const double zinf = std::abs(kTorus.local_coordinate(p));
      err.push_back(std::abs(green_function(k, r, p) + std::log(zinf) + r.robin_constant));
      CHECK(err.back() < 1e-3);
    }
    CHECK(err[1] < 0.2 * err[0]);
  }
}

TEST_CASE("green function is positive off K") {
  const BipolarKernel k(kTorus);
  const auto K = chain({{0.0, 0.0}, {0.3, 0.1}, {0.25, -0.2}});
  const double h = 0.01;
  const auto r = equilibrium_measure(k, PanelDiscretization::from_continuum(kTorus, K, h));
  double mn = 1e9;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) {
      const cplx p((i + 0.37) / 40.0, (j + 0.61) / 40.0);
      if (distance_to_set(kTorus, r.measure.disc, p) < 2 * h) continue;
      if (kTorus.distance(p, kTorus.infinity_coord()) < 1e-3) continue;
      mn = std::min(mn, green_function(k, r, p));
    }
  CHECK(mn > 0.0);
}

TEST_CASE("Frostman consistency") {
  const BipolarKernel k(kTorus);
  const auto K = chain({{0.0, 0.0}, {0.2, 0.25}, {0.4, 0.1}, {0.35, -0.15}});
  const auto r = equilibrium_measure(k, PanelDiscretization::from_continuum(kTorus, K, 0.01));
  const auto pts = K.sample(kTorus, 0.0037);
  for (cplx p : pts) {
    const double g = green_raw(k, r, p);
    CHECK(g >= -5e-3);
    CHECK(std::abs(g) <= 5e-3);
  }
}

TEST_CASE("capacity rescaling") {
  const BipolarKernel k(kSphere);
  const auto r = equilibrium_measure(k, PanelDiscretization::segment(-1.0, 1.0, 200));
  const auto same = capacity_rescale(r, 1.0);
  CHECK(same.capacity == doctest::Approx(r.capacity).epsilon(1e-14));
  const auto half = capacity_rescale(r, 2.0);
  CHECK(half.capacity == doctest::Approx(0.5 * r.capacity).epsilon(1e-14));
  CHECK(half.measure.weights == r.measure.weights);
  // solving directly in the new chart agrees
  const BipolarKernel k2(Surface::sphere(2.0));
  const auto direct = equilibrium_measure(k2, PanelDiscretization::segment(-1.0, 1.0, 200));
  CHECK(direct.capacity == doctest::Approx(half.capacity).epsilon(1e-10));
  CHECK_THROWS_AS(capacity_rescale(r, 0.0), InputError);
}

TEST_CASE("continuity probe") {
  const BipolarKernel k(kTorus);
  const auto K = chain({{0.1, 0.1}, {0.7, 0.2}});
  const auto p0 = continuity_probe(k, K, 0.0, 0.01);
  CHECK(p0.hausdorff == 0.0);
  CHECK(p0.delta_log_cap == 0.0);
  std::vector<double> eps = {1e-2, 1e-3, 1e-4}, dl;
  for (double e : eps) {
    const auto pr = continuity_probe(k, K, e, 0.01);
    CHECK(pr.hausdorff == doctest::Approx(e).epsilon(0.05));
    dl.push_back(pr.delta_log_cap);
  }
  CHECK(dl[0] > dl[1]);
  CHECK(dl[1] > dl[2]);
  CHECK(slope(eps[0], dl[0], eps[2], dl[2]) >= 0.45);
}

TEST_CASE("divergence near infinity") {
  SUBCASE("torus") {
    const BipolarKernel k(kTorus);
    const cplx inf = kTorus.infinity_coord(), dir = cplx(1.0, 1.0) / std::sqrt(2.0);
    std::vector<PolyContinuum> seq;
    for (int kk = 1; kk <= 4; ++kk) seq.push_back(chain({0.0, inf - std::pow(10.0, -kk) * dir}));
    const auto caps = divergence_probe(k, seq, 200);
    for (int i = 1; i < 4; ++i) CHECK(caps[i] > caps[i - 1]);
    const auto still = divergence_probe(k, {seq[0], seq[0], seq[0]}, 200);
    CHECK(still[1] == still[0]);
    CHECK(still[2] == still[0]);
  }
  SUBCASE("sphere") {
    const BipolarKernel k(kSphere);
    std::vector<PolyContinuum> seq;
    std::vector<double> R = {2.0, 20.0, 200.0, 2000.0};
    for (double x : R) seq.push_back(chain({0.0, x}));
    const auto caps = divergence_probe(k, seq, 400);
    for (int i = 0; i < 4; ++i) CHECK(caps[i] == doctest::Approx(R[i] / 4).epsilon(2e-3));
  }
}

TEST_CASE("capacity is monotone under inclusion") {
  const BipolarKernel k(kTorus);
  const double h = 0.01;
  const auto K1 = chain({{0.1, 0.1}, {0.3, 0.1}});
  const auto K2 = chain({{0.1, 0.1}, {0.3, 0.1}, {0.3, 0.3}});
  PolyContinuum K3 = K2;
  const int a = K3.add_node({0.3, 0.1}), b = K3.add_node({0.05, -0.2});
  K3.add_edge(a, b);
  double prev = 0.0;
  for (const PolyContinuum* K : {&K1, &K2, static_cast<const PolyContinuum*>(&K3)}) {
    const double c = equilibrium_measure(k, PanelDiscretization::from_continuum(kTorus, *K, h)).capacity;
    CHECK(c > prev);
    prev = c;
  }
}

TEST_CASE("mesh convergence") {
  const BipolarKernel k(kSphere);
  std::vector<double> caps;
  for (int n : {50, 100, 200, 400})
    caps.push_back(equilibrium_measure(k, PanelDiscretization::segment(-1.0, 1.0, n)).capacity);
  for (int i = 1; i < 4; ++i) CHECK(std::abs(caps[i] - 0.5) < std::abs(caps[i - 1] - 0.5));
  for (int i = 2; i < 4; ++i) CHECK(std::abs(caps[i] - caps[i - 1]) < 0.75 * std::abs(caps[i - 1] - caps[i - 2]));
  // Richardson value lies beyond the finest level
  const double extra = 2.0 * caps[3] - caps[2];
  CHECK((caps[2] - caps[3]) * (caps[3] - extra) >= 0.0);
  CHECK(std::abs(extra - 0.5) < std::abs(caps[3] - 0.5));
}

TEST_CASE("no mass inside a loop") {
  const BipolarKernel k(kSphere);
  PolyContinuum K;
  const int m = 64;
  std::vector<int> ring;
  for (int i = 0; i < m; ++i) ring.push_back(K.add_node(std::polar(0.5, 2 * kPi * i / m), i == 0 ? 0 : -1));
  for (int i = 0; i < m; ++i) K.add_edge(ring[i], ring[(i + 1) % m]);
  const int c = K.add_node(0.1, 1);
  K.add_edge(c, ring[m / 4]);
  const auto r = equilibrium_measure(k, PanelDiscretization::from_continuum(kSphere, K, 0.02));
  double inner = 0.0;
  for (std::size_t i = 0; i < r.measure.disc.size(); ++i)
    if (r.measure.disc.panels[i].edge == m) inner += r.measure.weights[i];
  CHECK(inner <= 1e-3);
  CHECK(r.capacity == doctest::Approx(0.5).epsilon(2e-3));
}

TEST_CASE("degenerate input") {
  const BipolarKernel k(kSphere);
  CHECK_THROWS_AS(equilibrium_measure(k, PanelDiscretization::segment(0.0, 1.0, 1)), InputError);
}
