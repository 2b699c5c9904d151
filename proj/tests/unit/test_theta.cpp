#include <random>

#include "chebotarev/theta.hpp"
#include "doctest.h"

using namespace chebotarev;

namespace {

// Independent oracle: plain summation of the Jacobi series without reduction.
cplx theta1_direct(cplx tau, cplx z) {
  cplx s = 0.0;
  for (int n = -40; n <= 40; ++n) {
    const double h = n + 0.5;
    s += std::exp(kI * kPi * tau * (h * h) + 2.0 * kI * kPi * h * (z + 0.5));
  }
  return -s;  // sum with characteristic [1,1] equals -theta1
}

CVec vec(std::initializer_list<cplx> v) {
  CVec z(v.size());
  int i = 0;
  for (cplx c : v) z(i++) = c;
  return z;
}

}  // namespace

TEST_CASE("theta constant for tau = i") {
  double oracle = 0.0;
  for (int n = -30; n <= 30; ++n) oracle += std::exp(-kPi * n * n);
  const auto ctx = ThetaContext::genus1({0.0, 1.0});
  const cplx v = theta(ctx, Characteristic::zero(1), vec({0.0}));
  CHECK(std::abs(v - oracle) < 1e-13);
  CHECK(std::abs(v.real() - 1.0864348112133080) < 1e-12);
}

TEST_CASE("odd characteristics vanish at the origin") {
  const auto ctx = ThetaContext::genus1({0.1, 0.8});
  CHECK(std::abs(theta(ctx, Characteristic::integer({1}, {1}), vec({0.0}))) < 1e-15);
  CMat t(2, 2);
  t << cplx(0.1, 1.0), cplx(0.2, 0.3), cplx(0.2, 0.3), cplx(-0.1, 1.2);
  const auto ctx2 = ThetaContext::make(t);
  CHECK(std::abs(theta(ctx2, Characteristic::integer({1, 0}, {1, 0}), vec({0.0, 0.0}))) < 1e-14);
  CHECK(std::abs(theta(ctx2, Characteristic::integer({1, 1}, {1, 0}), vec({0.0, 0.0}))) < 1e-14);
}

TEST_CASE("invalid period matrices are rejected") {
  CMat t(2, 2);
  t << cplx(0, 1), cplx(0.5, 0), cplx(0.2, 0), cplx(0, 1);
  CHECK_THROWS_WITH_AS(ThetaContext::make(t), "invalid period matrix", InputError);
  t << cplx(0, 1), cplx(0, 2), cplx(0, 2), cplx(0, 1);  // Im not positive definite
  CHECK_THROWS_WITH_AS(ThetaContext::make(t), "invalid period matrix", InputError);
  CHECK_THROWS_WITH_AS(ThetaContext::genus1({0.3, -1.0}), "invalid period matrix", InputError);
}

TEST_CASE("quasi-periodicity in genus 1 and 2") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  CMat t2(2, 2);
  t2 << cplx(0.3, 1.1), cplx(0.1, 0.25), cplx(0.1, 0.25), cplx(-0.2, 0.9);
  const ThetaContext ctxs[] = {ThetaContext::genus1({0.2, 1.3}), ThetaContext::make(t2)};
  for (const auto& ctx : ctxs) {
    const int g = ctx.genus;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      Characteristic ch = Characteristic::zero(g);
      for (int i = 0; i < g; ++i) {
        ch.alpha(i) = (rng() % 2);
        ch.beta(i) = (rng() % 2);
      }
      // a point in the fundamental cell
      RVec a(g), b(g);
      for (int i = 0; i < g; ++i) {
        a(i) = U(rng);
        b(i) = U(rng);
      }
      const CVec z = a.cast<cplx>() + ctx.tau * b.cast<cplx>();
      Eigen::VectorXi m(g), k(g);
      for (int i = 0; i < g; ++i) {
        m(i) = static_cast<int>(rng() % 3) - 1;
        k(i) = static_cast<int>(rng() % 3) - 1;
      }
      const CVec zs = z + m.cast<cplx>() + ctx.tau * k.cast<cplx>();
      const cplx lhs = theta(ctx, ch, zs);
      const cplx rhs = theta_period_factor(ctx, ch, z, m, k) * theta(ctx, ch, z);
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    CHECK(worst <= 1e-11);
  }
}

TEST_CASE("parity under z -> -z") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  CMat t2(2, 2);
  t2 << cplx(0.0, 1.0), cplx(0.1, 0.2), cplx(0.1, 0.2), cplx(0.0, 1.4);
  const auto ctx = ThetaContext::make(t2);
  for (int bits = 0; bits < 16; ++bits) {
    Characteristic ch = Characteristic::integer({(bits >> 3) & 1, (bits >> 2) & 1}, {(bits >> 1) & 1, bits & 1});
    const double sign = ch.is_odd() ? -1.0 : 1.0;
    for (int trial = 0; trial < 5; ++trial) {
      const CVec z = vec({cplx(U(rng), U(rng)), cplx(U(rng), U(rng))});
      CHECK(std::abs(theta(ctx, ch, -z) - sign * theta(ctx, ch, z)) <= 1e-12);
    }
  }
}

TEST_CASE("theta gradient") {
  const auto ctx = ThetaContext::genus1({0.0, 1.0});
  CHECK(theta_gradient(ctx, Characteristic::zero(1), vec({0.0})).norm() < 1e-14);
  const cplx g = theta_gradient(ctx, Characteristic::integer({1}, {1}), vec({0.0}))(0);
  // Direct oracle: d/dz of the series at 0.
  cplx oracle = 0.0;
  for (int n = -40; n <= 40; ++n) {
    const double h = n + 0.5;
    oracle += 2.0 * kI * kPi * h * std::exp(kI * kPi * cplx(0, 1) * (h * h) + 2.0 * kI * kPi * h * 0.5);
  }
  CHECK(std::abs(g) > 1e-3);
  CHECK(std::abs(g - oracle) < 1e-12);

  CMat t2(2, 2);
  t2 << cplx(0.1, 1.0), cplx(0.2, 0.3), cplx(0.2, 0.3), cplx(-0.1, 1.2);
  const auto ctx2 = ThetaContext::make(t2);
  const auto ch = Characteristic::integer({0, 1}, {1, 1});
  const CVec z = vec({cplx(0.13, -0.2), cplx(-0.31, 0.27)});
  const CVec grad = theta_gradient(ctx2, ch, z);
  const double h = 1e-5;
  for (int i = 0; i < 2; ++i) {
    CVec e = CVec::Zero(2);
    e(i) = h;
    const cplx fd = (theta(ctx2, ch, z + e) - theta(ctx2, ch, z - e)) / (2.0 * h);
    CHECK(std::abs(fd - grad(i)) < 1e-8);
  }
  // also outside the fundamental cell (exercise the reduction)
  const CVec zfar = z + ctx2.tau * vec({1.0, -1.0}) + vec({2.0, 0.0});
  const CVec gfar = theta_gradient(ctx2, ch, zfar);
  for (int i = 0; i < 2; ++i) {
    CVec e = CVec::Zero(2);
    e(i) = h;
    const cplx fd = (theta(ctx2, ch, zfar + e) - theta(ctx2, ch, zfar - e)) / (2.0 * h);
    CHECK(std::abs(fd - gfar(i)) < 1e-8 * std::max(1.0, std::abs(gfar(i))));
  }
}

TEST_CASE("jacobi theta1") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  const cplx tau(0.0, 1.0);
  CHECK(std::abs(jacobi_theta1(tau, 0.0)) < 1e-16);
  for (int trial = 0; trial < 50; ++trial) {
    const cplx z(U(rng), U(rng));
    const cplx v = jacobi_theta1(tau, z);
    CHECK(std::abs(jacobi_theta1(tau, -z) + v) <= 1e-12 * std::max(1.0, std::abs(v)));
    CHECK(std::abs(jacobi_theta1(tau, z + 1.0) + v) <= 1e-12 * std::max(1.0, std::abs(v)));
    const cplx d = theta1_direct(tau, z);
    CHECK(std::abs(v - d) <= 1e-13 * std::max(1.0, std::abs(d)));
    // theta1(z + tau) = -exp(-i pi tau - 2 i pi z) theta1(z)
    const cplx vt = jacobi_theta1(tau, z + tau);
    CHECK(std::abs(vt + std::exp(-kI * kPi * tau - 2.0 * kI * kPi * z) * v) <= 1e-12 * std::max(1.0, std::abs(vt)));
  }
  const cplx tau2(0.31, 0.77);
  const auto ctx = ThetaContext::genus1(tau2);
  for (int trial = 0; trial < 20; ++trial) {
    const cplx z(U(rng), U(rng));
    const cplx gen = theta(ctx, Characteristic::integer({1}, {1}), vec({z}));
    CHECK(std::abs(gen + jacobi_theta1(tau2, z)) <= 1e-12 * std::max(1.0, std::abs(gen)));
    // derivative and log-derivative against finite differences
    const double h = 1e-5;
    const cplx fd = (jacobi_theta1(tau2, z + h) - jacobi_theta1(tau2, z - h)) / (2 * h);
    const cplx d = jacobi_theta1_prime(tau2, z);
    CHECK(std::abs(fd - d) <= 1e-8 * std::max(1.0, std::abs(d)));
    CHECK(std::abs(theta1_log_derivative(tau2, z) - d / jacobi_theta1(tau2, z)) <= 1e-10 * std::max(1.0, std::abs(d / jacobi_theta1(tau2, z))));
    const cplx Lp = (theta1_log_derivative(tau2, z + h) - theta1_log_derivative(tau2, z - h)) / (2 * h);
    CHECK(std::abs(Lp - theta1_log_derivative_prime(tau2, z)) <= 1e-6 * std::max(1.0, std::abs(Lp)));
    CHECK(std::abs(log_abs_theta1(tau2, z) - std::log(std::abs(jacobi_theta1(tau2, z)))) < 1e-12);
    const cplx th3 = theta(ctx, Characteristic::zero(1), vec({z}));
    CHECK(std::abs(th3 - jacobi_theta3(tau2, z)) <= 1e-12 * std::max(1.0, std::abs(th3)));
  }
  CHECK_THROWS_AS(jacobi_theta1({1.0, 0.0}, 0.3), InputError);
}

TEST_CASE("omega_delta coefficients") {
  const auto ctx = ThetaContext::genus1({0.0, 1.0});
  const Characteristic odd = first_nonsingular_odd(ctx);
  CHECK(odd.alpha(0) == 1.0);
  CHECK(odd.beta(0) == 1.0);
  const CVec w = omega_delta(ctx, odd);
  CHECK(std::abs(w(0) + jacobi_theta1_prime({0.0, 1.0}, 0.0)) < 1e-13);
  CHECK(std::abs(w(0)) > 1e-3);
  // tighter target does not move the coefficients
  const auto fine = ThetaContext::genus1({0.0, 1.0}, 1e-30);
  CHECK((omega_delta(fine, odd) - w).norm() < 1e-12);

  CMat t2 = CMat::Identity(2, 2) * kI;
  const auto ctx2 = ThetaContext::make(t2);
  const CVec w2 = omega_delta(ctx2, Characteristic::integer({1, 0}, {1, 0}));
  // Theta factorises as Theta_[1,1](z1) Theta_[0,0](z2): only d/dz1 survives.
  CHECK(std::abs(w2(0)) > 1e-3);
  CHECK(std::abs(w2(1)) < 1e-14);
  CHECK_THROWS_WITH_AS(omega_delta(ctx2, Characteristic::integer({1, 1}, {1, 1}) /* even */),
                       "characteristic must be odd", InputError);
}

TEST_CASE("doubling the truncation radius is below the target error") {
  CMat t2(2, 2);
  t2 << cplx(0.1, 0.6), cplx(0.05, 0.1), cplx(0.05, 0.1), cplx(0.0, 0.7);
  auto ctx = ThetaContext::make(t2, 1e-12);
  auto wide = ctx;
  wide.truncation_radius *= 2;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    const CVec z = vec({cplx(U(rng), U(rng) * 0.6), cplx(U(rng), U(rng) * 0.7)});
    const auto ch = Characteristic::integer({1, 0}, {0, 1});
    CHECK(std::abs(theta(ctx, ch, z) - theta(wide, ch, z)) < ctx.target_abs_error);
  }
}
