#include "chebotarev/kernels.hpp"

#include <cmath>

#include "chebotarev/theta.hpp"

namespace chebotarev {

namespace {
constexpr double kPoleTol = 1e-14;
}

BipolarKernel::BipolarKernel(const Surface& s) : s_(s) {
  const double lc = std::log(std::abs(s.chart_coeff()));
  if (s.is_torus()) {
    th1p0_ = jacobi_theta1_prime(s.tau(), 0.0);
    norm_const_ = std::log(std::abs(th1p0_)) - lc;
  } else {
    norm_const_ = -lc;
  }
}

double BipolarKernel::green_at(const SurfacePoint& p, const SurfacePoint& q) const {
  if (!s_.is_torus() && (p.at_infinity || q.at_infinity)) throw InputError("pole");
  return green(p.coord, q.coord);
}

double BipolarKernel::green(cplx p, cplx q) const {
  if (!s_.is_torus()) {
    const double d = std::abs(p - q);
    if (d < kPoleTol) throw InputError("pole");
    return std::log(d) + norm_const_;
  }
  const cplx tau = s_.tau();
  const cplx u = s_.nearest_lift(p - s_.infinity_coord(), 0.0);
  const cplx v = s_.nearest_lift(q - s_.infinity_coord(), 0.0);
  if (std::abs(u) < kPoleTol || std::abs(v) < kPoleTol) throw InputError("pole");
  if (std::abs(s_.nearest_lift(u - v, 0.0)) < kPoleTol) throw InputError("pole");
  return log_abs_theta1(tau, u - v) - log_abs_theta1(tau, u) - log_abs_theta1(tau, v) +
         2.0 * kPi * u.imag() * v.imag() / tau.imag() + norm_const_;
}

double BipolarKernel::green_smooth(cplx p, cplx q) const {
  if (!s_.is_torus()) return norm_const_;
  const cplx tau = s_.tau();
  const cplx u = s_.nearest_lift(p - s_.infinity_coord(), 0.0);
  const cplx v = s_.nearest_lift(q - s_.infinity_coord(), 0.0);
  if (std::abs(u) < kPoleTol || std::abs(v) < kPoleTol) throw InputError("pole");
  const cplx w = s_.nearest_lift(u - v, 0.0);
  // ln|th1(w + m + k tau)| = ln|th1(w)| + pi k^2 Im tau + 2 pi k Im w
  const double k = std::round(((u - v) - w).imag() / tau.imag());
  const double shift = kPi * k * k * tau.imag() + 2.0 * kPi * k * w.imag();
  const double lw = std::abs(w) == 0.0 ? std::log(std::abs(th1p0_))
                                       : log_abs_theta1(tau, w) - std::log(std::abs(w));
  return lw + shift - log_abs_theta1(tau, u) - log_abs_theta1(tau, v) +
         2.0 * kPi * u.imag() * v.imag() / tau.imag() + norm_const_;
}

cplx BipolarKernel::omega(cplx p, cplx q) const {
  if (!s_.is_torus()) {
    if (std::abs(p - q) < kPoleTol) throw InputError("pole");
    return 1.0 / (p - q);
  }
  const cplx tau = s_.tau();
  const cplx u = p - s_.infinity_coord();
  const cplx v = q - s_.infinity_coord();
  if (std::abs(s_.nearest_lift(u, 0.0)) < kPoleTol ||
      std::abs(s_.nearest_lift(u - v, 0.0)) < kPoleTol)
    throw InputError("pole");
  return theta1_log_derivative(tau, u - v) - theta1_log_derivative(tau, u) -
         2.0 * kPi * kI * (v.imag() / tau.imag());
}

cplx BipolarKernel::omega_dp(cplx p, cplx q) const {
  if (!s_.is_torus()) {
    const cplx d = p - q;
    return -1.0 / (d * d);
  }
  const cplx tau = s_.tau();
  const cplx u = p - s_.infinity_coord();
  const cplx v = q - s_.infinity_coord();
  return theta1_log_derivative_prime(tau, u - v) - theta1_log_derivative_prime(tau, u);
}

cplx BipolarKernel::omega_regular_part(cplx p) const {
  if (!s_.is_torus()) return 0.0;
  const cplx tau = s_.tau();
  const cplx u = p - s_.infinity_coord();
  return -theta1_log_derivative(tau, u) - 2.0 * kPi * kI * (u.imag() / tau.imag());
}

cplx third_kind_differential(const BipolarKernel& k, const SurfacePoint& q, const SurfacePoint& x) {
  if (!k.surface().is_torus() && (q.at_infinity || x.at_infinity)) throw InputError("pole");
  return k.omega(x.coord, q.coord);
}

// ---- Cauchy kernel ----

namespace {

cplx ipow(cplx z, int n) {
  cplx r = 1.0;
  const cplx b = n >= 0 ? z : 1.0 / z;
  for (int i = 0; i < std::abs(n); ++i) r *= b;
  return r;
}

// Odd theta with characteristic [1,1] in genus 1.
cplx theta_d(cplx tau, cplx z) { return -jacobi_theta1(tau, z); }

}  // namespace

CauchyKernel::CauchyKernel(const Surface& s, std::vector<cplx> anchors, std::vector<cplx> spectators)
    : s_(s), anchors_(std::move(anchors)), spectators_(std::move(spectators)) {
  if (anchors_.empty()) throw InputError("empty set");
  if (!s_.is_torus()) {
    if (!spectators_.empty()) throw InputError("spectator divisors apply to the torus only");
    return;
  }
  if (spectators_.size() != 3) throw InputError("torus Cauchy kernel needs three spectator points");
  const cplx tau = s_.tau();
  const cplx inf = s_.infinity_coord();
  const cplx half = 0.5 * (1.0 + tau);  // zero of th3
  s_vec_ = 0.0;
  for (cplx e : anchors_) s_vec_ += e - inf;
  for (cplx b : spectators_) {
    f_.push_back(b - inf - half);
    s_vec_ -= f_.back();
  }
  theta_s_ = jacobi_theta3(tau, s_vec_);
  if (std::abs(theta_s_) < 1e-8) throw NumericalError("non-generic divisors: resample");
  thd_p0_ = -jacobi_theta1_prime(tau, 0.0);
}

CauchyKernel CauchyKernel::with_random_spectators(const Surface& s, std::vector<cplx> anchors,
                                                  std::span<const cplx> avoid,
                                                  std::mt19937_64& rng) {
  if (!s.is_torus()) return CauchyKernel(s, std::move(anchors));
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<cplx> b;
    bool ok = true;
    for (int j = 0; j < 3 && ok; ++j) {
      const double a = U(rng), c = U(rng);
      const cplx pt = s.infinity_coord() + a + c * s.tau();
      for (cplx z : avoid)
        if (s.distance(pt, z) < 0.05) ok = false;
      for (cplx z : anchors)
        if (s.distance(pt, z) < 0.05) ok = false;
      if (s.distance(pt, s.infinity_coord()) < 0.05) ok = false;
      b.push_back(pt);
    }
    if (!ok) continue;
    try {
      return CauchyKernel(s, anchors, b);
    } catch (const NumericalError&) {
    }
  }
  throw NumericalError("non-generic divisors: resample");
}

cplx CauchyKernel::operator()(cplx x, cplx q) const {
  if (!s_.is_torus()) {
    cplx r = 1.0 / (x - q);
    for (cplx e : anchors_) r *= (q - e) / (x - e);
    return r;
  }
  const cplx tau = s_.tau();
  const cplx inf = s_.infinity_coord();
  const cplx u = x - inf, v = q - inf;
  const int N = static_cast<int>(anchors_.size());
  cplx r = ipow(theta_d(tau, u) / theta_d(tau, v), N - 3);
  for (cplx e : anchors_) {
    const cplx ee = e - inf;
    r *= theta_d(tau, v - ee) / theta_d(tau, u - ee);
  }
  for (cplx f : f_) r *= jacobi_theta3(tau, u - f) / jacobi_theta3(tau, v - f);
  r *= jacobi_theta3(tau, u - v - s_vec_) / theta_d(tau, u - v);
  r *= thd_p0_ / theta_s_;
  return r;
}

cplx CauchyKernel::dq(cplx x, cplx q) const {
  // Four-point rule on a circle: error O(h^4) for holomorphic functions.
  const double h = 1e-3 * std::min(1.0, 0.25 * std::abs(s_.nearest_lift(x - q, 0.0)));
  cplx acc = 0.0;
  const cplx dirs[4] = {1.0, kI, -1.0, -kI};
  for (cplx d : dirs) acc += (*this)(x, q + h * d) / d;
  return acc / (4.0 * h);
}

cplx schiffer_pair(const BipolarKernel& k, const std::function<cplx(cplx)>& h,
                   const std::function<cplx(cplx)>& dh, cplx p, cplx q) {
  const Surface& s = k.surface();
  const cplx w = s.nearest_lift(p - q, 0.0);
  if (std::abs(w) < 1e-13) return dh(p) + 2.0 * h(p) * k.omega_regular_part(p);
  return h(p) * k.omega(p, q) + h(q) * k.omega(q, p);
}

cplx quad_kernel_F(const BipolarKernel& k, const CauchyKernel& c, cplx x, cplx p, cplx q) {
  auto h = [&](cplx z) { return c(x, z); };
  auto dh = [&](cplx z) { return c.dq(x, z); };
  return -schiffer_pair(k, h, dh, p, q) + k.omega(x, p) * k.omega(x, q);
}

}  // namespace chebotarev
