#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "chebotarev/surface.hpp"

namespace chebotarev {

// Bipolar Green function G_inf(p, q): +log pole at q, -log pole at infinity,
// normalized so that G_inf(p, q) = -ln|z_inf(p)| + O(z_inf(p)) as p -> infinity.
//
// Sphere: G = ln|p - q| - ln|c|.
// Torus (u = p - inf, v = q - inf):
//   G = ln|th1(u - v)| - ln|th1(u)| - ln|th1(v)| + 2 pi Im u Im v / Im tau + ln|th1'(0)/c|.
class BipolarKernel {
 public:
  explicit BipolarKernel(const Surface& s);

  const Surface& surface() const { return s_; }
  double normalization_constant() const { return norm_const_; }

  // Throws InputError("pole") for p = q or either point at infinity.
  double green_at(const SurfacePoint& p, const SurfacePoint& q) const;
  double green(cplx p, cplx q) const;
  // G(p, q) - ln|p - q~| with q~ the lift of q nearest p. Finite (and smooth) at p = q.
  double green_smooth(cplx p, cplx q) const;

  // Omega_{inf,q}(p) = 2 d/dp G(p, q), density in the base coordinate of p.
  // Residue +1 at p = q and -1 at infinity; purely imaginary periods.
  cplx omega(cplx p, cplx q) const;
  // d/dp omega(p, q) (omega is holomorphic in p).
  cplx omega_dp(cplx p, cplx q) const;
  // lim_{q -> p} [omega(p, q) - 1/(p - q~)].
  cplx omega_regular_part(cplx p) const;

 private:
  Surface s_;
  double norm_const_ = 0.0;
  cplx th1p0_{};  // theta1'(0 | tau)
};

// Omega_{inf,q} evaluated at x; argument order follows the (q, x) convention.
cplx third_kind_differential(const BipolarKernel& k, const SurfacePoint& q, const SurfacePoint& x);

// The Cauchy kernel C^(2,-1)(x, q): quadratic differential in x, vector field in q,
// simple pole (x - q)^-1 with unit coefficient, zeros at the anchors in q.
//
// Sphere: C = prod_j (q - e_j)/(x - e_j) / (x - q).
// Torus:  theta-quotient built from the odd characteristic [1,1] (Theta_D = -th1),
//         the even theta th3 and three spectator divisor points b_j; the shift
//         vector is s = sum(e_j) - sum(f_j) with f_j = b_j - (1 + tau)/2, all in
//         coordinates centred at infinity.
class CauchyKernel {
 public:
  // Sphere: spectators must be empty. Torus: exactly three spectator points.
  // Throws NumericalError("non-generic divisors: resample") if |th3(s)| < 1e-8.
  CauchyKernel(const Surface& s, std::vector<cplx> anchors, std::vector<cplx> spectators = {});

  // Samples the spectator points uniformly in the fundamental cell, rejecting
  // samples within 0.05 of `avoid` or failing genericity, at most 100 tries.
  static CauchyKernel with_random_spectators(const Surface& s, std::vector<cplx> anchors,
                                             std::span<const cplx> avoid, std::mt19937_64& rng);

  const Surface& surface() const { return s_; }
  const std::vector<cplx>& anchors() const { return anchors_; }
  const std::vector<cplx>& spectators() const { return spectators_; }
  cplx s_vector() const { return s_vec_; }

  cplx operator()(cplx x, cplx q) const;
  // d/dq C(x, q) (holomorphic in q), by a four-point circle rule.
  cplx dq(cplx x, cplx q) const;

 private:
  Surface s_;
  std::vector<cplx> anchors_;
  std::vector<cplx> spectators_;
  std::vector<cplx> f_;  // th3 shift points, centred at infinity
  cplx s_vec_{};
  cplx theta_s_{};
  cplx thd_p0_{};  // Theta_D'(0)
};

// Symmetrised pair kernel h(p) Omega(p, q) + h(q) Omega(q, p) for a holomorphic
// field h, with the diagonal limit h'(p) + 2 h(p) R(p), R = omega_regular_part.
cplx schiffer_pair(const BipolarKernel& k, const std::function<cplx(cplx)>& h,
                   const std::function<cplx(cplx)>& dh, cplx p, cplx q);

// F(x; p, q) = -C(x,p) Omega(p,q) - C(x,q) Omega(q,p) + Omega(x,p) Omega(x,q).
// For p = q the first two terms use the regularised diagonal limit.
cplx quad_kernel_F(const BipolarKernel& k, const CauchyKernel& c, cplx x, cplx p, cplx q);

}  // namespace chebotarev
