#pragma once

#include <Eigen/Dense>

#include "chebotarev/common.hpp"

namespace chebotarev {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

// Period matrix plus truncation data for the Riemann theta lattice sum.
struct ThetaContext {
  int genus = 1;
  CMat tau;
  int truncation_radius = 0;
  double target_abs_error = 1e-15;
  double lambda_min = 0.0;  // smallest eigenvalue of Im tau

  // Validates tau (symmetric, Im tau positive definite) and picks the radius.
  // Throws InputError("invalid period matrix").
  static ThetaContext make(const CMat& tau, double target_abs_error = 1e-15);
  static ThetaContext genus1(cplx tau, double target_abs_error = 1e-15);
};

struct Characteristic {
  RVec alpha;
  RVec beta;

  static Characteristic zero(int g);
  static Characteristic integer(std::initializer_list<int> alpha, std::initializer_list<int> beta);
  bool is_integer() const;
  // Throws InputError unless the characteristic is integral.
  bool is_odd() const;
};

// Theta_[alpha,beta](z; tau) as the truncated lattice sum
//   sum_n exp(i pi (n + beta/2)^T tau (n + beta/2) + 2 i pi (n + beta/2).(z + alpha/2)),
// evaluated after reducing z to the fundamental cell.
cplx theta(const ThetaContext& ctx, const Characteristic& ch, const CVec& z);
CVec theta_gradient(const ThetaContext& ctx, const Characteristic& ch, const CVec& z);

// Quasi-periodicity factor: theta(z + m + tau k) = factor * theta(z).
cplx theta_period_factor(const ThetaContext& ctx, const Characteristic& ch, const CVec& z,
                         const Eigen::VectorXi& m, const Eigen::VectorXi& k);

// Coefficients d/dz_j Theta_Delta(0) of omega_Delta.
// Throws InputError("singular characteristic") if the gradient is below 1e-10.
CVec omega_delta(const ThetaContext& ctx, const Characteristic& ch);

// First odd integer characteristic (alpha, beta in {0,1}^g, lexicographic in the
// bits of alpha then beta) with nonvanishing gradient at the origin.
Characteristic first_nonsingular_odd(const ThetaContext& ctx);

// Genus-1 Jacobi theta functions with the series truncated below 1e-16 relative.
// jacobi_theta1 throws InputError if Im tau <= 0.
cplx jacobi_theta1(cplx tau, cplx z);
cplx jacobi_theta1_prime(cplx tau, cplx z);
// theta1'(z) / theta1(z).
cplx theta1_log_derivative(cplx tau, cplx z);
// d/dz of theta1_log_derivative.
cplx theta1_log_derivative_prime(cplx tau, cplx z);
// ln|theta1(z)| without overflow for large Im z.
double log_abs_theta1(cplx tau, cplx z);
// theta_3(z|tau) = sum_n exp(i pi n^2 tau + 2 i pi n z), the zero characteristic.
cplx jacobi_theta3(cplx tau, cplx z);

}  // namespace chebotarev
