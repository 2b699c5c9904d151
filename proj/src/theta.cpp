#include "chebotarev/theta.hpp"

#include <cmath>
#include <vector>

namespace chebotarev {

ThetaContext ThetaContext::make(const CMat& tau, double target_abs_error) {
  if (tau.rows() == 0 || tau.rows() != tau.cols()) throw InputError("invalid period matrix");
  if (!tau.allFinite()) throw InputError("invalid period matrix");
  if ((tau - tau.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InputError("invalid period matrix");
  const Eigen::MatrixXd im = tau.imag();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (im + im.transpose()));
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmin > 0.0)) throw InputError("invalid period matrix");
  if (!(target_abs_error > 0.0)) throw InputError("target error must be positive");
  ThetaContext ctx;
  ctx.genus = static_cast<int>(tau.rows());
  ctx.tau = tau;
  ctx.target_abs_error = target_abs_error;
  ctx.lambda_min = lmin;
  ctx.truncation_radius =
      static_cast<int>(std::ceil(3.0 + std::sqrt(std::abs(std::log(target_abs_error)) / (kPi * lmin))));
  return ctx;
}

ThetaContext ThetaContext::genus1(cplx tau, double target_abs_error) {
  CMat t(1, 1);
  t(0, 0) = tau;
  return make(t, target_abs_error);
}

Characteristic Characteristic::zero(int g) { return {RVec::Zero(g), RVec::Zero(g)}; }

Characteristic Characteristic::integer(std::initializer_list<int> alpha,
                                       std::initializer_list<int> beta) {
  if (alpha.size() != beta.size()) throw InputError("characteristic halves differ in length");
  Characteristic ch{RVec(alpha.size()), RVec(beta.size())};
  int i = 0;
  for (int a : alpha) ch.alpha(i++) = a;
  i = 0;
  for (int b : beta) ch.beta(i++) = b;
  return ch;
}

bool Characteristic::is_integer() const {
  auto integral = [](const RVec& v) {
    for (double x : v)
      if (x != std::round(x)) return false;
    return true;
  };
  return integral(alpha) && integral(beta);
}

bool Characteristic::is_odd() const {
  if (!is_integer()) throw InputError("parity is defined for integer characteristics only");
  const long long dot = std::llround(alpha.dot(beta));
  return (dot % 2 + 2) % 2 == 1;
}

namespace {

void check_dims(const ThetaContext& ctx, const Characteristic& ch, const CVec& z) {
  if (ch.alpha.size() != ctx.genus || ch.beta.size() != ctx.genus || z.size() != ctx.genus)
    throw InputError("dimension mismatch in theta evaluation");
}

// Splits z = z0 + m + tau k with z0 in the fundamental cell.
void reduce_argument(const ThetaContext& ctx, const CVec& z, CVec& z0, Eigen::VectorXi& m,
                     Eigen::VectorXi& k) {
  const Eigen::MatrixXd im = ctx.tau.imag();
  const RVec y = im.ldlt().solve(z.imag());
  k = y.array().round().cast<int>();
  CVec z1 = z - ctx.tau * k.cast<cplx>();
  m = z1.real().array().round().cast<int>();
  z0 = z1 - m.cast<cplx>();
}

// Raw lattice sum and its gradient (if grad != nullptr) at a reduced argument.
cplx lattice_sum(const ThetaContext& ctx, const Characteristic& ch, const CVec& z, CVec* grad) {
  const int g = ctx.genus;
  const int R = ctx.truncation_radius;
  std::vector<int> n(g, -R);
  cplx total = 0.0;
  if (grad) *grad = CVec::Zero(g);
  CVec v(g);
  const CVec shift = z + 0.5 * ch.alpha.cast<cplx>();
  while (true) {
    for (int i = 0; i < g; ++i) v(i) = double(n[i]) + 0.5 * ch.beta(i);
    const cplx quad = v.transpose() * ctx.tau * v;
    const cplx lin = v.dot(shift);  // v real, so dot conjugation is harmless
    const cplx term = std::exp(kI * kPi * quad + 2.0 * kI * kPi * lin);
    total += term;
    if (grad) *grad += (2.0 * kI * kPi) * term * v;
    int i = 0;
    while (i < g && n[i] == R) n[i++] = -R;
    if (i == g) break;
    ++n[i];
  }
  return total;
}

}  // namespace

cplx theta_period_factor(const ThetaContext& ctx, const Characteristic& ch, const CVec& z,
                         const Eigen::VectorXi& m, const Eigen::VectorXi& k) {
  check_dims(ctx, ch, z);
  const CVec kc = k.cast<cplx>();
  const double char_part = 0.5 * (ch.beta.dot(m.cast<double>()) - ch.alpha.dot(k.cast<double>()));
  const cplx kz = (kc.transpose() * z)(0, 0);
  const cplx ktk = (kc.transpose() * ctx.tau * kc)(0, 0);
  return std::exp(2.0 * kI * kPi * (char_part - kz - 0.5 * ktk));
}

cplx theta(const ThetaContext& ctx, const Characteristic& ch, const CVec& z) {
  check_dims(ctx, ch, z);
  CVec z0;
  Eigen::VectorXi m, k;
  reduce_argument(ctx, z, z0, m, k);
  return theta_period_factor(ctx, ch, z0, m, k) * lattice_sum(ctx, ch, z0, nullptr);
}

CVec theta_gradient(const ThetaContext& ctx, const Characteristic& ch, const CVec& z) {
  check_dims(ctx, ch, z);
  CVec z0;
  Eigen::VectorXi m, k;
  reduce_argument(ctx, z, z0, m, k);
  CVec g0;
  const cplx t0 = lattice_sum(ctx, ch, z0, &g0);
  // d/dz of factor(z0(z)) * theta(z0) with z0 = z - m - tau k.
  return theta_period_factor(ctx, ch, z0, m, k) * (g0 - (2.0 * kI * kPi) * t0 * k.cast<cplx>());
}

CVec omega_delta(const ThetaContext& ctx, const Characteristic& ch) {
  if (!ch.is_odd()) throw InputError("characteristic must be odd");
  CVec grad = theta_gradient(ctx, ch, CVec::Zero(ctx.genus));
  if (grad.cwiseAbs().maxCoeff() < 1e-10) throw InputError("singular characteristic");
  return grad;
}

Characteristic first_nonsingular_odd(const ThetaContext& ctx) {
  const int g = ctx.genus;
  for (long long bits = 0; bits < (1LL << (2 * g)); ++bits) {
    Characteristic ch = Characteristic::zero(g);
    for (int i = 0; i < g; ++i) {
      ch.alpha(i) = (bits >> (2 * g - 1 - i)) & 1;
      ch.beta(i) = (bits >> (g - 1 - i)) & 1;
    }
    if (!ch.is_odd()) continue;
    if (theta_gradient(ctx, ch, CVec::Zero(g)).cwiseAbs().maxCoeff() >= 1e-10) return ch;
  }
  throw NumericalError("singular characteristic");
}

// ---- genus 1 ----

namespace {

struct Reduced {
  cplx z0;   // z = z0 + m + k tau
  int m = 0;
  int k = 0;
};

Reduced reduce1(cplx tau, cplx z) {
  if (!(tau.imag() > 0.0)) throw InputError("invalid period matrix");
  Reduced r;
  r.k = static_cast<int>(std::lround(z.imag() / tau.imag()));
  cplx z1 = z - double(r.k) * tau;
  r.m = static_cast<int>(std::lround(z1.real()));
  r.z0 = z1 - double(r.m);
  return r;
}

int terms_needed(cplx tau) {
  // |term_n| <= exp(-pi Im tau (n^2 - 1/4)) after reduction; stop below ~1e-17.
  const double need = std::sqrt(40.0 / (kPi * tau.imag()) + 0.25);
  return static_cast<int>(std::ceil(need)) + 1;
}

// Series for theta1 and theta1' at a reduced argument.
void theta1_series(cplx tau, cplx z, cplx* val, cplx* der) {
  const cplx ipt = kI * kPi * tau;
  const int N = terms_needed(tau);
  cplx s = 0.0, d = 0.0;
  for (int n = 0; n < N; ++n) {
    const double h = n + 0.5;
    const cplx qq = std::exp(ipt * (h * h));
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    const double f = (2 * n + 1) * kPi;
    if (val) s += sign * qq * std::sin(f * z);
    if (der) d += sign * qq * f * std::cos(f * z);
  }
  if (val) *val = 2.0 * s;
  if (der) *der = 2.0 * d;
}

// theta1(z0 + m + k tau) = (-1)^(m+k) exp(-i pi k^2 tau - 2 i pi k z0) theta1(z0).
cplx theta1_factor(cplx tau, const Reduced& r) {
  const double sign = ((r.m + r.k) % 2 == 0) ? 1.0 : -1.0;
  const double k = r.k;
  return sign * std::exp(-kI * kPi * (k * k) * tau - 2.0 * kI * kPi * k * r.z0);
}

}  // namespace

cplx jacobi_theta1(cplx tau, cplx z) {
  const Reduced r = reduce1(tau, z);
  cplx v;
  theta1_series(tau, r.z0, &v, nullptr);
  return theta1_factor(tau, r) * v;
}

cplx jacobi_theta1_prime(cplx tau, cplx z) {
  const Reduced r = reduce1(tau, z);
  cplx v, d;
  theta1_series(tau, r.z0, &v, &d);
  return theta1_factor(tau, r) * (d - 2.0 * kI * kPi * double(r.k) * v);
}

cplx theta1_log_derivative(cplx tau, cplx z) {
  const Reduced r = reduce1(tau, z);
  cplx v, d;
  theta1_series(tau, r.z0, &v, &d);
  return d / v - 2.0 * kI * kPi * double(r.k);
}

cplx theta1_log_derivative_prime(cplx tau, cplx z) {
  // L' = theta1''/theta1 - L^2; theta1'' from the series (periodic part only,
  // the shift -2 i pi k is constant).
  const Reduced r = reduce1(tau, z);
  const cplx ipt = kI * kPi * tau;
  const int N = terms_needed(tau);
  cplx s = 0.0, d = 0.0, dd = 0.0;
  for (int n = 0; n < N; ++n) {
    const double h = n + 0.5;
    const cplx qq = std::exp(ipt * (h * h));
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    const double f = (2 * n + 1) * kPi;
    s += sign * qq * std::sin(f * r.z0);
    d += sign * qq * f * std::cos(f * r.z0);
    dd -= sign * qq * f * f * std::sin(f * r.z0);
  }
  const cplx L = d / s;
  return dd / s - L * L;
}

double log_abs_theta1(cplx tau, cplx z) {
  const Reduced r = reduce1(tau, z);
  cplx v;
  theta1_series(tau, r.z0, &v, nullptr);
  const double k = r.k;
  // Re(-i pi k^2 tau - 2 i pi k z0) = pi k^2 Im tau + 2 pi k Im z0
  return std::log(std::abs(v)) + kPi * k * k * tau.imag() + 2.0 * kPi * k * r.z0.imag();
}

cplx jacobi_theta3(cplx tau, cplx z) {
  const Reduced r = reduce1(tau, z);
  const cplx ipt = kI * kPi * tau;
  const int N = terms_needed(tau);
  cplx s = 1.0;
  for (int n = 1; n < N; ++n)
    s += std::exp(ipt * double(n * n)) * 2.0 * std::cos(2.0 * kPi * n * r.z0);
  const double k = r.k;
  return std::exp(-kI * kPi * (k * k) * tau - 2.0 * kI * kPi * k * r.z0) * s;
}

}  // namespace chebotarev
