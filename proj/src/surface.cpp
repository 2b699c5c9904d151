#include "chebotarev/surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chebotarev {

Surface Surface::sphere(cplx chart_coeff) {
  if (chart_coeff == cplx(0.0)) throw InputError("chart coefficient must be nonzero");
  Surface s;
  s.kind_ = SurfaceKind::Sphere;
  s.chart_coeff_ = chart_coeff;
  return s;
}

Surface Surface::torus(cplx tau, cplx infinity, cplx chart_coeff) {
  if (!(tau.imag() > 0.0) || !std::isfinite(tau.real())) throw InputError("invalid period matrix");
  if (chart_coeff == cplx(0.0)) throw InputError("chart coefficient must be nonzero");
  Surface s;
  s.kind_ = SurfaceKind::Torus;
  s.tau_ = tau;
  s.chart_coeff_ = chart_coeff;
  s.infinity_ = infinity;
  return s;
}

SurfacePoint Surface::infinity() const {
  if (kind_ == SurfaceKind::Sphere) return SurfacePoint::point_at_infinity();
  return SurfacePoint(infinity_);
}

std::pair<double, double> Surface::cell_coordinates(cplx z) const {
  const double b = z.imag() / tau_.imag();
  const double a = z.real() - b * tau_.real();
  return {a, b};
}

cplx Surface::nearest_lift(cplx z, cplx ref) const {
  if (kind_ == SurfaceKind::Sphere) return z;
  auto [a, b] = cell_coordinates(z - ref);
  const double n0 = std::round(b);
  const double m0 = std::round(a);
  // Rounding in skew coordinates can miss the nearest translate by one step.
  cplx best = z;
  double best_d = std::numeric_limits<double>::infinity();
  for (int dn = -1; dn <= 1; ++dn) {
    for (int dm = -1; dm <= 1; ++dm) {
      const cplx w = z - (m0 + dm) - (n0 + dn) * tau_;
      const double d = std::abs(w - ref);
      if (d < best_d - 1e-15) {
        best_d = d;
        best = w;
      }
    }
  }
  return best;
}

cplx Surface::reduce(cplx z) const {
  if (kind_ == SurfaceKind::Sphere) return z;
  auto [a, b] = cell_coordinates(z);
  const double fb = std::floor(b + 0.5);
  const double fa = std::floor(a + 0.5);
  return z - fa - fb * tau_;
}

Lift Surface::lattice_coordinates(cplx w, double tol) const {
  auto [a, b] = cell_coordinates(w);
  const double m = std::round(a), n = std::round(b);
  if (std::abs(w - (m + n * tau_)) > tol) throw InputError("not a lattice vector");
  return {static_cast<int>(m), static_cast<int>(n)};
}

double Surface::distance(const SurfacePoint& p, const SurfacePoint& q) const {
  if (kind_ == SurfaceKind::Torus) {
    const cplx w = nearest_lift(p.coord - q.coord, 0.0);
    return std::abs(w);
  }
  if (p.at_infinity && q.at_infinity) return 0.0;
  if (p.at_infinity || q.at_infinity) {
    const cplx z = p.at_infinity ? q.coord : p.coord;
    return 2.0 / std::sqrt(1.0 + std::norm(z));
  }
  return 2.0 * std::abs(p.coord - q.coord) /
         std::sqrt((1.0 + std::norm(p.coord)) * (1.0 + std::norm(q.coord)));
}

cplx Surface::local_coordinate(const SurfacePoint& p) const {
  if (kind_ == SurfaceKind::Sphere) {
    if (p.at_infinity) return 0.0;
    if (p.coord == cplx(0.0)) throw InputError("point outside chart domain");
    return chart_coeff_ / p.coord;
  }
  return chart_coeff_ * (nearest_lift(p.coord, infinity_) - infinity_);
}

cplx Surface::from_local_coordinate(cplx z) const {
  if (kind_ == SurfaceKind::Sphere) {
    if (z == cplx(0.0)) throw InputError("infinity has no finite coordinate");
    return chart_coeff_ / z;
  }
  return infinity_ + z / chart_coeff_;
}

double Surface::chart_radius() const {
  if (kind_ == SurfaceKind::Sphere) return std::numeric_limits<double>::infinity();
  // Half the shortest nonzero lattice vector bounds the injectivity radius.
  double shortest = std::numeric_limits<double>::infinity();
  for (int m = -2; m <= 2; ++m)
    for (int n = -2; n <= 2; ++n)
      if (m != 0 || n != 0) shortest = std::min(shortest, std::abs(lattice(m, n)));
  return 0.5 * shortest * std::abs(chart_coeff_);
}

bool Surface::same_point(const SurfacePoint& p, const SurfacePoint& q, double tol) const {
  if (kind_ == SurfaceKind::Sphere && (p.at_infinity || q.at_infinity))
    return p.at_infinity == q.at_infinity;
  return distance(p, q) <= tol;
}

namespace {

template <class P>
double directed(const Surface& s, std::span<const P> a, std::span<const P> b) {
  double worst = 0.0;
  for (const auto& x : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& y : b) best = std::min(best, s.distance(x, y));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

double hausdorff_distance(const Surface& s, std::span<const SurfacePoint> a,
                          std::span<const SurfacePoint> b) {
  if (a.empty() || b.empty()) throw InputError("empty set");
  return std::max(directed(s, a, b), directed(s, b, a));
}

double hausdorff_distance(const Surface& s, std::span<const cplx> a, std::span<const cplx> b) {
  std::vector<SurfacePoint> pa(a.begin(), a.end()), pb(b.begin(), b.end());
  return hausdorff_distance(s, std::span<const SurfacePoint>(pa), std::span<const SurfacePoint>(pb));
}

}  // namespace chebotarev
