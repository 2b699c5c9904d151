#pragma once

#include <optional>
#include <span>
#include <vector>

#include "chebotarev/common.hpp"

namespace chebotarev {

enum class SurfaceKind { Sphere, Torus };

// Covering translate m + n*tau of a torus point relative to the fundamental cell.
struct Lift {
  int m = 0;
  int n = 0;
  friend bool operator==(const Lift&, const Lift&) = default;
};

// A point on the sphere (extended plane) or on the torus C/(Z + tau Z).
struct SurfacePoint {
  cplx coord{};
  bool at_infinity = false;  // sphere only: the point zeta = infinity
  std::optional<Lift> lift;

  SurfacePoint() = default;
  SurfacePoint(cplx z) : coord(z) {}    // NOLINT(google-explicit-constructor)
  SurfacePoint(double x) : coord(x) {}  // NOLINT(google-explicit-constructor)
  static SurfacePoint point_at_infinity() {
    SurfacePoint p;
    p.at_infinity = true;
    return p;
  }
};

// The Riemann sphere or a genus-1 torus, with a marked reference point (called
// infinity) and an affine local coordinate z_inf around it.
//
// Sphere: infinity is always zeta = infinity, z_inf(zeta) = chart_coeff / zeta.
// Torus:  z_inf(p) = chart_coeff * (p - infinity), p reduced to the lift nearest
//         to infinity.
class Surface {
 public:
  static Surface sphere(cplx chart_coeff = 1.0);
  static Surface torus(cplx tau, cplx infinity = 0.0, cplx chart_coeff = 1.0);

  SurfaceKind kind() const { return kind_; }
  bool is_torus() const { return kind_ == SurfaceKind::Torus; }
  cplx tau() const { return tau_; }
  SurfacePoint infinity() const;
  cplx infinity_coord() const { return infinity_; }
  cplx chart_coeff() const { return chart_coeff_; }

  // Flat metric on the torus, chordal metric on the sphere.
  double distance(const SurfacePoint& p, const SurfacePoint& q) const;

  // z_inf(p). Throws InputError outside the chart domain.
  cplx local_coordinate(const SurfacePoint& p) const;
  // Inverse of local_coordinate (torus: the lift nearest to infinity).
  cplx from_local_coordinate(cplx z) const;
  // Radius of the disk |z_inf| < r on which the chart is valid (torus only;
  // infinite on the sphere).
  double chart_radius() const;

  // Torus: the lattice translate of z nearest to ref. Sphere: z.
  cplx nearest_lift(cplx z, cplx ref) const;
  // Torus: representative in the cell {a + b tau : a, b in [-1/2, 1/2)}.
  cplx reduce(cplx z) const;
  // Torus: lattice point m + n tau.
  cplx lattice(int m, int n) const { return double(m) + double(n) * tau_; }
  // Decompose a lattice vector; throws if w is not within tol of the lattice.
  Lift lattice_coordinates(cplx w, double tol = 1e-8) const;
  // Real coordinates (a, b) with z = a + b tau.
  std::pair<double, double> cell_coordinates(cplx z) const;

  bool same_point(const SurfacePoint& p, const SurfacePoint& q, double tol = 1e-12) const;

 private:
  SurfaceKind kind_ = SurfaceKind::Sphere;
  cplx tau_{0.0, 1.0};
  cplx infinity_{0.0, 0.0};
  cplx chart_coeff_{1.0, 0.0};
};

// Max of the two directed Hausdorff distances. Throws InputError("empty set").
double hausdorff_distance(const Surface& s, std::span<const SurfacePoint> a,
                          std::span<const SurfacePoint> b);
double hausdorff_distance(const Surface& s, std::span<const cplx> a, std::span<const cplx> b);

}  // namespace chebotarev
