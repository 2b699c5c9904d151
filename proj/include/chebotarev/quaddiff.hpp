#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chebotarev/equilibrium.hpp"
#include "chebotarev/kernels.hpp"

namespace chebotarev {

struct QuadZero {
  cplx pos;
  int mult = 1;
};

// Meromorphic quadratic differential with simple poles at the anchors and a double
// pole of bi-residue 1 at infinity.
//
// Sphere: Q = prod (z - a_i)^{m_i} / prod (z - e_j),       sum m_i = N - 2.
// Torus:  Q = scale e^{-2 pi i n u} prod th1(u - a_i)^{m_i} / (prod th1(u - e_j) th1(u)^2),
//         u = z - inf, sum m_i = N + 2. The last zero is moved within its class mod
//         the lattice / m_last so that sum m_i a_i - sum e_j - 2 inf = M + n tau exactly,
//         and scale is fixed by the bi-residue.
class QuadDiff {
 public:
  QuadDiff() = default;
  // Throws InputError("divisor degree mismatch") when the zero count is wrong.
  QuadDiff(const Surface& s, std::vector<cplx> anchors, std::vector<QuadZero> zeros);

  const Surface& surface() const { return s_; }
  const std::vector<cplx>& anchors() const { return anchors_; }
  const std::vector<QuadZero>& zeros() const { return zeros_; }
  cplx scale() const { return scale_; }
  Lift abel_lattice() const { return abel_; }

  // Density of Q in the base coordinate.
  cplx operator()(cplx z) const;
  // lim w^2 Q in the chart w = z_inf, from a circle mean.
  cplx bi_residue() const;
  // Anchors and zeros of odd multiplicity.
  std::vector<cplx> branch_points() const;
  // Distance from z to the nearest anchor, zero or infinity (surface metric).
  double singular_distance(cplx z) const;
  // Leading coefficient k in Q ~ k (z - p)^mu at an anchor, zero or (mu = -2) infinity.
  cplx local_coefficient(cplx p, int mu) const;
  // Characteristic length (spread of anchors and zeros).
  double diameter() const;

 private:
  Surface s_;
  std::vector<cplx> anchors_;
  std::vector<QuadZero> zeros_;
  cplx scale_ = 1.0;
  Lift abel_{};
};

// Integral of v = sqrt(Q) along a polyline, continuing the branch of the root
// along the path. `v_start` seeds the sheet (principal root when zero) and
// receives nothing; `v_end` returns the continued value at the last vertex.
// singular_start / singular_end: the corresponding end is a branch point or zero.
cplx integrate_sqrt(const QuadDiff& q, std::span<const cplx> path, bool singular_start,
                    bool singular_end, cplx v_start = 0.0, cplx* v_end = nullptr,
                    double tol = 1e-12);

struct CoverCycle {
  std::vector<cplx> path;   // closed polyline in the base (first == last up to a lattice shift)
  // "branch-pair"; "lattice-a"/"lattice-b" with suffix "-" (other sheet), "-double" or
  // "-branch" (closed up by a loop around a branch point) when the lift swaps sheets
  std::string kind;
  bool closed_on_cover = true;  // the single lift of the base contour closes
};

struct DoubleCover {
  QuadDiff base;
  std::vector<cplx> branch_points;
  std::vector<std::pair<int, int>> tree;  // spanning tree over branch_points
  cplx base_point{};                      // start of the lattice cycles (torus)
  std::vector<CoverCycle> cycles;
  int betti_number = 0;                   // first Betti number of the punctured cover
  cplx infinity_residue{};                // residue of v at one lift of infinity
};

DoubleCover make_double_cover(const QuadDiff& q);
// Throws NumericalError("contour hits branch locus") if the contour passes within 1e-3
// of a branch point.
cplx sqrt_period(const DoubleCover& dc, std::size_t cycle);
cplx contour_period(const QuadDiff& q, std::span<const cplx> closed_path);

struct BoutrouxResidual {
  std::vector<double> level;      // Re int v along the spanning-tree edges
  std::vector<double> lattice;    // lattice-cycle defects (torus)
  cplx bi_residue_defect{};
  std::vector<cplx> periods;      // branch-pair and lattice periods
  double norm() const;            // max-norm of all entries
};

// Layout (tree and base point) is fixed by `dc`; the residual is evaluated for q.
BoutrouxResidual boutroux_residual(const QuadDiff& q, const DoubleCover& dc);
BoutrouxResidual boutroux_residual(const QuadDiff& q);

struct BoutrouxOptions {
  double tol = 1e-9;
  int max_iter = 50;
  double fd_step = 1e-6;
};

struct BoutrouxSolve {
  QuadDiff q;
  BoutrouxResidual residual;
  int iterations = 0;
};

// Gauss-Newton on the free zero positions. Throws NumericalError on rank loss
// ("degenerate configuration (coalescing zeros?)") or after max_iter steps.
BoutrouxSolve boutroux_solve(const QuadDiff& initial, const BoutrouxOptions& opt = {});

// D_h(mu) with h = C(x, .): sum_ij w_i w_j [h(p_i) Omega(p_i, p_j) + h(p_j) Omega(p_j, p_i)].
class SchifferProbe {
 public:
  SchifferProbe(const BipolarKernel& k, const CapacityResult& r);
  cplx residual(const CauchyKernel& c, cplx x) const;
  // Same with an arbitrary holomorphic field h.
  cplx residual(const std::function<cplx(cplx)>& h, const std::function<cplx(cplx)>& dh) const;
  // int int F(x; p, q) dmu dmu = -D_h + (2 dG_K(x))^2.
  cplx quad_value(const CauchyKernel& c, cplx x) const;

 private:
  const BipolarKernel* k_;
  const CapacityResult* r_;
  std::vector<cplx> psi_;  // sum_{j != i} w_j Omega(p_i, p_j) + w_i R(p_i)
};

cplx schiffer_residual(const BipolarKernel& k, const CapacityResult& r, const CauchyKernel& c, cplx x);

struct CriticalFit {
  QuadDiff q;
  double fit_residual = 0.0;        // relative misfit over the probes
  std::vector<cplx> probe_values;   // double integral of F at the probes
  cplx fitted_bi_residue{};         // leading coefficient of the unnormalised fit
  std::vector<cplx> coefficients;   // sphere: Q * prod (z - e_j), constant term first
  std::optional<std::string> warning;
};

// Fits the divisor family to the double integral of F over the probes. On the torus
// `guess` supplies the zero template (multiplicities and starting positions).
CriticalFit from_critical_measure(const BipolarKernel& k, const CapacityResult& r,
                                  const CauchyKernel& c, std::span<const cplx> probes,
                                  const std::optional<QuadDiff>& guess = std::nullopt);

// Probe points on a circle around the support, clear of it.
std::vector<cplx> default_probes(const Surface& s, const PanelDiscretization& d, int count = 16);

struct GreenZeros {
  int count = 0;                  // zeros minus poles of dG_K in the scanned region
  std::vector<cplx> locations;    // refined zero positions
};

// Winding number of 2 dG_K along a closed polyline. Throws NumericalError("contour too
// close to a zero") when the winding is not within 0.1 of an integer.
int green_winding(const BipolarKernel& k, const CapacityResult& r, std::span<const cplx> closed_path);

// Zeros of 2 dG_K in the complement of K: sums the winding over a grid of cells that
// stay clear of K (by `clearance`, default 2h) and of infinity. Torus: one fundamental
// cell centred at infinity. Sphere: the box of K enlarged by `margin` diameters.
GreenZeros count_green_zeros(const BipolarKernel& k, const CapacityResult& r, double clearance = -1.0,
                             double margin = 2.0);

}  // namespace chebotarev
