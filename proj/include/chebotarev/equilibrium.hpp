#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "chebotarev/continua.hpp"
#include "chebotarev/kernels.hpp"

namespace chebotarev {

struct Panel {
  cplx a, b;        // endpoints (lifts in C)
  cplx mid;
  double length = 0.0;
  cplx tangent;     // unit
  int edge = -1;    // source edge of the continuum
};

// Nodes where the density of the equilibrium measure is singular: free ends,
// junctions (degree != 2) and corners turning by more than 0.3 rad.
std::vector<bool> singular_nodes(const Surface& s, const PolyContinuum& K);

struct PanelDiscretization {
  std::vector<Panel> panels;
  double h = 0.0;

  // Splits each edge into ceil(len/h) equal panels (or counts[e] when given), graded
  // towards singular nodes.
  static PanelDiscretization from_continuum(const Surface& s, const PolyContinuum& K, double h,
                                            std::span<const int> counts = {});
  // Convenience: straight segment / polygon panels.
  static PanelDiscretization segment(cplx a, cplx b, int n);
  static PanelDiscretization circle(cplx center, double radius, int n);
  std::size_t size() const { return panels.size(); }
};

struct DiscreteMeasure {
  PanelDiscretization disc;
  std::vector<double> weights;
};

struct CapacityResult {
  Surface surface;
  DiscreteMeasure measure;
  double energy = 0.0;
  double capacity = 0.0;
  double robin_constant = 0.0;  // ln Cap
  double kkt_residual = 0.0;
  int active_panels = 0;
};

// Panel-averaged kernel matrix G^(i, j) (near-field corrected).
Eigen::MatrixXd assemble_kernel(const BipolarKernel& k, const PanelDiscretization& d);

// -sum_ij w_i w_j G^(i, j).
double energy(const BipolarKernel& k, const DiscreteMeasure& m);

// Minimises the energy over the simplex. Throws NumericalError("degenerate discretization").
CapacityResult equilibrium_measure(const BipolarKernel& k, const PanelDiscretization& d);

// Potential U(p) = sum_j w_j <G(p, .)>_j.
double potential(const BipolarKernel& k, const CapacityResult& r, cplx p);
// G_K(p) = U(p) - ln Cap, clamped to 0 on K (within h/2) and for values in (-tol, 0).
double green_function(const BipolarKernel& k, const CapacityResult& r, cplx p);
// Unclamped U(p) - ln Cap.
double green_raw(const BipolarKernel& k, const CapacityResult& r, cplx p);
// 2 dG_K/dp at p off K.
cplx green_gradient(const BipolarKernel& k, const CapacityResult& r, cplx p);

// One-sided outward normal derivatives at the midpoint of panel i, from the jump
// relation of the single layer: dG/dn(+-) = pi sigma_i +- Re(n * rest).
std::pair<double, double> normal_derivatives(const BipolarKernel& k, const CapacityResult& r, int i);

// Distance from p to the discretized set (surface metric).
double distance_to_set(const Surface& s, const PanelDiscretization& d, cplx p);

// Cap reported in the chart w = coeff * z_inf.
CapacityResult capacity_rescale(const CapacityResult& r, cplx new_chart_coeff);

// Mean of ln|x - y| over y on the straight segment [a, b].
double panel_log_average(cplx x, cplx a, cplx b);
// Mean of 1/(x - y) over y on [a, b].
cplx panel_cauchy_average(cplx x, cplx a, cplx b);

struct ContinuityProbe {
  double hausdorff = 0.0;
  double delta_log_cap = 0.0;
};
// Normal bump of amplitude eps on the free nodes of K (anchors fixed).
PolyContinuum bump_continuum(const Surface& s, const PolyContinuum& K, double eps);
ContinuityProbe continuity_probe(const BipolarKernel& k, const PolyContinuum& K, double eps, double h);

// Capacities of a sequence of continua.
std::vector<double> divergence_probe(const BipolarKernel& k, const std::vector<PolyContinuum>& seq,
                                     int panels_per_continuum);

}  // namespace chebotarev
