#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chebotarev/equilibrium.hpp"
#include "chebotarev/quaddiff.hpp"

namespace chebotarev {

enum class Route { Shape, Boutroux, Both };

struct Tolerances {
  double capacity = 1e-6;
  double boutroux = 1e-9;
  double sproperty = 2e-2;
  double schiffer = 1e-2;
};

struct ProblemInstance {
  Surface surface;
  AnchorSet anchors;
  ConnectivityPattern pattern;
  double mesh = -1.0;        // panel size; < 0 means 0.01 * diameter()
  Route route = Route::Both;
  Tolerances tol;
  std::optional<PolyContinuum> initial;
  std::uint64_t seed = 0;

  // Largest pairwise anchor distance (surface metric).
  double diameter() const;
  double panel_size() const { return mesh > 0 ? mesh : 0.01 * diameter(); }
  // Throws InputError on an inadmissible pattern or anchors/pattern size mismatch.
  void validate() const;
};

struct DescentOptions {
  double node_spacing = -1.0;   // free-node spacing along arcs; < 0 means diameter / 8
  double beta0 = -1.0;          // initial step; < 0 means 0.05 * diameter
  double beta_floor = -1.0;     // < 0 means 1e-4 * diameter
  int max_sweeps = 400;
};

struct Certificates {
  double s_property = 0.0;
  double schiffer = 0.0;            // max |D_h| / max_K |h|^2 over the probes
  std::optional<double> boutroux;   // only when a quadratic differential is attached
  int jip_trials = 0;
  int jip_held = 0;
  int jip_ordered = 0;              // trials with Cap(deformation) >= Cap - 5e-3
};

struct Solution {
  PolyContinuum minimizer;
  CapacityResult capacity;
  std::optional<QuadDiff> quaddiff;
  Certificates certificates;
  std::vector<double> history;      // accepted capacities (shape route)
  int sweeps = 0;
  double final_step = 0.0;
  std::uint64_t seed = 0;
  std::string route;                // "shape" or "boutroux"
  std::vector<std::string> warnings;
};

// One arc per pattern class: segments or a star around the anchor centroid for each
// (0, 0) component, a closed geodesic loop for each winding class. Free nodes at
// `spacing`.
PolyContinuum initial_continuum(const ProblemInstance& inst, double spacing);

// Chains between anchors, junctions and free ends resampled at <= step; lifts kept.
PolyContinuum resample(const Surface& s, const PolyContinuum& K, double step);

// Anchor-fixed deformation: smooth normal bumps of size ~amplitude along every chain
// plus random junction displacements.
PolyContinuum random_deformation(const Surface& s, const PolyContinuum& K, double amplitude,
                                 std::mt19937_64& rng);

double continuum_distance(const Surface& s, const PolyContinuum& a, const PolyContinuum& b, double step);

CapacityResult continuum_capacity(const Surface& s, const PolyContinuum& K, double h);

// Throws InputError("infeasible start") when the initial continuum misses the pattern.
Solution solve_shape_descent(const ProblemInstance& inst, const DescentOptions& opt = {});

// Throws NumericalError when no start converges or no converged graph realises the pattern
// ("pattern unreachable from ansatz").
Solution solve_boutroux_route(const ProblemInstance& inst);

// Starting divisor for the Boutroux route; start 0 is deterministic, later ones perturbed.
QuadDiff boutroux_ansatz(const ProblemInstance& inst, int start, std::mt19937_64& rng);

// S-property and Schiffer residuals of r on K; JIP against `jip_trials` random deformations.
Certificates certify(const ProblemInstance& inst, const PolyContinuum& K, const CapacityResult& r,
                     int jip_trials = 0);

struct RouteComparison {
  Solution shape;
  Solution boutroux;
  double capacity_gap = 0.0;
  double hausdorff = 0.0;
};
RouteComparison solve_both(const ProblemInstance& inst, const DescentOptions& opt = {});

struct UniquenessReport {
  std::vector<double> capacities;
  double hausdorff_spread = 0.0;
  double capacity_spread = 0.0;
  bool supports_uniqueness = false;   // capacity spread <= 2 capacity_tol
};

// Shape descent from `trials` random feasible perturbations of the initial continuum.
UniquenessReport uniqueness_probe(const ProblemInstance& inst, const Solution& sol, int trials,
                                  const DescentOptions& opt = {});

}  // namespace chebotarev
