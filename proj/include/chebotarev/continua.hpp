#pragma once

#include <vector>

#include "chebotarev/surface.hpp"

namespace chebotarev {

// Distinct points e_1..e_N, none at infinity.
class AnchorSet {
 public:
  AnchorSet() = default;
  // Throws InputError on duplicates or an anchor at infinity.
  AnchorSet(const Surface& s, std::vector<cplx> points);
  const std::vector<cplx>& points() const { return pts_; }
  std::size_t size() const { return pts_.size(); }
  cplx operator[](std::size_t i) const { return pts_[i]; }

 private:
  std::vector<cplx> pts_;
};

// Relative homotopy class of a path from e_i to e_j: on the torus the path lifts
// from e_i to e_j + m + n tau. On the sphere only the pairing matters.
struct HomotopyLabel {
  int i = 0;
  int j = 0;
  int m = 0;
  int n = 0;
  HomotopyLabel inverse() const { return {j, i, -m, -n}; }
};

// Decorated adjacency matrix, stored as its list of labels; symmetric by
// construction (a label implies its inverse).
class ConnectivityPattern {
 public:
  ConnectivityPattern() = default;
  ConnectivityPattern(int n, std::vector<HomotopyLabel> labels);

  int size() const { return n_; }
  const std::vector<HomotopyLabel>& labels() const { return labels_; }
  // Labels modulo inversion (duplicates removed).
  int class_count() const { return static_cast<int>(labels_.size()); }
  int max_winding() const;
  bool admissible() const;
  // Throws InputError("inadmissible pattern").
  void validate() const;
  // Entry (i, j) of the matrix: all labels from e_i to e_j.
  std::vector<HomotopyLabel> entry(int i, int j) const;

 private:
  int n_ = 0;
  std::vector<HomotopyLabel> labels_;
};

// Straight chart segment from nodes[a] to nodes[b] + m + n tau.
struct ContinuumEdge {
  int a = 0;
  int b = 0;
  Lift shift{};
};

// Finite polyline graph. Node coordinates are fixed lifts in C; edges may cross
// into neighbouring cells through their lattice shift.
struct PolyContinuum {
  std::vector<cplx> nodes;
  std::vector<int> anchor_of;  // anchor index per node, -1 for free nodes
  std::vector<ContinuumEdge> edges;

  int add_node(cplx z, int anchor = -1);
  void add_edge(int a, int b, Lift shift = {});
  int node_of_anchor(int anchor) const;
  cplx edge_start(const Surface& s, std::size_t e) const;
  cplx edge_end(const Surface& s, std::size_t e) const;
  double edge_length(const Surface& s, std::size_t e) const;
  double total_length(const Surface& s) const;
  double max_edge_length(const Surface& s) const;
  // Points along the edges with spacing <= step (anchors and nodes included).
  std::vector<cplx> sample(const Surface& s, double step) const;
  // Component id per node (union-find over edges) and their count.
  std::vector<int> component_ids(int* count = nullptr) const;
  int component_count() const;
  int component_count_bfs() const;
  // Checks anchors present, edge lengths <= h (if h > 0), distance to infinity.
  void validate(const Surface& s, const AnchorSet& anchors, double h = 0.0) const;
};

// Membership of a relative homotopy class in the eps-fattening of K (covering-space
// union-find with inter-edge merging at distance <= 2 eps).
bool contains_class(const Surface& s, const PolyContinuum& K, const AnchorSet& anchors,
                    const HomotopyLabel& label, double eps, int window = -1);

// Components of the eps-fattening of K on the surface itself.
int fattened_component_count(const Surface& s, const PolyContinuum& K, double eps);

// Membership in the class of P at resolution eps.
bool exceeds_pattern(const Surface& s, const PolyContinuum& K, const AnchorSet& anchors,
                     const ConnectivityPattern& P, double eps);

// Points within eps of K with spacing <= eps/4.
std::vector<cplx> fatten(const Surface& s, const PolyContinuum& K, double eps);

// Splits every edge into pieces of length <= h_new. Anchors preserved.
PolyContinuum refine(const Surface& s, const PolyContinuum& K, double h_new);

// Distance from point z to segment [a, b] in the plane.
double point_segment_distance(cplx z, cplx a, cplx b);
double segment_segment_distance(cplx a, cplx b, cplx c, cplx d);

}  // namespace chebotarev
