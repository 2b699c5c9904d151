#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chebotarev/equilibrium.hpp"
#include "chebotarev/quaddiff.hpp"

namespace chebotarev {

struct Trajectory {
  std::vector<cplx> points;  // lifted polyline
  bool critical = false;
  int origin = -1;           // vertex index (critical graph) or -1
  int end = -1;              // landing vertex or -1
  double q_length = 0.0;     // length in the |sqrt Q| metric
  double level_defect = 0.0; // max |Re int v| drift before projection
  std::string stop;          // "landed", "window", "budget", "stalled", "K", "infinity"
};

// A singular point of Q for launching/landing: Q ~ k (z - pos)^order.
struct SingularPoint {
  cplx pos;
  int order = 0;
};

struct TraceOptions {
  double budget = -1.0;      // Q-length budget; < 0 means 50 * diameter
  double window = 1e3;       // sphere: stop when |z| exceeds this
  double tol = 1e-10;        // RK45 local tolerance
  int max_steps = 200000;
};

// Vertical trajectory of an arbitrary density Q: dz/ds = sign * i / v, v continued
// along the curve, unit speed in the |v| metric. Landing at `singular` points uses the
// straight-segment integral to the point.
Trajectory trace_vertical(const Surface& s, const std::function<cplx(cplx)>& Q,
                          const std::vector<SingularPoint>& singular, cplx start, int sign,
                          double diameter, const TraceOptions& opt = {});
Trajectory trace_vertical(const QuadDiff& q, cplx start, int sign, const TraceOptions& opt = {});

// Unit directions at a singular point along which critical vertical trajectories leave.
std::vector<cplx> launch_directions(const QuadDiff& q, cplx p, int order);

struct GraphVertex {
  cplx pos;
  int order = 0;     // -1 anchor, m zero of multiplicity m
  int anchor = -1;   // index in q.anchors()
};

struct GraphEdge {
  int a = -1, b = -1;
  Trajectory path;   // from a to b
};

struct CriticalGraph {
  std::vector<GraphVertex> vertices;
  std::vector<GraphEdge> edges;
  std::vector<int> valence;        // rays landing or leaving at each vertex
  std::vector<int> unmatched;      // rays without a partner from the other end
  // Edges in the components that contain anchors, as a continuum.
  PolyContinuum continuum(const Surface& s) const;
};

// Throws NumericalError("non-closing trajectory: Boutroux residual too large?") when
// a critical trajectory does not land within the budget.
CriticalGraph build_critical_graph(const QuadDiff& q, const TraceOptions& opt = {});

// |Re int_{e_0}^p v|: the Green function read off the Boutroux differential.
double boutroux_green(const QuadDiff& q, cplx p);

struct SPropertyReport {
  double residual = 0.0;       // max relative jump of the one-sided normal derivatives
  int used = 0;
  int skipped = 0;
  std::vector<cplx> points;
  std::vector<std::pair<double, double>> derivatives;  // (d/dn+, d/dn-)
};

// One-sided finite differences of green_function at offsets {h, 2h}, Richardson
// combined. Samples are spread by arclength; samples within h of an arc end (free end,
// junction or corner) are skipped. h defaults to the mesh size of r.
SPropertyReport s_property_residual(const BipolarKernel& k, const CapacityResult& r, const PolyContinuum& K,
                                    int samples = 64, double h = -1.0);

enum class Dominance { Plus, Minus, Both, Single };

struct FoliationPoint {
  cplx pos;
  cplx normal;        // unit normal of the + side
  double dplus = 0.0, dminus = 0.0;
  double length = 0.0;
  Dominance cls = Dominance::Both;
};

struct FoliationSample {
  std::vector<FoliationPoint> points;
  double total_mass = 0.0;  // sum (d+ + d-) * length, 2 pi for a probability measure
};

// Per panel of r: one-sided normal derivatives from the jump relation, dominant side
// by the larger derivative, ties within `tie` relative declared Both.
FoliationSample classify_foliation(const BipolarKernel& k, const CapacityResult& r, double tie = 1e-3);

// Steepest-ascent line of G_K from p, parametrised by G (dz/dG = 1 / 2dG). Stops near
// infinity (stop = "infinity") or when the gradient stalls ("stalled").
Trajectory ascent_line(const BipolarKernel& k, const CapacityResult& r, cplx p, double g_step = 0.02);
bool flows_to_infinity(const BipolarKernel& k, const CapacityResult& r, cplx p);

// W(p) = z_inf(p) Cap exp(-int_inf^p (2 dG + dz_inf / z_inf)), integrated along the
// ascent line from p, on which H is constant. |W| = exp(-G) up to quadrature error.
// Throws NumericalError when the ascent line runs into a critical point.
cplx conformal_map_W(const BipolarKernel& k, const CapacityResult& r, cplx p);

// Steepest-descent lines from the critical points of G (mu + 1 from a zero of order mu
// of dG), traced to K or to another critical point.
std::vector<Trajectory> dissection(const BipolarKernel& k, const CapacityResult& r);
std::vector<Trajectory> dissection(const BipolarKernel& k, const CapacityResult& r, const GreenZeros& z);

struct JipReport {
  bool holds = false;
  int samples = 0;
  int traced = 0;
  std::vector<cplx> missed;  // start points of dominant lines that K misses
};

// Dominant ascent lines of F from `samples` boundary points; K intercepts the sample when
// it meets one of the dominant lines of that point (start point included) within h/2.
JipReport jip_check(const BipolarKernel& k, const CapacityResult& F, const FoliationSample& fol,
                    const PolyContinuum& K, int samples = 200);

}  // namespace chebotarev
