#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chebotarev/optimizer.hpp"
#include "chebotarev/trajectories.hpp"

// Instance/solution JSON, CSV and SVG artifacts. Complex numbers are [re, im] pairs.
namespace chebotarev::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kSolutionFormat = "chebotarev-solution/1";

// %.17g
std::string fmt(double x);

json complex_json(cplx z);
// Throws InputError naming `where` unless j is a pair of finite numbers.
cplx parse_complex(const json& j, const std::string& where);

// Parses text; syntax errors become InputError with line and column.
json parse_text(const std::string& text, const std::string& source);
json read_json_file(const std::string& path);
// Two-space indent, floats as %.17g, scalar lists on one line, trailing newline.
std::string dump(const json& j);

Surface parse_surface(const json& j, const std::string& where = "surface");
json surface_json(const Surface& s);

// Nodes coinciding with an anchor (within 1e-12) are flagged when `anchor_of` is absent.
PolyContinuum parse_continuum(const json& j, const Surface& s, const AnchorSet& anchors,
                              const std::string& where);
json continuum_json(const PolyContinuum& K);

// Fields: surface, anchors, pattern, optional initial_continuum, mesh, seed, route,
// tolerances {capacity, boutroux, sproperty, schiffer}. Without `check_pattern` the
// pattern may be absent or inadmissible (capacity of a given continuum).
ProblemInstance parse_instance(const json& j, bool check_pattern = true);
json instance_json(const ProblemInstance& inst);

Route parse_route(const std::string& name);
std::string route_name(Route r);

json certificates_json(const Certificates& c);
Certificates parse_certificates(const json& j);

json quaddiff_json(const QuadDiff& q);
std::vector<QuadZero> parse_zeros(const json& j, const std::string& where);

// Extra solution data beyond the Solution struct.
struct SolutionExtras {
  std::optional<RouteComparison> comparison;  // route both
  std::optional<UniquenessReport> uniqueness;
};

json solution_json(const ProblemInstance& inst, const Solution& sol, const SolutionExtras& extra = {});

struct StoredSolution {
  ProblemInstance instance;
  PolyContinuum minimizer;
  double capacity = 0.0;
  std::optional<std::vector<QuadZero>> zeros;
  Certificates certificates;
};
StoredSolution parse_solution(const json& j);

// Recomputes capacity and certificates from stored geometry.
struct Verification {
  double capacity = 0.0;
  Certificates certificates;
  double max_deviation = 0.0;  // against the stored numbers
};
Verification verify(const StoredSolution& stored);
json verification_json(const StoredSolution& stored, const Verification& v);

// CSV with a header row.
std::string measure_csv(const CapacityResult& r);
struct LabelledTrajectory {
  std::string kind;  // "critical", "dissection", "foliation"
  Trajectory path;
};
std::string trajectories_csv(const std::vector<LabelledTrajectory>& ts);

// Ascent lines of G_K from both sides of `lines` evenly spaced panels.
std::vector<Trajectory> sample_foliation(const BipolarKernel& k, const CapacityResult& r, int lines = 16);

struct Figure {
  const Surface* surface = nullptr;
  const PolyContinuum* K = nullptr;
  std::vector<cplx> anchors;
  std::vector<LabelledTrajectory> trajectories;
  std::vector<cplx> marks;  // zeros of the quadratic differential
};
std::string render_svg(const Figure& f);

json critical_graph_json(const CriticalGraph& g);

void write_file(const std::string& path, const std::string& text);

}  // namespace chebotarev::io
