// chebotarev: command-line front end. Exit codes: 0 ok, 1 input error, 2 numerical failure.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include "chebotarev/io.hpp"
#include "chebotarev/theta.hpp"

using namespace chebotarev;
using io::json;

namespace {

struct RunConfig {
  std::string subcommand;
  std::string instance_path;
  std::string solution_path;
  std::string output_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_capacity, tol_boutroux, tol_sproperty, mesh;
  std::optional<std::string> route;
  int jip_trials = 0;
  int uniqueness_trials = 0;
  int foliation_lines = 16;
};

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

void prepare_output(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec || !std::filesystem::is_directory(cfg.output_dir))
    throw InputError(cfg.output_dir + ": output directory not writable");
}

// Seed of the current run, for the diagnostic JSON.
std::optional<std::uint64_t> g_seed;

ProblemInstance load_instance(const RunConfig& cfg, const json& j, bool check_pattern = true) {
  ProblemInstance inst = io::parse_instance(j, check_pattern);
  if (cfg.seed) inst.seed = *cfg.seed;
  g_seed = inst.seed;
  if (cfg.mesh) {
    if (!(*cfg.mesh > 0)) throw InputError("--mesh: must be positive");
    inst.mesh = *cfg.mesh;
  }
  if (cfg.route) inst.route = io::parse_route(*cfg.route);
  auto positive = [](std::optional<double> v, double& dst, const char* flag) {
    if (!v) return;
    if (!(*v > 0)) throw InputError(std::string(flag) + ": must be positive");
    dst = *v;
  };
  positive(cfg.tol_capacity, inst.tol.capacity, "--tol.capacity");
  positive(cfg.tol_boutroux, inst.tol.boutroux, "--tol.boutroux");
  positive(cfg.tol_sproperty, inst.tol.sproperty, "--tol.sproperty");
  return inst;
}

json require_instance_file(const RunConfig& cfg) {
  if (cfg.instance_path.empty()) throw InputError("--instance is required");
  return io::read_json_file(cfg.instance_path);
}

// Boutroux differential from explicit zeros in the instance file, or from the ansatz starts.
struct BoutrouxRun {
  BoutrouxSolve solve;
  int start = -1;
};

BoutrouxRun solve_boutroux(const ProblemInstance& inst, const json& j) {
  BoutrouxOptions bo;
  bo.tol = inst.tol.boutroux;
  if (j.contains("zeros")) {
    const QuadDiff q0(inst.surface, inst.anchors.points(), io::parse_zeros(j["zeros"], "zeros"));
    return {boutroux_solve(q0, bo), -1};
  }
  std::mt19937_64 rng(inst.seed);
  std::string last = "no start attempted";
  for (int start = 0; start < 10; ++start) {
    try {
      return {boutroux_solve(boutroux_ansatz(inst, start, rng), bo), start};
    } catch (const NumericalError& e) {
      last = e.what();
    }
  }
  throw NumericalError("no Boutroux solution found from 10 starts (last: " + last + ")");
}

std::vector<io::LabelledTrajectory> label(const std::vector<Trajectory>& ts, const char* kind) {
  std::vector<io::LabelledTrajectory> out;
  for (const auto& t : ts) out.push_back({kind, t});
  return out;
}

void append(std::vector<io::LabelledTrajectory>& a, std::vector<io::LabelledTrajectory> b) {
  for (auto& t : b) a.push_back(std::move(t));
}

// ---- subcommands ----

int run_solve(const RunConfig& cfg) {
  const ProblemInstance inst = load_instance(cfg, require_instance_file(cfg));
  prepare_output(cfg);
  Solution sol;
  io::SolutionExtras extra;
  switch (inst.route) {
    case Route::Shape: sol = solve_shape_descent(inst); break;
    case Route::Boutroux: sol = solve_boutroux_route(inst); break;
    case Route::Both: {
      RouteComparison rc = solve_both(inst);
      sol = rc.shape;
      sol.quaddiff = rc.boutroux.quaddiff;
      sol.certificates.boutroux = rc.boutroux.certificates.boutroux;
      for (const auto& w : rc.boutroux.warnings) sol.warnings.push_back("boutroux route: " + w);
      extra.comparison = std::move(rc);
      break;
    }
  }
  if (cfg.jip_trials > 0) {
    const auto b = sol.certificates.boutroux;
    sol.certificates = certify(inst, sol.minimizer, sol.capacity, cfg.jip_trials);
    sol.certificates.boutroux = b;
  }
  if (cfg.uniqueness_trials > 0) extra.uniqueness = uniqueness_probe(inst, sol, cfg.uniqueness_trials);

  const BipolarKernel k(inst.surface);
  std::vector<io::LabelledTrajectory> ts;
  std::vector<cplx> marks;
  if (sol.quaddiff) {
    for (const auto& z : sol.quaddiff->zeros()) marks.push_back(z.pos);
    try {
      const CriticalGraph g = build_critical_graph(*sol.quaddiff);
      for (const auto& e : g.edges) ts.push_back({"critical", e.path});
    } catch (const NumericalError& e) {
      sol.warnings.push_back(std::string("critical graph: ") + e.what());
    }
  }
  try {
    append(ts, label(dissection(k, sol.capacity), "dissection"));
  } catch (const NumericalError& e) {
    sol.warnings.push_back(std::string("dissection: ") + e.what());
  }
  append(ts, label(io::sample_foliation(k, sol.capacity, cfg.foliation_lines), "foliation"));

  io::write_file(out_path(cfg, "solution.json"), io::dump(io::solution_json(inst, sol, extra)));
  io::write_file(out_path(cfg, "measure.csv"), io::measure_csv(sol.capacity));
  io::write_file(out_path(cfg, "trajectories.csv"), io::trajectories_csv(ts));
  io::write_file(out_path(cfg, "figure.svg"),
                 io::render_svg({&inst.surface, &sol.minimizer, inst.anchors.points(), ts, marks}));
  std::printf("capacity %s\n", io::fmt(sol.capacity.capacity).c_str());
  return 0;
}

int run_capacity(const RunConfig& cfg) {
  const json j = require_instance_file(cfg);
  const ProblemInstance inst = load_instance(cfg, j, !j.contains("initial_continuum"));
  prepare_output(cfg);
  const Surface& s = inst.surface;
  const PolyContinuum K = inst.initial ? *inst.initial : initial_continuum(inst, inst.diameter() / 8);
  const double h = inst.panel_size();
  const CapacityResult r = continuum_capacity(s, K, h);
  const BipolarKernel k(s);

  std::vector<cplx> pts;
  if (j.contains("green_samples")) {
    const json& g = j["green_samples"];
    if (!g.is_array()) throw InputError("green_samples: expected a list");
    for (std::size_t i = 0; i < g.size(); ++i)
      pts.push_back(io::parse_complex(g[i], "green_samples[" + std::to_string(i) + "]"));
  } else {
    cplx c = 0.0;
    for (cplx e : inst.anchors.points()) c += s.nearest_lift(e, inst.anchors[0]);
    c /= double(inst.anchors.size());
    const double rad = s.is_torus() ? std::min(0.6 * inst.diameter(), 0.3 * std::min(1.0, s.tau().imag()))
                                    : 0.6 * inst.diameter();
    for (int i = 0; i < 8; ++i) pts.push_back(c + std::polar(rad, 2 * kPi * i / 8));
  }
  json samples = json::array();
  for (cplx p : pts) {
    json e;
    e["point"] = io::complex_json(p);
    if (s.is_torus() && s.distance(p, s.infinity_coord()) < 1e-9)
      e["green"] = nullptr;
    else
      e["green"] = green_function(k, r, p);
    samples.push_back(e);
  }
  json out;
  out["seed"] = inst.seed;
  out["capacity"] = r.capacity;
  out["energy"] = r.energy;
  out["robin_constant"] = r.robin_constant;
  out["kkt_residual"] = r.kkt_residual;
  out["panels"] = r.measure.disc.size();
  out["mesh"] = h;
  out["continuum"] = inst.initial ? "initial_continuum" : "generated";
  out["weights"] = "weights.csv";
  out["green_samples"] = samples;
  io::write_file(out_path(cfg, "capacity.json"), io::dump(out));
  io::write_file(out_path(cfg, "weights.csv"), io::measure_csv(r));
  std::printf("capacity %s\n", io::fmt(r.capacity).c_str());
  return 0;
}

json boutroux_json(const ProblemInstance& inst, const BoutrouxRun& br) {
  const json qd = io::quaddiff_json(br.solve.q);
  json out;
  out["seed"] = inst.seed;
  out["zeros"] = qd["zeros"];
  out["scale"] = qd["scale"];
  out["residual_norm"] = br.solve.residual.norm();
  out["periods"] = json::array();
  for (cplx p : br.solve.residual.periods) out["periods"].push_back(io::complex_json(p));
  out["bi_residue_defect"] = io::complex_json(br.solve.residual.bi_residue_defect);
  out["iterations"] = br.solve.iterations;
  out["start"] = br.start;
  return out;
}

int run_boutroux(const RunConfig& cfg) {
  const json j = require_instance_file(cfg);
  const ProblemInstance inst = load_instance(cfg, j);
  prepare_output(cfg);
  const BoutrouxRun br = solve_boutroux(inst, j);
  io::write_file(out_path(cfg, "boutroux.json"), io::dump(boutroux_json(inst, br)));
  std::printf("residual_norm %s\n", io::fmt(br.solve.residual.norm()).c_str());
  return 0;
}

int run_trace(const RunConfig& cfg) {
  const json j = require_instance_file(cfg);
  const ProblemInstance inst = load_instance(cfg, j);
  prepare_output(cfg);
  const Surface& s = inst.surface;
  const BoutrouxRun br = solve_boutroux(inst, j);
  const CriticalGraph g = build_critical_graph(br.solve.q);
  const double h = inst.panel_size();
  const PolyContinuum K = resample(s, g.continuum(s), std::max(h, inst.diameter() / 64));
  const CapacityResult r = continuum_capacity(s, K, h);
  const BipolarKernel k(s);

  std::vector<io::LabelledTrajectory> ts;
  for (const auto& e : g.edges) ts.push_back({"critical", e.path});
  append(ts, label(dissection(k, r), "dissection"));
  append(ts, label(io::sample_foliation(k, r, cfg.foliation_lines), "foliation"));
  std::vector<cplx> marks;
  for (const auto& z : br.solve.q.zeros()) marks.push_back(z.pos);

  json graph = io::critical_graph_json(g);
  graph["seed"] = inst.seed;
  graph["capacity"] = r.capacity;
  io::write_file(out_path(cfg, "trajectories.csv"), io::trajectories_csv(ts));
  io::write_file(out_path(cfg, "graph.json"), io::dump(graph));
  io::write_file(out_path(cfg, "figure.svg"), io::render_svg({&s, &K, inst.anchors.points(), ts, marks}));
  std::printf("edges %zu\n", g.edges.size());
  return 0;
}

int run_verify(const RunConfig& cfg) {
  const std::string path = !cfg.solution_path.empty() ? cfg.solution_path : cfg.instance_path;
  if (path.empty()) throw InputError("--solution is required");
  const io::StoredSolution st = io::parse_solution(io::read_json_file(path));
  g_seed = st.instance.seed;
  prepare_output(cfg);
  const io::Verification v = io::verify(st);
  const json out = io::verification_json(st, v);
  io::write_file(out_path(cfg, "certificates.json"), io::dump(out));
  if (!(v.max_deviation <= 1e-12))
    throw NumericalError("stored certificates not reproduced (max deviation " + io::fmt(v.max_deviation) + ")");
  std::printf("round_trip ok\n");
  return 0;
}

CMat parse_tau(const json& t) {
  if (t.is_array() && t.size() == 2 && t[0].is_number()) {
    CMat m(1, 1);
    m(0, 0) = io::parse_complex(t, "tau");
    return m;
  }
  if (!t.is_array() || t.empty()) throw InputError("tau: expected [re, im] or a square matrix of pairs");
  const auto g = static_cast<Eigen::Index>(t.size());
  CMat m(g, g);
  for (Eigen::Index r = 0; r < g; ++r) {
    const json& row = t[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != g)
      throw InputError("tau[" + std::to_string(r) + "]: row length differs from the genus");
    for (Eigen::Index c = 0; c < g; ++c)
      m(r, c) = io::parse_complex(row[c], "tau[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return m;
}

RVec parse_real_vector(const json& j, Eigen::Index g, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != g)
    throw InputError(where + ": expected " + std::to_string(g) + " numbers");
  RVec v(g);
  for (Eigen::Index i = 0; i < g; ++i) {
    if (!j[i].is_number()) throw InputError(where + "[" + std::to_string(i) + "]: expected a number");
    v(i) = j[i].get<double>();
  }
  return v;
}

void emit(const RunConfig& cfg, const std::string& name, const json& out) {
  const std::string text = io::dump(out);
  if (cfg.output_dir != ".") {
    prepare_output(cfg);
    io::write_file(out_path(cfg, name), text);
  }
  std::fwrite(text.data(), 1, text.size(), stdout);
}

// {"tau": [re, im] or [[[re, im], ...], ...], "characteristic": {"alpha": [...], "beta": [...]},
//  "z": [re, im] or [[re, im], ...]}
int run_theta(const RunConfig& cfg) {
  const json j = require_instance_file(cfg);
  if (!j.is_object() || !j.contains("tau")) throw InputError("tau: missing field");
  const CMat tau = parse_tau(j["tau"]);
  const ThetaContext ctx = ThetaContext::make(tau);
  const Eigen::Index g = tau.rows();
  Characteristic ch = Characteristic::zero(static_cast<int>(g));
  if (j.contains("characteristic")) {
    const json& c = j["characteristic"];
    if (!c.is_object()) throw InputError("characteristic: expected an object");
    if (c.contains("alpha")) ch.alpha = parse_real_vector(c["alpha"], g, "characteristic.alpha");
    if (c.contains("beta")) ch.beta = parse_real_vector(c["beta"], g, "characteristic.beta");
  }
  if (!j.contains("z")) throw InputError("z: missing field");
  CVec z(g);
  if (g == 1 && j["z"].is_array() && j["z"].size() == 2 && j["z"][0].is_number()) {
    z(0) = io::parse_complex(j["z"], "z");
  } else {
    if (!j["z"].is_array() || static_cast<Eigen::Index>(j["z"].size()) != g)
      throw InputError("z: expected " + std::to_string(g) + " complex pairs");
    for (Eigen::Index i = 0; i < g; ++i) z(i) = io::parse_complex(j["z"][i], "z[" + std::to_string(i) + "]");
  }
  json out;
  out["genus"] = g;
  out["value"] = io::complex_json(theta(ctx, ch, z));
  emit(cfg, "theta.json", out);
  return 0;
}

// {"surface": {...}, "p": [re, im], "q": [re, im], optional "anchors", "x", "spectators"}
int run_kernel_probe(const RunConfig& cfg) {
  const json j = require_instance_file(cfg);
  if (!j.is_object() || !j.contains("surface")) throw InputError("surface: missing field");
  const Surface s = io::parse_surface(j["surface"]);
  if (!j.contains("p") || !j.contains("q")) throw InputError("p, q: missing field");
  const cplx p = io::parse_complex(j["p"], "p"), q = io::parse_complex(j["q"], "q");
  const BipolarKernel k(s);
  json out;
  out["normalization_constant"] = k.normalization_constant();
  out["green"] = k.green(p, q);
  out["green_smooth"] = k.green_smooth(p, q);
  out["omega"] = io::complex_json(k.omega(p, q));
  out["omega_regular_part"] = io::complex_json(k.omega_regular_part(p));
  if (j.contains("anchors") && j.contains("x")) {
    std::vector<cplx> an;
    for (std::size_t i = 0; i < j["anchors"].size(); ++i)
      an.push_back(io::parse_complex(j["anchors"][i], "anchors[" + std::to_string(i) + "]"));
    const cplx x = io::parse_complex(j["x"], "x");
    std::vector<cplx> spec;
    if (j.contains("spectators"))
      for (std::size_t i = 0; i < j["spectators"].size(); ++i)
        spec.push_back(io::parse_complex(j["spectators"][i], "spectators[" + std::to_string(i) + "]"));
    std::optional<CauchyKernel> ck;
    if (s.is_torus() && spec.empty()) {
      std::mt19937_64 rng(cfg.seed.value_or(0));
      const std::vector<cplx> avoid = {x, q};
      ck = CauchyKernel::with_random_spectators(s, an, avoid, rng);
    } else {
      ck.emplace(s, an, spec);
    }
    json c;
    c["value"] = io::complex_json((*ck)(x, q));
    c["dq"] = io::complex_json(ck->dq(x, q));
    c["spectators"] = json::array();
    for (cplx b : ck->spectators()) c["spectators"].push_back(io::complex_json(b));
    out["cauchy"] = c;
  }
  emit(cfg, "kernel_probe.json", out);
  return 0;
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--instance", cfg.instance_path, "instance JSON file");
  sub->add_option("--out", cfg.output_dir, "output directory");
  sub->add_option("--seed", cfg.seed, "random seed (overrides the instance)");
  sub->add_option("--tol.capacity", cfg.tol_capacity, "descent stopping tolerance");
  sub->add_option("--tol.boutroux", cfg.tol_boutroux, "Boutroux residual tolerance");
  sub->add_option("--tol.sproperty", cfg.tol_sproperty, "S-property tolerance");
  sub->add_option("--route", cfg.route, "shape, boutroux or both")->check(CLI::IsMember({"shape", "boutroux", "both"}));
  sub->add_option("--mesh", cfg.mesh, "panel size");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimal-capacity continua on the sphere and on tori"};
  app.require_subcommand(1);
  RunConfig cfg;
  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&);
  };
  const Entry entries[] = {
      {"solve", "minimise capacity; writes solution.json, measure.csv, trajectories.csv, figure.svg", run_solve},
      {"capacity", "equilibrium measure of the instance continuum", run_capacity},
      {"boutroux", "solve the Boutroux conditions", run_boutroux},
      {"trace", "critical graph, dissection and foliation of a Boutroux differential", run_trace},
      {"verify", "recompute the certificates of a solution file", run_verify},
      {"theta", "evaluate a Riemann theta function", run_theta},
      {"kernel-probe", "evaluate the bipolar Green function and Cauchy kernel", run_kernel_probe},
  };
  int (*fn)(const RunConfig&) = nullptr;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, cfg);
    if (std::string(e.name) == "solve") {
      sub->add_option("--jip-trials", cfg.jip_trials, "random deformations for the interception check");
      sub->add_option("--uniqueness-trials", cfg.uniqueness_trials, "multi-start uniqueness probe");
    }
    if (std::string(e.name) == "solve" || std::string(e.name) == "trace")
      sub->add_option("--foliation-lines", cfg.foliation_lines, "sampled ascent lines per side");
    if (std::string(e.name) == "verify") sub->add_option("--solution", cfg.solution_path, "solution JSON file");
    sub->callback([&cfg, &fn, e] {
      cfg.subcommand = e.name;
      fn = e.fn;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    return fn(cfg);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    json diag;
    diag["error"] = "numerical";
    diag["subcommand"] = cfg.subcommand;
    diag["message"] = e.what();
    diag["seed"] = g_seed ? json(*g_seed) : json(nullptr);
    const std::string text = io::dump(diag);
    std::cerr << text;
    try {
      prepare_output(cfg);
      io::write_file(out_path(cfg, "diagnostic.json"), text);
    } catch (const InputError&) {
    }
    return 2;
  }
}
