#include "chebotarev/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace chebotarev::io {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw InputError(where + "." + key + ": missing field");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw InputError(where + ": expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw InputError(where + ": not finite");
  return x;
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw InputError(where + ": expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw InputError(where + ": integer out of range");
  return static_cast<int>(v);
}

const json& array(const json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected a list");
  return j;
}

std::string at(const std::string& where, std::size_t i) { return where + "[" + std::to_string(i) + "]"; }

// InputErrors from the library get the field path prefixed.
template <class F>
auto with_path(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const InputError& e) {
    throw InputError(where + ": " + e.what());
  }
}

}  // namespace

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

cplx parse_complex(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw InputError(where + ": expected a [re, im] pair");
  return {number(j[0], where + "[0]"), number(j[1], where + "[1]")};
}

json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(source + ": " + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

namespace {

bool scalar(const json& j) { return !j.is_array() && !j.is_object(); }

void emit(const json& j, int indent, std::string& out) {
  const std::string pad(indent + 2, ' ');
  if (j.is_number_float()) {
    const double x = j.get<double>();
    out += std::isfinite(x) ? fmt(x) : "null";
  } else if (j.is_array()) {
    if (j.empty()) {
      out += "[]";
    } else if (std::all_of(j.begin(), j.end(), scalar)) {
      out += "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ", ";
        emit(j[i], indent, out);
      }
      out += "]";
    } else {
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out += pad;
        emit(j[i], indent + 2, out);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += std::string(indent, ' ') + "]";
    }
  } else if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    std::size_t i = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++i) {
      out += pad + json(it.key()).dump() + ": ";
      emit(it.value(), indent + 2, out);
      out += i + 1 < j.size() ? ",\n" : "\n";
    }
    out += std::string(indent, ' ') + "}";
  } else {
    out += j.dump();
  }
}

}  // namespace

std::string dump(const json& j) {
  std::string out;
  emit(j, 0, out);
  return out + "\n";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(path + ": cannot write");
  out << text;
  if (!out) throw InputError(path + ": write failed");
}

// ---- surface, continuum, instance ----

Surface parse_surface(const json& j, const std::string& where) {
  const json& kind = require(j, "kind", where);
  if (!kind.is_string()) throw InputError(where + ".kind: expected \"sphere\" or \"torus\"");
  const cplx c = j.contains("chart_coeff") ? parse_complex(j["chart_coeff"], where + ".chart_coeff") : cplx(1.0);
  if (c == 0.0) throw InputError(where + ".chart_coeff: must be nonzero");
  const std::string k = kind.get<std::string>();
  if (k == "sphere") return Surface::sphere(c);
  if (k == "torus") {
    const cplx tau = parse_complex(require(j, "tau", where), where + ".tau");
    const cplx inf = j.contains("infinity") ? parse_complex(j["infinity"], where + ".infinity") : cplx{};
    return with_path(where + ".tau", [&] { return Surface::torus(tau, inf, c); });
  }
  throw InputError(where + ".kind: expected \"sphere\" or \"torus\"");
}

json surface_json(const Surface& s) {
  json j;
  j["kind"] = s.is_torus() ? "torus" : "sphere";
  if (s.is_torus()) {
    j["tau"] = complex_json(s.tau());
    j["infinity"] = complex_json(s.infinity_coord());
  }
  j["chart_coeff"] = complex_json(s.chart_coeff());
  return j;
}

PolyContinuum parse_continuum(const json& j, const Surface& s, const AnchorSet& anchors, const std::string& where) {
  PolyContinuum K;
  const json& nodes = array(require(j, "nodes", where), where + ".nodes");
  std::vector<int> flags;
  if (j.contains("anchor_of")) {
    const json& af = array(j["anchor_of"], where + ".anchor_of");
    if (af.size() != nodes.size()) throw InputError(where + ".anchor_of: length differs from nodes");
    for (std::size_t i = 0; i < af.size(); ++i) {
      const int a = integer(af[i], at(where + ".anchor_of", i));
      if (a < -1 || a >= static_cast<int>(anchors.size()))
        throw InputError(at(where + ".anchor_of", i) + ": anchor index out of range");
      flags.push_back(a);
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const cplx z = parse_complex(nodes[i], at(where + ".nodes", i));
    int a = flags.empty() ? -1 : flags[i];
    if (flags.empty())
      for (std::size_t e = 0; e < anchors.size(); ++e)
        if (s.distance(z, anchors[e]) <= 1e-12) a = static_cast<int>(e);
    K.add_node(z, a);
  }
  const json& edges = array(require(j, "edges", where), where + ".edges");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string w = at(where + ".edges", e);
    int a, b;
    Lift shift;
    if (edges[e].is_array()) {
      if (edges[e].size() != 2) throw InputError(w + ": expected [a, b] or {a, b, m, n}");
      a = integer(edges[e][0], w + "[0]");
      b = integer(edges[e][1], w + "[1]");
    } else {
      a = integer(require(edges[e], "a", w), w + ".a");
      b = integer(require(edges[e], "b", w), w + ".b");
      if (edges[e].contains("m")) shift.m = integer(edges[e]["m"], w + ".m");
      if (edges[e].contains("n")) shift.n = integer(edges[e]["n"], w + ".n");
    }
    if (a < 0 || b < 0 || a >= (int)K.nodes.size() || b >= (int)K.nodes.size())
      throw InputError(w + ": node index out of range");
    if (!s.is_torus() && (shift.m != 0 || shift.n != 0)) throw InputError(w + ": lattice shift on the sphere");
    K.add_edge(a, b, shift);
  }
  with_path(where, [&] {
    K.validate(s, anchors);
    return 0;
  });
  return K;
}

json continuum_json(const PolyContinuum& K) {
  json j;
  j["nodes"] = json::array();
  for (cplx z : K.nodes) j["nodes"].push_back(complex_json(z));
  j["anchor_of"] = K.anchor_of;
  j["edges"] = json::array();
  for (const auto& e : K.edges) j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"m", e.shift.m}, {"n", e.shift.n}});
  return j;
}

Route parse_route(const std::string& name) {
  if (name == "shape") return Route::Shape;
  if (name == "boutroux") return Route::Boutroux;
  if (name == "both") return Route::Both;
  throw InputError("route: expected shape, boutroux or both");
}

std::string route_name(Route r) {
  switch (r) {
    case Route::Shape: return "shape";
    case Route::Boutroux: return "boutroux";
    case Route::Both: break;
  }
  return "both";
}

ProblemInstance parse_instance(const json& j, bool check_pattern) {
  if (!j.is_object()) throw InputError("instance: expected an object");
  ProblemInstance inst;
  inst.surface = parse_surface(require(j, "surface", "instance"), "surface");
  const json& an = array(require(j, "anchors", "instance"), "anchors");
  std::vector<cplx> pts;
  for (std::size_t i = 0; i < an.size(); ++i) pts.push_back(parse_complex(an[i], at("anchors", i)));
  inst.anchors = with_path("anchors", [&] { return AnchorSet(inst.surface, pts); });
  const int N = static_cast<int>(pts.size());

  const json empty = json::array();
  const json& pat = !check_pattern && !j.contains("pattern") ? empty : array(require(j, "pattern", "instance"), "pattern");
  std::vector<HomotopyLabel> labels;
  for (std::size_t p = 0; p < pat.size(); ++p) {
    const std::string w = at("pattern", p);
    HomotopyLabel l;
    l.i = integer(require(pat[p], "i", w), w + ".i");
    l.j = integer(require(pat[p], "j", w), w + ".j");
    if (pat[p].contains("m")) l.m = integer(pat[p]["m"], w + ".m");
    if (pat[p].contains("n")) l.n = integer(pat[p]["n"], w + ".n");
    if (l.i < 0 || l.i >= N) throw InputError(w + ".i: anchor index out of range");
    if (l.j < 0 || l.j >= N) throw InputError(w + ".j: anchor index out of range");
    labels.push_back(l);
  }
  inst.pattern = with_path("pattern", [&] { return ConnectivityPattern(N, labels); });

  if (j.contains("mesh") && !j["mesh"].is_null()) {
    inst.mesh = number(j["mesh"], "mesh");
    if (!(inst.mesh > 0)) throw InputError("mesh: must be positive");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned())
      throw InputError("seed: expected a non-negative integer");
    inst.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("route")) {
    if (!j["route"].is_string()) throw InputError("route: expected a string");
    inst.route = parse_route(j["route"].get<std::string>());
  }
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    if (!t.is_object()) throw InputError("tolerances: expected an object");
    auto tol = [&](const char* key, double& dst) {
      if (!t.contains(key)) return;
      dst = number(t[key], std::string("tolerances.") + key);
      if (!(dst > 0)) throw InputError(std::string("tolerances.") + key + ": must be positive");
    };
    tol("capacity", inst.tol.capacity);
    tol("boutroux", inst.tol.boutroux);
    tol("sproperty", inst.tol.sproperty);
    tol("schiffer", inst.tol.schiffer);
  }
  if (j.contains("initial_continuum") && !j["initial_continuum"].is_null())
    inst.initial = parse_continuum(j["initial_continuum"], inst.surface, inst.anchors, "initial_continuum");
  if (check_pattern)
    with_path("pattern", [&] {
      inst.validate();
      return 0;
    });
  return inst;
}

json instance_json(const ProblemInstance& inst) {
  json j;
  j["surface"] = surface_json(inst.surface);
  j["anchors"] = json::array();
  for (cplx z : inst.anchors.points()) j["anchors"].push_back(complex_json(z));
  j["pattern"] = json::array();
  for (const auto& l : inst.pattern.labels()) j["pattern"].push_back({{"i", l.i}, {"j", l.j}, {"m", l.m}, {"n", l.n}});
  j["mesh"] = inst.panel_size();
  j["seed"] = inst.seed;
  j["route"] = route_name(inst.route);
  j["tolerances"] = {{"capacity", inst.tol.capacity},
                     {"boutroux", inst.tol.boutroux},
                     {"sproperty", inst.tol.sproperty},
                     {"schiffer", inst.tol.schiffer}};
  if (inst.initial) j["initial_continuum"] = continuum_json(*inst.initial);
  return j;
}

// ---- certificates and solutions ----

json certificates_json(const Certificates& c) {
  json j;
  j["s_property"] = c.s_property;
  j["schiffer"] = c.schiffer;
  j["boutroux"] = c.boutroux ? json(*c.boutroux) : json(nullptr);
  j["jip"] = {{"trials", c.jip_trials}, {"held", c.jip_held}, {"ordered", c.jip_ordered}};
  return j;
}

Certificates parse_certificates(const json& j) {
  Certificates c;
  c.s_property = number(require(j, "s_property", "certificates"), "certificates.s_property");
  c.schiffer = number(require(j, "schiffer", "certificates"), "certificates.schiffer");
  if (j.contains("boutroux") && !j["boutroux"].is_null())
    c.boutroux = number(j["boutroux"], "certificates.boutroux");
  if (j.contains("jip")) {
    const json& p = j["jip"];
    c.jip_trials = integer(require(p, "trials", "certificates.jip"), "certificates.jip.trials");
    c.jip_held = integer(require(p, "held", "certificates.jip"), "certificates.jip.held");
    c.jip_ordered = integer(require(p, "ordered", "certificates.jip"), "certificates.jip.ordered");
  }
  return c;
}

json quaddiff_json(const QuadDiff& q) {
  json j;
  j["zeros"] = json::array();
  for (const auto& z : q.zeros()) j["zeros"].push_back({{"pos", complex_json(z.pos)}, {"mult", z.mult}});
  j["scale"] = complex_json(q.scale());
  return j;
}

std::vector<QuadZero> parse_zeros(const json& j, const std::string& where) {
  std::vector<QuadZero> zs;
  const json& a = array(j, where);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string w = at(where, i);
    QuadZero z;
    z.pos = parse_complex(require(a[i], "pos", w), w + ".pos");
    if (a[i].contains("mult")) z.mult = integer(a[i]["mult"], w + ".mult");
    if (z.mult < 1) throw InputError(w + ".mult: must be positive");
    zs.push_back(z);
  }
  return zs;
}

json solution_json(const ProblemInstance& inst, const Solution& sol, const SolutionExtras& extra) {
  json j;
  j["format"] = kSolutionFormat;
  j["seed"] = sol.seed;
  j["route"] = sol.route;
  j["instance"] = instance_json(inst);
  j["capacity"] = sol.capacity.capacity;
  j["energy"] = sol.capacity.energy;
  j["robin_constant"] = sol.capacity.robin_constant;
  j["kkt_residual"] = sol.capacity.kkt_residual;
  j["panels"] = sol.capacity.measure.disc.size();
  j["mesh"] = inst.panel_size();
  j["minimizer"] = continuum_json(sol.minimizer);
  j["certificates"] = certificates_json(sol.certificates);
  j["descent"] = {{"sweeps", sol.sweeps}, {"final_step", sol.final_step}, {"history", sol.history}};
  if (sol.quaddiff) j["quaddiff"] = quaddiff_json(*sol.quaddiff);
  if (extra.comparison) {
    const auto& c = *extra.comparison;
    j["comparison"] = {{"shape_capacity", c.shape.capacity.capacity},
                       {"boutroux_capacity", c.boutroux.capacity.capacity},
                       {"capacity_gap", c.capacity_gap},
                       {"hausdorff", c.hausdorff}};
  }
  if (extra.uniqueness) {
    const auto& u = *extra.uniqueness;
    j["uniqueness"] = {{"capacities", u.capacities},
                       {"capacity_spread", u.capacity_spread},
                       {"hausdorff_spread", u.hausdorff_spread},
                       {"supports_uniqueness", u.supports_uniqueness}};
  }
  json notes = json::array();
  if (!inst.surface.is_torus() && inst.anchors.size() >= 3)
    notes.push_back("sphere pattern records the anchor partition only");
  j["notes"] = notes;
  j["warnings"] = sol.warnings;
  return j;
}

StoredSolution parse_solution(const json& j) {
  if (!j.is_object()) throw InputError("solution: expected an object");
  const json& f = require(j, "format", "solution");
  if (!f.is_string() || f.get<std::string>() != kSolutionFormat)
    throw InputError(std::string("solution.format: expected ") + kSolutionFormat);
  StoredSolution st;
  st.instance = parse_instance(require(j, "instance", "solution"));
  st.minimizer = parse_continuum(require(j, "minimizer", "solution"), st.instance.surface, st.instance.anchors,
                                 "minimizer");
  st.capacity = number(require(j, "capacity", "solution"), "capacity");
  st.certificates = parse_certificates(require(j, "certificates", "solution"));
  if (j.contains("quaddiff")) st.zeros = parse_zeros(require(j["quaddiff"], "zeros", "quaddiff"), "quaddiff.zeros");
  return st;
}

Verification verify(const StoredSolution& st) {
  const ProblemInstance& inst = st.instance;
  Verification v;
  const CapacityResult r = continuum_capacity(inst.surface, st.minimizer, inst.panel_size());
  v.capacity = r.capacity;
  v.certificates = certify(inst, st.minimizer, r, st.certificates.jip_trials);
  if (st.zeros)
    v.certificates.boutroux = boutroux_residual(QuadDiff(inst.surface, inst.anchors.points(), *st.zeros)).norm();
  const Certificates& a = st.certificates;
  const Certificates& b = v.certificates;
  double d = std::max({std::abs(v.capacity - st.capacity), std::abs(a.s_property - b.s_property),
                       std::abs(a.schiffer - b.schiffer)});
  if (a.boutroux.has_value() != b.boutroux.has_value())
    d = kInf;
  else if (a.boutroux)
    d = std::max(d, std::abs(*a.boutroux - *b.boutroux));
  if (a.jip_held != b.jip_held || a.jip_ordered != b.jip_ordered) d = kInf;
  v.max_deviation = d;
  return v;
}

json verification_json(const StoredSolution& st, const Verification& v) {
  json j;
  j["seed"] = st.instance.seed;
  j["capacity"] = v.capacity;
  j["certificates"] = certificates_json(v.certificates);
  j["stored"] = {{"capacity", st.capacity}, {"certificates", certificates_json(st.certificates)}};
  j["max_deviation"] = std::isfinite(v.max_deviation) ? json(v.max_deviation) : json(nullptr);
  j["round_trip"] = v.max_deviation <= 1e-12;
  const Tolerances& t = st.instance.tol;
  j["within_tolerance"] = {{"s_property", v.certificates.s_property <= t.sproperty},
                           {"schiffer", v.certificates.schiffer <= t.schiffer},
                           {"boutroux", v.certificates.boutroux ? json(*v.certificates.boutroux <= t.boutroux)
                                                               : json(nullptr)}};
  return j;
}

// ---- CSV ----

std::string measure_csv(const CapacityResult& r) {
  std::string out = "panel,edge,a_re,a_im,b_re,b_im,length,weight,density\n";
  const auto& P = r.measure.disc.panels;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double w = r.measure.weights[i];
    out += std::to_string(i) + "," + std::to_string(P[i].edge) + "," + fmt(P[i].a.real()) + "," +
           fmt(P[i].a.imag()) + "," + fmt(P[i].b.real()) + "," + fmt(P[i].b.imag()) + "," + fmt(P[i].length) +
           "," + fmt(w) + "," + fmt(w / P[i].length) + "\n";
  }
  return out;
}

std::string trajectories_csv(const std::vector<LabelledTrajectory>& ts) {
  std::string out = "trajectory,kind,origin,end,stop,point,re,im\n";
  for (std::size_t t = 0; t < ts.size(); ++t) {
    const auto& tr = ts[t].path;
    const std::string head = std::to_string(t) + "," + ts[t].kind + "," + std::to_string(tr.origin) + "," +
                             std::to_string(tr.end) + "," + tr.stop + ",";
    for (std::size_t i = 0; i < tr.points.size(); ++i)
      out += head + std::to_string(i) + "," + fmt(tr.points[i].real()) + "," + fmt(tr.points[i].imag()) + "\n";
  }
  return out;
}

std::vector<Trajectory> sample_foliation(const BipolarKernel& k, const CapacityResult& r, int lines) {
  std::vector<Trajectory> out;
  const auto& P = r.measure.disc.panels;
  if (P.empty() || lines <= 0) return out;
  const double off = 2.0 * r.measure.disc.h;
  for (int l = 0; l < lines; ++l) {
    const auto& p = P[(2 * l + 1) * P.size() / (2 * lines)];
    const cplx n = -kI * p.tangent;
    for (double side : {1.0, -1.0}) {
      try {
        Trajectory t = ascent_line(k, r, p.mid + side * off * n);
        t.points.insert(t.points.begin(), p.mid);
        out.push_back(std::move(t));
      } catch (const NumericalError&) {
      }
    }
  }
  return out;
}

json critical_graph_json(const CriticalGraph& g) {
  json j;
  j["vertices"] = json::array();
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    const auto& x = g.vertices[v];
    j["vertices"].push_back({{"pos", complex_json(x.pos)},
                             {"order", x.order},
                             {"anchor", x.anchor},
                             {"valence", v < g.valence.size() ? g.valence[v] : 0}});
  }
  std::vector<std::vector<int>> adj(g.vertices.size());
  j["edges"] = json::array();
  for (const auto& e : g.edges) {
    j["edges"].push_back({{"a", e.a},
                          {"b", e.b},
                          {"q_length", e.path.q_length},
                          {"level_defect", e.path.level_defect},
                          {"points", e.path.points.size()}});
    if (e.a >= 0 && e.b >= 0) {
      adj[e.a].push_back(e.b);
      adj[e.b].push_back(e.a);
    }
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  j["adjacency"] = adj;
  j["unmatched"] = g.unmatched;
  return j;
}

// ---- SVG ----

namespace {

struct View {
  double x0, y0, x1, y1;
  void add(cplx z) {
    x0 = std::min(x0, z.real());
    x1 = std::max(x1, z.real());
    y0 = std::min(y0, z.imag());
    y1 = std::max(y1, z.imag());
  }
};

std::string svg_point(cplx z) { return fmt(z.real()) + "," + fmt(-z.imag()); }

// Stroke attributes per layer; widths in pixels of an 800 px canvas, `px` user units each.
std::string stroke(const std::string& layer, double px) {
  struct Style {
    const char* name;
    const char* colour;
    double width;
    const char* dash;
  };
  static const Style styles[] = {{"K", "#000", 2.5, ""},
                                 {"critical", "#c0392b", 1.5, ""},
                                 {"dissection", "#8e44ad", 1.5, "6 3"},
                                 {"foliation", "#2e86c1", 0.7, ""},
                                 {"cell", "#999", 0.7, "3 3"}};
  for (const auto& st : styles)
    if (layer == st.name) {
      std::string a = "class=\"" + layer + "\" fill=\"none\" stroke=\"" + st.colour + "\" stroke-width=\"" +
                      fmt(st.width * px) + "\" stroke-linejoin=\"round\"";
      if (*st.dash) {
        const std::string d(st.dash);
        const auto sp = d.find(' ');
        a += " stroke-dasharray=\"" + fmt(std::stod(d.substr(0, sp)) * px) + " " + fmt(std::stod(d.substr(sp + 1)) * px) +
             "\"";
      }
      return a;
    }
  return "fill=\"none\" stroke=\"#000\"";
}

std::string polyline(const std::vector<cplx>& pts, const std::string& layer, double px) {
  std::string s = "<polyline " + stroke(layer, px) + " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) s += (i ? " " : "") + svg_point(pts[i]);
  return s + "\"/>\n";
}

}  // namespace

std::string render_svg(const Figure& f) {
  const Surface& s = *f.surface;
  View v{kInf, kInf, -kInf, -kInf};
  for (std::size_t e = 0; e < f.K->edges.size(); ++e) {
    v.add(f.K->edge_start(s, e));
    v.add(f.K->edge_end(s, e));
  }
  for (cplx a : f.anchors) v.add(a);
  if (!std::isfinite(v.x0)) v = {-1, -1, 1, 1};
  const double span = std::max({v.x1 - v.x0, v.y1 - v.y0, 1e-3});
  const double pad = 0.5 * span;
  const double cx = 0.5 * (v.x0 + v.x1), cy = 0.5 * (v.y0 + v.y1);
  double half = 0.5 * span + pad;
  if (s.is_torus()) half = std::max(half, 0.55 * std::max(1.0 + std::abs(s.tau().real()), s.tau().imag()));
  const double dot = 0.008 * half;
  const double px = 2 * half / 800;

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" viewBox=\"" + fmt(cx - half) + " " +
         fmt(-cy - half) + " " + fmt(2 * half) + " " + fmt(2 * half) + "\">\n";
  out += "<rect x=\"" + fmt(cx - half) + "\" y=\"" + fmt(-cy - half) + "\" width=\"" + fmt(2 * half) + "\" height=\"" +
         fmt(2 * half) + "\" fill=\"#fff\"/>\n";
  if (s.is_torus()) {
    // cells of the lattice around the view centre
    const cplx c0 = s.reduce(cplx(cx, cy));
    const cplx base = cplx(cx, cy) - c0;
    for (int m = -2; m <= 2; ++m)
      for (int n = -2; n <= 2; ++n) {
        const cplx o = base + s.lattice(m, n) - 0.5 - 0.5 * s.tau();
        out += "<polygon " + stroke("cell", px) + " points=\"" + svg_point(o) + " " + svg_point(o + 1.0) + " " +
               svg_point(o + 1.0 + s.tau()) + " " + svg_point(o + s.tau()) + "\"/>\n";
        const cplx inf = s.nearest_lift(s.infinity_coord(), o + 0.5 + 0.5 * s.tau());
        out += "<circle cx=\"" + fmt(inf.real()) + "\" cy=\"" + fmt(-inf.imag()) + "\" r=\"" + fmt(dot) +
               "\" fill=\"none\" stroke=\"#555\" stroke-width=\"" + fmt(px) + "\"/>\n";
      }
  }
  // torus: every lattice translate of a trajectory that meets the view
  auto draw = [&](const std::vector<cplx>& pts, const std::string& layer) {
    if (pts.empty()) return;
    if (!s.is_torus()) {
      out += polyline(pts, layer, px);
      return;
    }
    View b{kInf, kInf, -kInf, -kInf};
    for (cplx z : pts) b.add(z);
    for (int m = -3; m <= 3; ++m)
      for (int n = -3; n <= 3; ++n) {
        const cplx t = s.lattice(m, n);
        if (b.x1 + t.real() < cx - half || b.x0 + t.real() > cx + half || b.y1 + t.imag() < cy - half ||
            b.y0 + t.imag() > cy + half)
          continue;
        std::vector<cplx> shifted(pts);
        for (cplx& z : shifted) z += t;
        out += polyline(shifted, layer, px);
      }
  };
  for (const auto& t : f.trajectories)
    if (t.kind == "foliation") draw(t.path.points, "foliation");
  for (std::size_t e = 0; e < f.K->edges.size(); ++e)
    out += polyline({f.K->edge_start(s, e), f.K->edge_end(s, e)}, "K", px);
  for (const auto& t : f.trajectories)
    if (t.kind != "foliation") draw(t.path.points, t.kind == "critical" ? "critical" : "dissection");
  for (cplx a : f.anchors)
    out += "<circle cx=\"" + fmt(a.real()) + "\" cy=\"" + fmt(-a.imag()) + "\" r=\"" + fmt(dot) + "\" fill=\"#000\"/>\n";
  for (cplx z : f.marks)
    out += "<circle cx=\"" + fmt(z.real()) + "\" cy=\"" + fmt(-z.imag()) + "\" r=\"" + fmt(dot) +
           "\" fill=\"#c0392b\"/>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace chebotarev::io
