#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "chebotarev/io.hpp"
#include "chebotarev/optimizer.hpp"
#include "chebotarev/theta.hpp"

namespace py = pybind11;
using namespace chebotarev;
using io::json;

namespace {

ProblemInstance instance_from(const std::string& text, std::optional<std::string> route,
                              std::optional<std::uint64_t> seed, std::optional<double> mesh) {
  ProblemInstance inst = io::parse_instance(io::parse_text(text, "instance"));
  if (route) inst.route = io::parse_route(*route);
  if (seed) inst.seed = *seed;
  if (mesh) {
    if (!(*mesh > 0)) throw InputError("mesh: expected a positive number");
    inst.mesh = *mesh;
  }
  return inst;
}

std::string solve(const std::string& text, std::optional<std::string> route, std::optional<std::uint64_t> seed,
                  std::optional<double> mesh, int jip_trials) {
  const ProblemInstance inst = instance_from(text, route, seed, mesh);
  py::gil_scoped_release release;
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
      extra.comparison = std::move(rc);
      break;
    }
  }
  if (jip_trials > 0) {
    const auto b = sol.certificates.boutroux;
    sol.certificates = certify(inst, sol.minimizer, sol.capacity, jip_trials);
    sol.certificates.boutroux = b;
  }
  return io::dump(io::solution_json(inst, sol, extra));
}

std::string verify(const std::string& text) {
  const io::StoredSolution st = io::parse_solution(io::parse_text(text, "solution"));
  py::gil_scoped_release release;
  return io::dump(io::verification_json(st, io::verify(st)));
}

Surface make_surface(std::optional<cplx> tau, cplx infinity) {
  return tau ? Surface::torus(*tau, infinity) : Surface::sphere();
}

PolyContinuum polyline(const std::vector<cplx>& pts, bool closed) {
  if (pts.size() < 2) throw InputError("continuum: need at least two points");
  PolyContinuum K;
  int first = K.add_node(pts[0]), prev = first;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const int id = K.add_node(pts[i]);
    K.add_edge(prev, id);
    prev = id;
  }
  if (closed) K.add_edge(prev, first);
  return K;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  m.def("solve", &solve, py::arg("instance"), py::arg("route") = py::none(), py::arg("seed") = py::none(),
        py::arg("mesh") = py::none(), py::arg("jip_trials") = 0);
  m.def("verify", &verify, py::arg("solution"));

  m.def(
      "polyline_capacity",
      [](const std::vector<cplx>& pts, double h, std::optional<cplx> tau, cplx infinity, bool closed) {
        const Surface s = make_surface(tau, infinity);
        const CapacityResult r = continuum_capacity(s, polyline(pts, closed), h);
        py::dict d;
        d["capacity"] = r.capacity;
        d["robin_constant"] = r.robin_constant;
        d["weights"] = r.measure.weights;
        std::vector<cplx> mids;
        for (const auto& p : r.measure.disc.panels) mids.push_back(p.mid);
        d["midpoints"] = mids;
        return d;
      },
      py::arg("points"), py::arg("h"), py::arg("tau") = py::none(), py::arg("infinity") = cplx(0.0),
      py::arg("closed") = false);

  m.def(
      "green",
      [](cplx p, cplx q, std::optional<cplx> tau, cplx infinity) {
        return BipolarKernel(make_surface(tau, infinity)).green(p, q);
      },
      py::arg("p"), py::arg("q"), py::arg("tau") = py::none(), py::arg("infinity") = cplx(0.0));
  m.def(
      "omega",
      [](cplx p, cplx q, std::optional<cplx> tau, cplx infinity) {
        return BipolarKernel(make_surface(tau, infinity)).omega(p, q);
      },
      py::arg("p"), py::arg("q"), py::arg("tau") = py::none(), py::arg("infinity") = cplx(0.0));

  m.def(
      "theta",
      [](const std::vector<std::vector<cplx>>& tau, const std::vector<cplx>& z, std::vector<int> alpha,
         std::vector<int> beta) {
        const int g = static_cast<int>(tau.size());
        if (g == 0 || static_cast<int>(z.size()) != g) throw InputError("theta: tau and z sizes differ");
        CMat t(g, g);
        for (int i = 0; i < g; ++i) {
          if (static_cast<int>(tau[i].size()) != g) throw InputError("theta: tau must be square");
          for (int j = 0; j < g; ++j) t(i, j) = tau[i][j];
        }
        Characteristic ch = Characteristic::zero(g);
        if (!alpha.empty() || !beta.empty()) {
          if (static_cast<int>(alpha.size()) != g || static_cast<int>(beta.size()) != g)
            throw InputError("theta: characteristic size differs from genus");
          for (int i = 0; i < g; ++i) {
            ch.alpha(i) = alpha[i];
            ch.beta(i) = beta[i];
          }
        }
        CVec zz(g);
        for (int i = 0; i < g; ++i) zz(i) = z[i];
        return theta(ThetaContext::make(t), ch, zz);
      },
      py::arg("tau"), py::arg("z"), py::arg("alpha") = std::vector<int>{}, py::arg("beta") = std::vector<int>{});
  m.def("jacobi_theta1", &jacobi_theta1, py::arg("tau"), py::arg("z"));
}
