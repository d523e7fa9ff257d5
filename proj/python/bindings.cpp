#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "apsing/error.hpp"
#include "apsing/run.hpp"
#include "apsing/sector.hpp"
#include "apsing/singularity.hpp"
#include "apsing/spectral.hpp"

namespace py = pybind11;
using namespace apsing;

namespace {

GridFunction grid(const DiscreteLaplacian& L, const Eigen::VectorXd& values) {
  return GridFunction(L.domain(), values);
}

py::dict preimages(const PreimageCertificate& c) {
  py::dict d;
  std::vector<Eigen::VectorXd> sols;
  for (const GridFunction& u : c.solutions) sols.push_back(u.values());
  d["y"] = c.y.values();
  d["solutions"] = sols;
  d["residuals"] = c.residuals;
  d["t"] = c.t;
  d["distances"] = c.distances;
  d["separation"] = c.separation;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral functionals, fibers and singularity certificates for -Lap u - f(u)";

  // Messages carry the kind and the failing stage: "kind [stage]: detail".
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::enum_<Boundary>(m, "Boundary")
      .value("Dirichlet", Boundary::Dirichlet)
      .value("Neumann", Boundary::Neumann)
      .value("Periodic", Boundary::Periodic);

  py::class_<Domain>(m, "Domain")
      .def_static("interval", &Domain::interval, py::arg("a"), py::arg("b"), py::arg("bc"), py::arg("n"))
      .def_static("rectangle", &Domain::rectangle, py::arg("ax"), py::arg("bx"), py::arg("ay"),
                  py::arg("by"), py::arg("bc"), py::arg("n"))
      .def_readonly("dim", &Domain::dim)
      .def_readonly("n", &Domain::n)
      .def_property_readonly("nodes", &Domain::nodes)
      .def_property_readonly("hx", &Domain::hx)
      .def_property_readonly("weight", &Domain::weight);

  py::class_<DiscreteLaplacian>(m, "Laplacian")
      .def(py::init([](const Domain& d) { return build_laplacian(d); }))
      .def_property_readonly("domain", &DiscreteLaplacian::domain)
      .def("apply", [](const DiscreteLaplacian& L, const Eigen::VectorXd& u) { return L.apply(u); })
      .def("free_eigenvalues", [](const DiscreteLaplacian& L, int count) {
        std::vector<double> mu;
        for (const FreeEigenpair& p : free_eigenpairs(L, count).pairs) mu.push_back(p.mu);
        return mu;
      });

  py::class_<Nonlinearity>(m, "Nonlinearity")
      .def(py::init([](const std::string& family, const std::map<std::string, double>& p) {
             return construct_family(family, p);
           }),
           py::arg("family"), py::arg("parameters"))
      .def("__call__", [](const Nonlinearity& f, double x) {
        const Derivatives d = f(x);
        return py::make_tuple(d.f, d.d1, d.d2, d.d3);
      })
      .def_property_readonly("family", &Nonlinearity::family)
      .def_property_readonly("parameters", &Nonlinearity::parameters);

  m.def("functionals", [](const DiscreteLaplacian& L, const Eigen::VectorXd& u, const Nonlinearity& f,
                          int k) {
    const FunctionalValues v = functionals(L, grid(L, u), f, k, true);
    py::dict d;
    d["lambda"] = v.lambda;
    d["delta"] = v.delta;
    d["tau"] = v.tau ? py::cast(*v.tau) : py::none();
    d["phi"] = v.pair.phi.values();
    d["grad_lambda"] = v.grad_lambda.values();
    d["grad_delta"] = v.grad_delta->values();
    return d;
  }, py::arg("L"), py::arg("u"), py::arg("f"), py::arg("k") = 1);

  m.def("apply_F", [](const DiscreteLaplacian& L, const Eigen::VectorXd& u, const Nonlinearity& f) {
    return apply_F(grid(L, u), f, L).values();
  });

  m.def("two_valued_lambda", [](const DiscreteLaplacian& L, double left, double right, double theta) {
    return two_valued_lambda(L, left, right, default_apex(L.domain()), theta);
  });
  m.def("balance_theta", [](const DiscreteLaplacian& L, double left, double right) {
    const BalanceResult b = balance_theta(L, left, right, default_apex(L.domain()));
    return py::make_tuple(b.theta, b.lambda);
  });

  m.def("trace_fiber", [](const DiscreteLaplacian& L, const Nonlinearity& f, double t_lo, double t_hi) {
    const FiberTrace tr = trace_fiber(L, f, GridFunction(L.domain()), t_lo, t_hi);
    std::vector<double> t, h, lam;
    for (const FiberPoint& p : tr.points) {
      t.push_back(p.t);
      h.push_back(p.h);
      lam.push_back(p.lambda1);
    }
    py::dict d;
    d["t"] = t;
    d["h"] = h;
    d["lambda1"] = lam;
    return d;
  });

  m.def("four_preimages", [](const DiscreteLaplacian& L, const Nonlinearity& f) {
    const FourPreimageResult r = four_preimage_certificate(L, f);
    py::dict d = preimages(r.certificate);
    d["h_star"] = r.h_star;
    d["h_min"] = r.h_min;
    return d;
  });

  m.def("cusp", [](const DiscreteLaplacian& L, const Nonlinearity& f, const std::string& recipe) {
    CuspOptions o;
    o.recipe = recipe;
    const CuspResult r = cusp_certificate(L, f, o);
    py::dict d;
    d["kind"] = std::string(to_string(r.certificate.kind));
    d["lambda"] = r.certificate.lambda;
    d["delta"] = r.certificate.delta;
    d["tau"] = r.certificate.tau ? py::cast(*r.certificate.tau) : py::none();
    d["independence"] = r.certificate.independence;
    std::vector<std::pair<double, int>> census;
    for (const CensusSample& s : r.certificate.census) census.emplace_back(s.s, s.count);
    d["census"] = census;
    d["u"] = r.mollified.u.values();
    return d;
  }, py::arg("L"), py::arg("f"), py::arg("recipe") = "hk");

  m.def("run", [](const std::string& pipeline, const std::string& config, std::optional<std::string> out,
                  std::optional<std::uint64_t> seed) {
    std::ostringstream log;
    const int code = run_file(pipeline, config, out, seed, log);
    return py::make_tuple(code, log.str());
  }, py::arg("pipeline"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none());

  m.attr("__version__") = version();
}
