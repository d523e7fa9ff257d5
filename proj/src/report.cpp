#include "apsing/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "apsing/error.hpp"
#include "apsing/sector.hpp"

namespace apsing {

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "report", "cannot write " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "report", "write failed for " + path);
}

}  // namespace

std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

Json to_json(const Domain& d) {
  Json j;
  j["kind"] = d.dim == 1 ? "interval" : "rectangle";
  if (d.dim == 1) {
    j["a"] = d.ax;
    j["b"] = d.bx;
  } else {
    j["ax"] = d.ax;
    j["bx"] = d.bx;
    j["ay"] = d.ay;
    j["by"] = d.by;
  }
  j["bc"] = to_string(d.bc);
  j["n"] = d.n;
  j["nodes"] = d.nodes();
  j["hx"] = d.hx();
  if (d.dim == 2) j["hy"] = d.hy();
  j["weight"] = d.weight();
  return j;
}

Json to_json(const Nonlinearity& f) {
  Json j;
  j["family"] = f.family();
  Json p = Json::object();
  for (const auto& [k, v] : f.parameters()) p[k] = v;
  j["parameters"] = p;
  j["m"] = f.lower_slope();
  j["M"] = f.upper_slope();
  return j;
}

Json to_json(const GridFunction& u) {
  Json a = Json::array();
  for (int i = 0; i < u.size(); ++i) a.push_back(u[i]);
  return a;
}

Json to_json(const ClassifyOptions& o) {
  return Json{{"tol", o.tol}, {"tol_tau", o.tol_tau}, {"tol_ind", o.tol_ind},
              {"roughness_cap", o.roughness_cap}, {"k", o.k}};
}

Json to_json(const PreimageOptions& o) {
  return Json{{"tol", o.tol},
              {"accept", o.accept},
              {"max_iterations", o.max_iterations},
              {"separation", o.separation}};
}

Json to_json(const MollifyResult& m) {
  return Json{{"sigma", m.sigma},
              {"a", m.a},
              {"b", m.b},
              {"lambda", m.lambda},
              {"delta", m.delta},
              {"tau", optional_number(m.tau)},
              {"independence", m.independence},
              {"condition", m.condition},
              {"roughness", m.roughness},
              {"iterations", m.iterations},
              {"used_fallback", m.used_fallback}};
}

Json to_json(const NonfoldCandidate& c) {
  return Json{{"recipe", c.recipe},
              {"k", c.k},
              {"apex", {c.potential.p.x(), c.potential.p.y()}},
              {"theta", c.potential.theta},
              {"left", c.potential.left},
              {"right", c.potential.right},
              {"fraction", c.potential.fraction},
              {"lambda", c.lambda},
              {"delta", c.delta},
              {"tau", optional_number(c.tau)},
              {"independence", c.independence},
              {"x_star", optional_number(c.x_star)}};
}

Json to_json(const SingularityCertificate& c) {
  Json census = Json::array();
  for (const CensusSample& s : c.census) {
    census.push_back(Json{{"s", s.s},
                          {"h_star", s.h_star},
                          {"count", s.count},
                          {"fiber_crossings", s.fiber_crossings},
                          {"t", s.t}});
  }
  return Json{{"kind", to_string(c.kind)},
              {"k", c.k},
              {"lambda", c.lambda},
              {"delta", c.delta},
              {"tau", optional_number(c.tau)},
              {"independence", c.independence},
              {"roughness", c.roughness},
              {"tolerances", to_json(c.tolerances)},
              {"census_radius", c.census_radius},
              {"census_scale", c.census_scale},
              {"census", census},
              {"u", to_json(c.u)}};
}

Json to_json(const PreimageCertificate& c) {
  Json sols = Json::array();
  for (size_t i = 0; i < c.solutions.size(); ++i) {
    sols.push_back(Json{{"t", c.t[i]},
                        {"residual", c.residuals[i]},
                        {"z_residual", c.z_residual[i]},
                        {"u", to_json(c.solutions[i])}});
  }
  Json dist = Json::array();
  for (int i = 0; i < c.distances.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < c.distances.cols(); ++j) row.push_back(c.distances(i, j));
    dist.push_back(row);
  }
  return Json{{"count", c.solutions.size()},
              {"separation", c.separation},
              {"starts", c.starts},
              {"converged", c.converged},
              {"dropped", c.dropped},
              {"outside", c.outside},
              {"distances", dist},
              {"y", to_json(c.y)},
              {"solutions", sols}};
}

Json to_json(const CollapseReport& r) {
  return Json{{"window", r.window},
              {"samples", r.samples},
              {"h_variation", r.h_variation},
              {"lambda_variation", r.lambda_variation},
              {"tol", r.tol},
              {"collapsing", r.collapsing}};
}

PreimageCertificate preimage_certificate_from_json(const Json& j, const Domain& d) {
  const auto vec = [&](const Json& a) {
    if (!a.is_array() || static_cast<int>(a.size()) != d.nodes()) {
      throw Error(ErrorKind::DomainMismatch, "certificate", "vector length does not match the grid");
    }
    Eigen::VectorXd v(d.nodes());
    for (int i = 0; i < d.nodes(); ++i) v[i] = a[i].get<double>();
    return GridFunction(d, v);
  };
  PreimageCertificate c;
  c.y = vec(j.at("y"));
  c.separation = j.at("separation").get<double>();
  for (const Json& s : j.at("solutions")) {
    c.solutions.push_back(vec(s.at("u")));
    c.t.push_back(s.at("t").get<double>());
  }
  return c;
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

void emit_trace(const FiberTrace& trace, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "t,h,lambda1,newton_residual,w_norm\n";
  for (const FiberPoint& p : trace.points) {
    out << format_double(p.t) << ',' << format_double(p.h) << ',' << format_double(p.lambda1)
        << ',' << format_double(p.newton_residual) << ',' << format_double(norm(p.w)) << '\n';
  }
  finish(out, path);
}

void emit_theta_sweep(const DiscreteLaplacian& L, double left_level, double right_level,
                      const Eigen::Vector2d& p, int samples, const std::string& path) {
  if (samples < 2) throw Error(ErrorKind::Precondition, "emit_theta_sweep", "needs 2 samples");
  std::ofstream out = open_out(path);
  out << "theta,lambda1\n";
  for (int i = 0; i < samples; ++i) {
    const double th = i + 1 == samples ? kTwoPi : kTwoPi * i / (samples - 1);
    out << format_double(th) << ','
        << format_double(two_valued_lambda(L, left_level, right_level, p, th)) << '\n';
  }
  finish(out, path);
}

void emit_nonlinearity(const Nonlinearity& f, const ScanWindow& window, int samples,
                       const std::string& path) {
  std::ofstream out = open_out(path);
  out << "x,f,df,d2f,d3f\n";
  for (int i = 0; i < samples; ++i) {
    const double x = window.lo + (window.hi - window.lo) * i / (samples - 1);
    const Derivatives d = f(x);
    out << format_double(x) << ',' << format_double(d.f) << ',' << format_double(d.d1) << ','
        << format_double(d.d2) << ',' << format_double(d.d3) << '\n';
  }
  finish(out, path);
}

}  // namespace apsing
