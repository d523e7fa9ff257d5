#include "apsing/run.hpp"

#include <Eigen/Core>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include "apsing/error.hpp"
#include "apsing/report.hpp"
#include "apsing/sector.hpp"
#include "apsing/singularity.hpp"
#include "apsing/spectral.hpp"

#ifndef APSING_VERSION
#define APSING_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace apsing {

namespace {

using Clock = std::chrono::steady_clock;

struct Context {
  const RunConfig& config;
  std::ostream& log;
  DiscreteLaplacian L;
  Nonlinearity f;
  fs::path out;
  Json timings = Json::object();

  fs::path trace(const std::string& name) const { return out / "traces" / name; }

  template <class Fn>
  auto timed(const std::string& name, Fn&& fn) -> decltype(fn()) {
    const auto t0 = Clock::now();
    log << "[" << name << "]\n";
    auto result = fn();
    timings[name] = std::chrono::duration<double>(Clock::now() - t0).count();
    return result;
  }
};

Nonlinearity make_family(const RunConfig& c, const DiscreteLaplacian& L) {
  std::map<std::string, double> p = c.parameters;
  if (c.auto_mu_k) p["mu_k"] = free_eigenpairs(L, c.k).pairs[c.k - 1].mu;
  return construct_family(c.family, p, c.window);
}

PreimageOptions newton_options(const RunConfig& c) {
  PreimageOptions o;
  o.accept = c.accept;
  o.separation = c.separation;
  o.threads = c.threads;
  return o;
}

Json tolerances(const RunConfig& c) {
  return Json{{"tol", c.tol},
              {"tol_tau", c.tol_tau},
              {"tol_ind", c.tol_ind},
              {"accept", c.accept},
              {"separation", c.separation},
              {"balance", c.balance_tol},
              {"collapse", c.collapse_tol},
              {"roughness_cap", c.roughness_cap}};
}

Json critical_json(const std::vector<CriticalPoint>& cps) {
  Json a = Json::array();
  for (const CriticalPoint& c : cps) {
    a.push_back(Json{{"t", c.t},
                     {"h", c.point.h},
                     {"delta", c.delta},
                     {"type", c.delta < 0 ? "max" : "min"}});
  }
  return a;
}

Json run_spectrum(Context& cx) {
  const FreeSpectrum s = cx.timed("free_eigenpairs", [&] { return free_eigenpairs(cx.L, cx.config.count); });
  std::ofstream csv = std::ofstream(cx.trace("spectrum.csv"), std::ios::binary);
  csv << "k,mu_k,residual\n";
  Json rows = Json::array();
  const Domain& d = cx.L.domain();
  for (size_t i = 0; i < s.pairs.size(); ++i) {
    csv << i + 1 << ',' << format_double(s.pairs[i].mu) << ',' << format_double(s.pairs[i].residual)
        << '\n';
    Json row{{"k", i + 1}, {"mu_k", s.pairs[i].mu}, {"residual", s.pairs[i].residual}};
    if (d.dim == 1 && d.bc == Boundary::Dirichlet) {
      const double h = d.hx(), len = d.bx - d.ax;
      row["stencil_closed_form"] =
          2.0 / (h * h) * (1.0 - std::cos(static_cast<double>(i + 1) * kTwoPi * 0.5 * h / len));
    }
    rows.push_back(row);
  }
  if (!csv) throw Error(ErrorKind::Io, "spectrum", "cannot write spectrum.csv");
  return Json{{"eigenvalues", rows}, {"gap", s.gap}};
}

Json run_fiber(Context& cx) {
  const RunConfig& c = cx.config;
  GridFunction z(cx.L.domain());
  if (c.z_amplitude != 0.0) z = c.z_amplitude * free_eigenpairs(cx.L, 2).pairs[1].psi;
  const FiberTrace tr =
      cx.timed("trace_fiber", [&] {
        TraceOptions to;
        to.step_cap = (c.t_hi - c.t_lo) / 400.0;
        return trace_fiber(cx.L, cx.f, z, c.t_lo, c.t_hi, to);
      });
  const auto cps = cx.timed("fiber_critical_points", [&] { return fiber_critical_points(cx.L, cx.f, tr); });
  emit_trace(tr, cx.trace("fiber.csv").string());
  double hmax = tr.points.front().h;
  for (const FiberPoint& p : tr.points) hmax = std::max(hmax, p.h);
  return Json{{"z_amplitude", c.z_amplitude},
              {"t_lo", c.t_lo},
              {"t_hi", c.t_hi},
              {"samples", tr.points.size()},
              {"h_max", hmax},
              {"critical", critical_json(cps)}};
}

Json run_balance(Context& cx) {
  const RunConfig& c = cx.config;
  const Eigen::Vector2d p = default_apex(cx.L.domain());
  BalanceOptions bo;
  bo.lambda_tol = c.balance_tol;
  const BalanceResult b =
      cx.timed("balance_theta", [&] { return balance_theta(cx.L, c.left, c.right, p, bo); });
  cx.timed("theta_sweep", [&] {
    emit_theta_sweep(cx.L, c.left, c.right, p, c.theta_samples, cx.trace("theta_sweep.csv").string());
    return 0;
  });
  const auto [at0, at2pi] = endpoint_lambda(cx.L, c.left, c.right);
  return Json{{"left", c.left},
              {"right", c.right},
              {"apex", {p.x(), p.y()}},
              {"theta", b.theta},
              {"lambda", b.lambda},
              {"bracket", {b.lo, b.hi}},
              {"evaluations", b.evaluations},
              {"lambda_at_0", at0},
              {"lambda_at_2pi", at2pi}};
}

Json run_four(Context& cx) {
  const RunConfig& c = cx.config;
  FourPreimageOptions o;
  o.sigma = c.sigma;
  o.nonfold.window = c.window;
  o.newton = newton_options(c);
  const FourPreimageResult r =
      cx.timed("four_preimage_certificate", [&] { return four_preimage_certificate(cx.L, cx.f, o); });
  const double worst = cx.timed("recheck", [&] {
    return recheck_certificate(cx.L, cx.f, r.certificate, c.accept);
  });
  emit_trace(r.trace, cx.trace("fiber.csv").string());
  return Json{{"candidate", to_json(r.candidate)},
              {"mollified", to_json(r.mollified)},
              {"fiber",
               {{"t_min", r.t_min},
                {"h_min", r.h_min},
                {"t_left_max", r.t_left_max},
                {"h_left_max", r.h_left_max},
                {"t_right_max", r.t_right_max},
                {"h_right_max", r.h_right_max},
                {"h_star", r.h_star},
                {"critical", critical_json(r.critical)}}},
              {"recheck_max_residual", worst},
              {"certificate", to_json(r.certificate)}};
}

Json run_cusp(Context& cx, bool census) {
  const RunConfig& c = cx.config;
  CuspOptions o;
  o.recipe = c.recipe;
  o.k = c.k;
  o.sigma = c.sigma;
  o.nonfold.window = c.window;
  o.classify.tol = c.tol;
  o.classify.tol_tau = c.tol_tau;
  o.classify.tol_ind = c.tol_ind;
  o.classify.roughness_cap = c.roughness_cap;
  o.census.per_side = c.per_side;
  o.census.random_starts = c.random_starts;
  o.census.seed = c.seed;
  o.census.newton = newton_options(c);
  o.run_census = census;
  const CuspResult r = cx.timed(census ? "cusp_certificate" : "classify",
                                [&] { return cusp_certificate(cx.L, cx.f, o); });
  Json j{{"candidate", to_json(r.candidate)},
         {"mollified", to_json(r.mollified)},
         {"certificate", to_json(r.certificate)}};
  if (r.collapse) j["collapse"] = to_json(*r.collapse);
  if (!census) return j;
  if (r.certificate.kind == CriticalKind::Cusp) {
    j["unfolding"] = to_json(r.unfolding);
    std::ofstream csv(cx.trace("census.csv"), std::ios::binary);
    csv << "s,h_star,count,fiber_crossings\n";
    for (const CensusSample& s : r.certificate.census) {
      csv << format_double(s.s) << ',' << format_double(s.h_star) << ',' << s.count << ','
          << s.fiber_crossings << '\n';
    }
    if (!csv) throw Error(ErrorKind::Io, "cusp", "cannot write census.csv");
  }
  int best = 0;
  for (const CensusSample& s : r.certificate.census) best = std::max(best, s.count);
  if (c.three_preimages && best >= 3) {
    const PreimageCertificate three = cx.timed("three_preimage_certificate", [&] {
      return three_preimage_certificate(cx.L, cx.f, r, o.census);
    });
    j["three_preimages"] = to_json(three);
  }
  return j;
}

void write_manifest(const fs::path& out, const RunConfig& c, const Json& timings, double total,
                    const std::string& status) {
  Json m{{"schema", "apsing-manifest/1"},
         {"apsing_version", version()},
         {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." +
                               std::to_string(EIGEN_MAJOR_VERSION) + "." +
                               std::to_string(EIGEN_MINOR_VERSION)},
         {"json_version", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
         {"compiler", __VERSION__},
         {"pipeline", c.pipeline},
         {"seed", c.seed},
         {"threads", worker_threads(c.threads)},
         {"status", status},
         {"config", c.canonical},
         {"started_unix", std::chrono::duration_cast<std::chrono::seconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count()},
         {"wall_seconds", timings},
         {"total_seconds", total}};
  write_json((out / "manifest.json").string(), m);
}

}  // namespace

const char* version() { return APSING_VERSION; }

int run(const RunConfig& config, std::ostream& log) {
  const auto t0 = Clock::now();
  const fs::path out(config.out);
  std::error_code ec;
  fs::create_directories(out / "traces", ec);
  if (ec) {
    log << "error: cannot create " << (out / "traces").string() << ": " << ec.message() << '\n';
    return kExitStageFailure;
  }
  Json report{{"schema", kReportSchema},
              {"pipeline", config.pipeline},
              {"seed", config.seed},
              {"domain", to_json(config.domain)},
              {"tolerances", tolerances(config)}};
  Json timings = Json::object();
  std::string status = "ok";
  int code = kExitOk;
  try {
    const DiscreteLaplacian L = build_laplacian(config.domain);
    Context cx{config, log, L, construct_linear(0.0), out, {}};
    cx.f = make_family(config, L);
    report["nonlinearity"] = to_json(cx.f);
    emit_nonlinearity(cx.f, config.window, 801, cx.trace("nonlinearity.csv").string());
    Json result;
    if (config.pipeline == "spectrum") result = run_spectrum(cx);
    else if (config.pipeline == "fiber") result = run_fiber(cx);
    else if (config.pipeline == "balance") result = run_balance(cx);
    else if (config.pipeline == "four-preimages") result = run_four(cx);
    else if (config.pipeline == "cusp") result = run_cusp(cx, true);
    else result = run_cusp(cx, false);
    report["status"] = "ok";
    report["result"] = result;
    timings = cx.timings;
  } catch (const Error& e) {
    status = "stage-failure";
    code = kExitStageFailure;
    report["status"] = status;
    report["error"] = Json{{"stage", e.stage()}, {"kind", to_string(e.kind())}, {"message", e.what()}};
    log << "stage failure: " << e.what() << '\n';
  } catch (const std::exception& e) {
    status = "stage-failure";
    code = kExitStageFailure;
    report["status"] = status;
    report["error"] = Json{{"stage", "internal"}, {"kind", "internal"}, {"message", e.what()}};
    log << "stage failure: " << e.what() << '\n';
  }
  try {
    write_json((out / "report.json").string(), report);
    write_manifest(out, config, timings, std::chrono::duration<double>(Clock::now() - t0).count(),
                   status);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitStageFailure;
  }
  return code;
}

int run_file(const std::string& pipeline, const std::string& config_path,
             const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed,
             std::ostream& log) {
  RunConfig c;
  try {
    c = to_run_config(load_config(config_path), pipeline);
  } catch (const Error& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (out) c.out = *out;
  if (seed) c.seed = *seed;
  return run(c, log);
}

}  // namespace apsing
