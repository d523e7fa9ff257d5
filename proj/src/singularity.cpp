#include "apsing/singularity.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "apsing/error.hpp"
#include "apsing/roots.hpp"
#include "apsing/spectral.hpp"

namespace apsing {

using Eigen::VectorXd;

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// Run fn(i) for i < count on `threads` workers; results are stored by index so
// the outcome does not depend on scheduling.
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(ErrorKind::StageFailure, name, e.what());
  }
}

GridFunction ground_state(const DiscreteLaplacian& L) {
  return free_eigenpairs(L, 1).pairs[0].psi;
}

struct NewtonOutcome {
  VectorXd u;
  double residual = 0.0;
};

std::optional<NewtonOutcome> solve_F(const DiscreteLaplacian& L, const Nonlinearity& f,
                                     const VectorXd& y, const VectorXd& start,
                                     const PreimageOptions& o) {
  const double wroot = std::sqrt(L.weight());
  const auto resid = [&](const VectorXd& u) -> VectorXd {
    return L.apply(u) - map_values(f, u, 0) - y;
  };
  VectorXd u = start;
  VectorXd R = resid(u);
  double r = wroot * R.norm();
  if (!std::isfinite(r)) return std::nullopt;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::SparseMatrix<double> J = L.matrix();
  lu.analyzePattern(J);
  for (int it = 0; it < o.max_iterations && r > o.tol; ++it) {
    J = L.matrix();
    const VectorXd q = map_values(f, u, 1);
    for (Eigen::Index i = 0; i < q.size(); ++i) J.coeffRef(i, i) -= q[i];
    lu.factorize(J);
    if (lu.info() != Eigen::Success) return std::nullopt;
    const VectorXd du = lu.solve(-R);
    if (!du.allFinite()) return std::nullopt;
    const double previous = r;
    bool moved = false;
    double step = 1.0;
    for (int k = 0; k <= o.max_halvings; ++k, step *= 0.5) {
      const VectorXd trial = u + step * du;
      VectorXd Rt = resid(trial);
      const double rt = wroot * Rt.norm();
      if (std::isfinite(rt) && rt < (1.0 - 1e-4 * step) * r) {
        u = trial;
        R = std::move(Rt);
        r = rt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    if (r <= std::max(o.accept, residual_floor(L, f, u)) && r > 0.25 * previous) break;
  }
  if (!(r <= std::max(o.accept, residual_floor(L, f, u)))) return std::nullopt;
  return NewtonOutcome{std::move(u), r};
}

void fill_metrics(const DiscreteLaplacian& L, const Nonlinearity& f, PreimageCertificate& c) {
  const GridFunction psi = ground_state(L);
  const GridFunction zy = project_z(L, c.y).first;
  const size_t n = c.solutions.size();
  c.residuals.resize(n);
  c.t.resize(n);
  c.z_residual.resize(n);
  c.distances = Eigen::MatrixXd::Zero(n, n);
  for (size_t i = 0; i < n; ++i) {
    const GridFunction Fu = apply_F(c.solutions[i], f, L);
    c.residuals[i] = norm(Fu - c.y);
    c.t[i] = inner_product(c.solutions[i], psi);
    c.z_residual[i] = norm(project_z(L, Fu).first - zy);
    for (size_t j = 0; j < i; ++j)
      c.distances(i, j) = c.distances(j, i) = norm(c.solutions[i] - c.solutions[j]);
  }
}

GridFunction random_direction(const Domain& d, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  VectorXd v(d.nodes());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = N(rng);
  GridFunction g = smooth(GridFunction(d, std::move(v)), 5.0 * d.hx());
  return g * (1.0 / norm(g));
}

}  // namespace

std::string_view to_string(CriticalKind kind) {
  switch (kind) {
    case CriticalKind::Fold: return "Fold";
    case CriticalKind::RegularNonfold: return "RegularNonfold";
    case CriticalKind::Cusp: return "Cusp";
    case CriticalKind::CollapsingCandidate: return "CollapsingCandidate";
    case CriticalKind::Degenerate: return "Degenerate";
  }
  return "Degenerate";
}

int worker_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("AP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SingularityCertificate classify_critical_point(const DiscreteLaplacian& L, const GridFunction& u,
                                               const Nonlinearity& f,
                                               const ClassifyOptions& options,
                                               const GridFunction* v1, const GridFunction* v2) {
  require_same_domain(L.domain(), u.domain(), "classify_critical_point");
  const FunctionalValues fv = functionals(L, u, f, options.k, true);
  if (std::abs(fv.lambda) > options.tol) {
    throw Error(ErrorKind::Precondition, "classify_critical_point",
                "lambda_" + std::to_string(options.k) + " = " + sci(fv.lambda) +
                    " is not within " + sci(options.tol) + " of zero");
  }
  SingularityCertificate c;
  c.k = options.k;
  c.u = u;
  c.lambda = fv.lambda;
  c.delta = fv.delta;
  c.tau = fv.tau;
  c.tolerances = options;
  if (v1 && v2) {
    const GridFunction n1 = *v1 * (1.0 / norm(*v1)), n2 = *v2 * (1.0 / norm(*v2));
    c.independence = independence(fv, &n1, &n2);
  } else {
    c.independence = independence(fv);
  }
  c.roughness = roughness(u);
  if (std::abs(c.delta) > options.tol) {
    c.kind = CriticalKind::Fold;
  } else if (!(c.independence > options.tol_ind)) {
    c.kind = CriticalKind::Degenerate;
  } else if (c.roughness > options.roughness_cap) {
    c.kind = CriticalKind::RegularNonfold;
  } else if (c.tau && std::abs(*c.tau) > options.tol_tau) {
    c.kind = CriticalKind::Cusp;
  } else {
    c.kind = CriticalKind::CollapsingCandidate;
  }
  return c;
}

PreimageCertificate newton_preimages(const DiscreteLaplacian& L, const Nonlinearity& f,
                                     const GridFunction& y, const std::vector<GridFunction>& starts,
                                     const PreimageOptions& options, const GridFunction* center,
                                     double radius) {
  require_same_domain(L.domain(), y.domain(), "newton_preimages");
  for (const GridFunction& s : starts) require_same_domain(L.domain(), s.domain(), "newton_preimages");
  std::vector<std::optional<NewtonOutcome>> out(starts.size());
  parallel_for(static_cast<int>(starts.size()), worker_threads(options.threads), [&](int i) {
    out[i] = solve_F(L, f, y.values(), starts[i].values(), options);
  });

  PreimageCertificate c;
  c.y = y;
  c.starts = static_cast<int>(starts.size());
  std::vector<int> ok;
  double scale = 0.0;
  for (int i = 0; i < c.starts; ++i) {
    if (!out[i]) continue;
    ++c.converged;
    if (center && std::sqrt(L.weight()) * (out[i]->u - center->values()).norm() > radius) {
      ++c.outside;
      continue;
    }
    ok.push_back(i);
    scale = std::max(scale, std::sqrt(L.weight()) * out[i]->u.norm());
  }
  c.dropped = c.starts - c.converged;
  c.separation = options.separation * scale;
  std::stable_sort(ok.begin(), ok.end(),
                   [&](int a, int b) { return out[a]->residual < out[b]->residual; });
  std::vector<VectorXd> kept;
  for (int i : ok) {
    const VectorXd& u = out[i]->u;
    bool fresh = true;
    for (const VectorXd& k : kept)
      if (std::sqrt(L.weight()) * (u - k).norm() < c.separation) {
        fresh = false;
        break;
      }
    if (fresh) kept.push_back(u);
  }
  const GridFunction psi = ground_state(L);
  std::sort(kept.begin(), kept.end(), [&](const VectorXd& a, const VectorXd& b) {
    return a.dot(psi.values()) < b.dot(psi.values());
  });
  for (VectorXd& k : kept) c.solutions.emplace_back(L.domain(), std::move(k));
  fill_metrics(L, f, c);
  return c;
}

double recheck_certificate(const DiscreteLaplacian& L, const Nonlinearity& f,
                           const PreimageCertificate& c, double accept) {
  double worst = 0.0;
  for (size_t i = 0; i < c.solutions.size(); ++i) {
    const double r = norm(apply_F(c.solutions[i], f, L) - c.y);
    worst = std::max(worst, r);
    if (!(r <= accept)) {
      throw Error(ErrorKind::RangeViolation, "recheck_certificate",
                  "solution " + std::to_string(i) + " has residual " + sci(r));
    }
    for (size_t j = 0; j < i; ++j) {
      const double d = norm(c.solutions[i] - c.solutions[j]);
      if (!(d >= c.separation)) {
        throw Error(ErrorKind::RangeViolation, "recheck_certificate",
                    "solutions " + std::to_string(j) + " and " + std::to_string(i) +
                        " are " + sci(d) + " apart, below " + sci(c.separation));
      }
    }
  }
  return worst;
}

std::vector<FiberPoint> height_crossings(const DiscreteLaplacian& L, const Nonlinearity& f,
                                         const FiberTrace& trace, double level) {
  std::vector<FiberPoint> out;
  FiberOptions quick;
  quick.with_lambda = false;
  quick.with_tangent = false;
  const auto& pts = trace.points;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i].h - level, b = pts[i + 1].h - level;
    if (a == 0.0) {
      out.push_back(pts[i]);
      continue;
    }
    if (!((a < 0.0) != (b < 0.0)) || b == 0.0) continue;
    const GridFunction& w_near = std::abs(a) < std::abs(b) ? pts[i].w : pts[i + 1].w;
    const auto g = [&](double t) { return fiber_solve(L, f, trace.z, t, &w_near, quick).h - level; };
    RootOptions ro;
    ro.x_tol = 1e-13 * std::max(1.0, std::abs(pts[i].t));
    ro.f_tol = 1e-13 * std::max(1.0, std::abs(level));
    const RootResult r = find_root(g, pts[i].t, pts[i + 1].t, a, b, ro);
    out.push_back(fiber_solve(L, f, trace.z, r.x, &w_near));
  }
  if (!pts.empty() && pts.back().h == level) out.push_back(pts.back());
  return out;
}

FourPreimageResult four_preimage_certificate(const DiscreteLaplacian& L, const Nonlinearity& f,
                                             const FourPreimageOptions& options) {
  const Domain& d = L.domain();
  FourPreimageResult res;
  const double sigma = options.sigma > 0.0 ? options.sigma : 3.0 * d.hx();
  res.candidate = stage("find_positive_delta_nonfold",
                        [&] { return find_positive_delta_nonfold(L, f, options.nonfold); });
  res.mollified = stage("restore_lambda_zero", [&] {
    return restore_lambda_zero(L, smooth(res.candidate.potential.values(), sigma), f,
                               smooth(res.candidate.potential.chi, sigma), options.restore);
  });
  res.mollified.sigma = sigma;
  const GridFunction psi = ground_state(L);
  const GridFunction z = project_z(L, apply_F(res.mollified.u, f, L)).first;
  const double tm = inner_product(res.mollified.u, psi);

  double T = options.initial_window;
  bool found = false;
  std::string why;
  for (int attempt = 0; attempt <= options.max_doublings && !found; ++attempt, T *= 2.0) {
    TraceOptions to;
    to.step_cap = 2.0 * T / options.samples;
    res.trace = stage("trace_fiber", [&] { return trace_fiber(L, f, z, tm - T, tm + T, to); });
    res.critical = stage("fiber_critical_points",
                         [&] { return fiber_critical_points(L, f, res.trace); });
    const CriticalPoint* mn = nullptr;
    for (const CriticalPoint& c : res.critical)
      if (c.delta > 0.0 && (!mn || std::abs(c.t - tm) < std::abs(mn->t - tm))) mn = &c;
    if (!mn) {
      why = "no local minimum of the height on the fiber";
      continue;
    }
    const CriticalPoint *left = nullptr, *right = nullptr;
    for (const CriticalPoint& c : res.critical) {
      if (c.delta >= 0.0) continue;
      if (c.t < mn->t && (!left || c.t > left->t)) left = &c;
      if (c.t > mn->t && (!right || c.t < right->t)) right = &c;
    }
    if (!left || !right) {
      why = "local minimum at t=" + sci(mn->t) + " lacks a maximum on the " +
            (left ? "right" : "left");
      continue;
    }
    res.t_min = mn->t;
    res.h_min = mn->point.h;
    res.t_left_max = left->t;
    res.h_left_max = left->point.h;
    res.t_right_max = right->t;
    res.h_right_max = right->point.h;
    res.h_star = 0.5 * (res.h_min + std::min(res.h_left_max, res.h_right_max));
    if (!(res.trace.points.front().h < res.h_star && res.trace.points.back().h < res.h_star)) {
      why = "height has not dropped below the level at the window ends";
      continue;
    }
    found = true;
  }
  if (!found) throw Error(ErrorKind::StageFailure, "local_minimum", why);

  const GridFunction y = z + res.h_star * psi;
  const std::vector<FiberPoint> crossings =
      stage("height_crossings", [&] { return height_crossings(L, f, res.trace, res.h_star); });
  if (crossings.size() < 4) {
    throw Error(ErrorKind::StageFailure, "height_crossings",
                "level " + sci(res.h_star) + " crossed " + std::to_string(crossings.size()) +
                    " times");
  }
  std::vector<GridFunction> starts;
  for (const FiberPoint& p : crossings) starts.push_back(p.u);
  res.certificate = newton_preimages(L, f, y, starts, options.newton);
  if (res.certificate.solutions.size() < 4) {
    throw Error(ErrorKind::StageFailure, "newton_preimages",
                std::to_string(res.certificate.solutions.size()) + " distinct solutions from " +
                    std::to_string(starts.size()) + " crossings");
  }
  return res;
}

GridFunction unfolding_direction(const DiscreteLaplacian& L, const Nonlinearity& f,
                                 const GridFunction& u) {
  const FunctionalValues fv = functionals(L, u, f, 1, false);
  const GridFunction v = project_z(L, fv.grad_lambda).first;
  GridFunction g = project_z(L, apply_jacobian(u, f, L, v)).first;
  const double n = norm(g);
  if (!(n > 0.0)) {
    throw Error(ErrorKind::HypothesisViolation, "unfolding_direction",
                "gradient of lambda_1 has no component transverse to the fiber");
  }
  return g * (1.0 / n);
}

std::vector<CensusSample> census_counts(const DiscreteLaplacian& L, const Nonlinearity& f,
                                        const GridFunction& u_c, const GridFunction& g,
                                        const CensusOptions& options, double* radius_out,
                                        double* scale_out) {
  const Domain& d = L.domain();
  const GridFunction psi = ground_state(L);
  const GridFunction zc = project_z(L, apply_F(u_c, f, L)).first;
  const double tc = inner_product(u_c, psi);
  const GridFunction wc = u_c - tc * psi;

  // Fiber points at distance >= |t - tc| from u_c, so this window holds every
  // fiber point inside the ball. Other critical points on it shrink the ball:
  // the local picture stops there.
  double radius = options.ball_fraction * norm(u_c);
  {
    TraceOptions to;
    to.step_cap = radius / 100.0;
    const FiberTrace tr = trace_fiber(L, f, zc, tc - radius, tc + radius, to);
    for (const CriticalPoint& c : fiber_critical_points(L, f, tr)) {
      if (std::abs(c.t - tc) <= 0.05 * radius) continue;
      radius = std::min(radius, 0.5 * norm(c.point.u - u_c));
    }
  }

  // Scale of s from the local model lambda_1 ~ a s + kappa (t - tc)^2 / 2: the
  // fold pair has half-width sqrt(2 |a s / kappa|).
  FiberOptions quick;
  quick.with_tangent = false;
  const double eta = 1e-3 * radius;
  const double a = (fiber_solve(L, f, zc + eta * g, tc, &wc, quick).lambda1 -
                    fiber_solve(L, f, zc - eta * g, tc, &wc, quick).lambda1) /
                   (2.0 * eta);
  const double e = 1e-2 * radius;
  const double kappa = (fiber_solve(L, f, zc, tc + e, &wc, quick).lambda1 -
                        2.0 * fiber_solve(L, f, zc, tc, &wc, quick).lambda1 +
                        fiber_solve(L, f, zc, tc - e, &wc, quick).lambda1) /
                       (e * e);
  if (!(std::abs(a) > 0.0) || !(std::abs(kappa) > 0.0) || !std::isfinite(a * kappa)) {
    throw Error(ErrorKind::HypothesisViolation, "census_counts",
                "degenerate unfolding: d lambda/ds = " + sci(a) + ", d2 lambda/dt2 = " + sci(kappa));
  }
  const double width = options.target_width * radius;
  double scale = width * width * std::abs(kappa) / (2.0 * std::abs(a));
  // The fold pair opens on the side where a s kappa < 0.
  const double side = a * kappa < 0.0 ? 1.0 : -1.0;
  // Higher-order terms bend the model: correct the scale from the measured
  // half-width of the pair (it grows like sqrt(s)).
  const auto half_width = [&](double s) {
    TraceOptions to;
    to.step_cap = radius / 200.0;
    const FiberTrace tr = trace_fiber(L, f, zc + s * g, tc - radius, tc + radius, to);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const CriticalPoint& c : fiber_critical_points(L, f, tr)) {
      lo = std::min(lo, c.t);
      hi = std::max(hi, c.t);
    }
    return hi > lo ? 0.5 * (hi - lo) : 0.0;
  };
  for (int pass = 0; pass < 4; ++pass) {
    const double w = half_width(side * scale);
    if (w <= 0.0) {
      scale *= 0.25;
      continue;
    }
    const double ratio = width / w;
    if (std::abs(ratio - 1.0) < 0.1) break;
    scale *= std::clamp(ratio * ratio, 0.05, 20.0);
  }
  if (radius_out) *radius_out = radius;
  if (scale_out) *scale_out = scale;

  std::vector<CensusSample> out;
  const int m = options.per_side;
  for (int j = -m; j <= m; ++j) {
    CensusSample cs;
    cs.s = scale * j / m;
    const GridFunction zs = zc + cs.s * g;
    TraceOptions to;
    to.step_cap = radius / 200.0;
    const FiberTrace tr = trace_fiber(L, f, zs, tc - radius, tc + radius, to);
    const std::vector<CriticalPoint> crit = fiber_critical_points(L, f, tr);
    if (crit.size() >= 2) {
      double hi = -std::numeric_limits<double>::infinity(), lo = -hi;
      for (const CriticalPoint& c : crit) {
        hi = std::max(hi, c.point.h);
        lo = std::min(lo, c.point.h);
      }
      cs.h_star = 0.5 * (hi + lo);
    } else {
      // No fold pair: the level through the inflection, where |dh/dt| is least.
      const FiberPoint* flat = &tr.points.front();
      for (const FiberPoint& p : tr.points)
        if (std::abs(p.slope) < std::abs(flat->slope)) flat = &p;
      cs.h_star = flat->h;
    }
    const std::vector<FiberPoint> crossings = height_crossings(L, f, tr, cs.h_star);
    cs.fiber_crossings = static_cast<int>(crossings.size());
    std::vector<GridFunction> starts;
    for (const FiberPoint& p : crossings) starts.push_back(p.u);
    std::mt19937_64 rng(options.seed + 7919ULL * static_cast<std::uint64_t>(j + m));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < options.random_starts; ++i) {
      const GridFunction dir = random_direction(d, rng);
      starts.push_back(u_c + (radius * U(rng)) * dir);
    }
    const PreimageCertificate pc =
        newton_preimages(L, f, zs + cs.h_star * psi, starts, options.newton, &u_c, radius);
    cs.count = static_cast<int>(pc.solutions.size());
    cs.t = pc.t;
    out.push_back(std::move(cs));
  }
  return out;
}

CollapseReport collapse_from_trace(const FiberTrace& trace, double tol) {
  CollapseReport r;
  r.tol = tol;
  r.samples = static_cast<int>(trace.points.size());
  if (trace.points.empty()) return r;
  double hmin = trace.points[0].h, hmax = hmin;
  double lmin = trace.points[0].lambda1, lmax = lmin;
  for (const FiberPoint& p : trace.points) {
    hmin = std::min(hmin, p.h);
    hmax = std::max(hmax, p.h);
    lmin = std::min(lmin, p.lambda1);
    lmax = std::max(lmax, p.lambda1);
  }
  r.window = 0.5 * (trace.points.back().t - trace.points.front().t);
  r.h_variation = hmax - hmin;
  r.lambda_variation = lmax - lmin;
  r.collapsing = r.h_variation <= tol && r.lambda_variation <= tol;
  return r;
}

CollapseReport detect_collapsing_fiber(const DiscreteLaplacian& L, const Nonlinearity& f,
                                       const GridFunction& u_nf, const CollapseOptions& options) {
  const FunctionalValues fv = functionals(L, u_nf, f, 1, false);
  if (std::hypot(fv.lambda, fv.delta) > options.nonfold_tol) {
    throw Error(ErrorKind::Precondition, "detect_collapsing_fiber",
                "(lambda_1, delta_1) = (" + sci(fv.lambda) + ", " + sci(fv.delta) +
                    ") is not a nonfold");
  }
  const GridFunction psi = ground_state(L);
  const GridFunction z = project_z(L, apply_F(u_nf, f, L)).first;
  const double t0 = inner_product(u_nf, psi);
  const GridFunction w0 = u_nf - t0 * psi;
  TraceOptions to;
  to.step_cap = 2.0 * options.window / options.samples;
  const FiberTrace tr =
      trace_fiber(L, f, z, t0 - options.window, t0 + options.window, to, &w0);
  return collapse_from_trace(tr, options.tol);
}

CuspResult cusp_certificate(const DiscreteLaplacian& L, const Nonlinearity& f,
                            const CuspOptions& options) {
  const Domain& d = L.domain();
  CuspResult res;
  const double sigma = options.sigma > 0.0 ? options.sigma : 3.0 * d.hx();
  if (options.recipe == "hk") {
    res.candidate = stage("find_nonfold_Hk",
                          [&] { return find_nonfold_Hk(L, f, options.k, options.nonfold); });
  } else if (options.recipe == "regular") {
    if (options.k != 1) {
      throw Error(ErrorKind::Precondition, "cusp_certificate", "the regular recipe is for k = 1");
    }
    res.candidate = stage("find_regular_nonfold",
                          [&] { return find_regular_nonfold(L, f, options.nonfold); });
  } else {
    throw Error(ErrorKind::Precondition, "cusp_certificate", "unknown recipe " + options.recipe);
  }
  auto [p1, p2] = sector_probes(res.candidate.potential);
  const GridFunction v1 = smooth(p1, sigma), v2 = smooth(p2, sigma);
  NonfoldRestoreOptions ro;
  ro.ball = 0.2 * std::abs(res.candidate.potential.right - res.candidate.potential.left);
  ro.k = options.k;
  res.mollified = stage("restore_nonfold", [&] {
    return restore_nonfold(L, smooth(res.candidate.potential.values(), sigma), f, v1, v2, ro);
  });
  res.mollified.sigma = sigma;
  ClassifyOptions co = options.classify;
  co.k = options.k;
  res.certificate = stage("classify_critical_point",
                          [&] { return classify_critical_point(L, res.mollified.u, f, co, &v1, &v2); });
  if (res.certificate.kind == CriticalKind::Cusp && options.run_census && options.k == 1) {
    res.unfolding = stage("unfolding_direction",
                          [&] { return unfolding_direction(L, f, res.mollified.u); });
    res.certificate.census = stage("census", [&] {
      return census_counts(L, f, res.mollified.u, res.unfolding, options.census,
                           &res.certificate.census_radius, &res.certificate.census_scale);
    });
  }
  if (res.certificate.kind == CriticalKind::CollapsingCandidate && options.k == 1) {
    res.collapse = stage("detect_collapsing_fiber",
                         [&] { return detect_collapsing_fiber(L, f, res.mollified.u); });
  }
  return res;
}

PreimageCertificate three_preimage_certificate(const DiscreteLaplacian& L, const Nonlinearity& f,
                                               const CuspResult& cusp,
                                               const CensusOptions& options) {
  const std::vector<CensusSample>& census = cusp.certificate.census;
  auto best = std::max_element(census.begin(), census.end(),
                               [](const CensusSample& a, const CensusSample& b) {
                                 return a.count < b.count;
                               });
  if (cusp.certificate.kind != CriticalKind::Cusp || best == census.end() || best->count < 3) {
    throw Error(ErrorKind::Precondition, "three_preimage_certificate",
                "needs a cusp whose census reached three preimages");
  }
  const GridFunction psi = ground_state(L);
  const GridFunction& u_c = cusp.mollified.u;
  const GridFunction zs = project_z(L, apply_F(u_c, f, L)).first + best->s * cusp.unfolding;
  const double tc = inner_product(u_c, psi);
  const double level = best->h_star;

  // Every preimage lies on the fiber over zs: widen the trace until the height
  // is below the level at both ends, then take all crossings.
  std::vector<GridFunction> starts;
  double T = std::max(1.0, cusp.certificate.census_radius);
  for (int attempt = 0; attempt < 8; ++attempt, T *= 2.0) {
    TraceOptions to;
    to.step_cap = std::min(cusp.certificate.census_radius / 100.0, 2.0 * T / 400.0);
    const FiberTrace tr = trace_fiber(L, f, zs, tc - T, tc + T, to);
    const bool closed = tr.points.front().h < level && tr.points.back().h < level;
    if (!closed && attempt + 1 < 8) continue;
    for (const FiberPoint& p : height_crossings(L, f, tr, level)) starts.push_back(p.u);
    break;
  }
  PreimageCertificate c = newton_preimages(L, f, zs + level * psi, starts, options.newton);
  if (c.solutions.size() < 3) {
    throw Error(ErrorKind::StageFailure, "three_preimage_certificate",
                std::to_string(c.solutions.size()) + " distinct solutions at s=" + sci(best->s));
  }
  return c;
}

}  // namespace apsing
