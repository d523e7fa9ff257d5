#include "apsing/fiber.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <limits>

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

GridFunction ground_state(const DiscreteLaplacian& L, double* mu1 = nullptr) {
  FreeSpectrum s = free_eigenpairs(L, 2);
  if (mu1) *mu1 = s.pairs[0].mu;
  return std::move(s.pairs[0].psi);
}

double weighted_norm(const DiscreteLaplacian& L, const VectorXd& v) {
  return std::sqrt(L.weight()) * v.norm();
}

struct Residual {
  VectorXd F;
  double s = 0.0;
  VectorXd R;  // Pi_W F - z
  double norm = 0.0;
};

Residual residual(const DiscreteLaplacian& L, const Nonlinearity& f, const VectorXd& psi,
                  const VectorXd& z, const VectorXd& u) {
  Residual r;
  r.F = L.apply(u) - map_values(f, u, 0);
  r.s = L.weight() * r.F.dot(psi);
  r.R = r.F - r.s * psi - z;
  r.norm = weighted_norm(L, r.R);
  return r;
}

}  // namespace

std::pair<GridFunction, double> project_z(const DiscreteLaplacian& L, const GridFunction& g) {
  require_same_domain(L.domain(), g.domain(), "project_z");
  const GridFunction psi = ground_state(L);
  VectorXd z = g.values();
  double s = 0.0;
  // Two passes leave <z, psi> at rounding level.
  for (int pass = 0; pass < 2; ++pass) {
    const double c = L.weight() * z.dot(psi.values());
    z -= c * psi.values();
    s += c;
  }
  return {GridFunction(g.domain(), std::move(z)), s};
}

double height(const DiscreteLaplacian& L, const Nonlinearity& f, const GridFunction& u) {
  require_same_domain(L.domain(), u.domain(), "height");
  return inner_product(apply_F(u, f, L), ground_state(L));
}

double height_alt(const DiscreteLaplacian& L, const Nonlinearity& f, const GridFunction& u) {
  require_same_domain(L.domain(), u.domain(), "height");
  double mu1 = 0.0;
  const GridFunction psi = ground_state(L, &mu1);
  const GridFunction fu(u.domain(), map_values(f, u.values(), 0));
  return mu1 * inner_product(u, psi) - inner_product(fu, psi);
}

FiberPoint fiber_solve(const DiscreteLaplacian& L, const Nonlinearity& f, const GridFunction& z,
                       double t, const GridFunction* w_init, const FiberOptions& options) {
  const Domain& dom = L.domain();
  require_same_domain(dom, z.domain(), "fiber_solve");
  if (!std::isfinite(t)) throw Error(ErrorKind::NonFinite, "fiber_solve", "t is not finite");
  const GridFunction psi_g = ground_state(L);
  const VectorXd& psi = psi_g.values();
  const double zpsi = inner_product(z, psi_g);
  if (std::abs(zpsi) > 1e-8 * std::max(1.0, norm(z))) {
    throw Error(ErrorKind::Precondition, "fiber_solve",
                "z has a vertical component " + std::to_string(zpsi));
  }
  const VectorXd zv = z.values() - zpsi * psi;

  VectorXd w = VectorXd::Zero(dom.nodes());
  if (w_init) {
    require_same_domain(dom, w_init->domain(), "fiber_solve");
    w = w_init->values();
    w -= (w.dot(psi) / psi.squaredNorm()) * psi;
  }

  Residual r = residual(L, f, psi, zv, w + t * psi);
  const auto floor_at = [&](const VectorXd& u) { return residual_floor(L, f, u); };
  int it = 0;
  for (; it < options.max_iterations && r.norm > options.tolerance; ++it) {
    const VectorXd u = w + t * psi;
    VectorXd dw;
    try {
      dw = restricted_solve(L, map_values(f, u, 1), 0.0, psi, -r.R);
    } catch (const Error&) {
      throw Error(ErrorKind::HypothesisViolation, "fiber_solve",
                  "Jacobian restricted to W is singular at t=" + std::to_string(t));
    }
    dw -= (dw.dot(psi) / psi.squaredNorm()) * psi;
    const double previous = r.norm;
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k <= options.max_halvings; ++k, step *= 0.5) {
      const VectorXd trial = w + step * dw;
      Residual rt = residual(L, f, psi, zv, trial + t * psi);
      if (std::isfinite(rt.norm) && rt.norm < (1.0 - 1e-4 * step) * r.norm) {
        w = trial;
        r = std::move(rt);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    // Below `accept` progress stalls at the rounding floor, roughly
    // eps |u| / h^2; there is nothing left to gain.
    if (r.norm <= std::max(options.accept, floor_at(w + t * psi)) && r.norm > 0.25 * previous) {
      ++it;
      break;
    }
  }
  if (!(r.norm <= std::max(options.accept, floor_at(w + t * psi)))) {
    throw Error(ErrorKind::NoConvergence, "fiber_solve",
                "residual " + sci(r.norm) + " after " + std::to_string(it) +
                    " iterations at t=" + std::to_string(t));
  }

  FiberPoint p;
  p.z = GridFunction(dom, zv);
  p.t = t;
  p.u = GridFunction(dom, w + t * psi);
  p.w = GridFunction(dom, std::move(w));
  p.h = r.s;
  p.newton_residual = r.norm;
  p.iterations = it;
  if (options.with_lambda || options.with_tangent) {
    const VectorXd q = map_values(f, p.u.values(), 1);
    if (options.with_lambda) p.lambda1 = eigenpair(L, GridFunction(dom, q), 1).lambda;
    if (options.with_tangent) {
      // Differentiating F(w + t psi) = z + h psi in t: J (w' + psi) = h' psi.
      const VectorXd Jpsi = L.apply(psi) - q.cwiseProduct(psi);
      VectorXd wdot = restricted_solve(L, q, 0.0, psi, -Jpsi);
      wdot -= (wdot.dot(psi) / psi.squaredNorm()) * psi;
      VectorXd du = wdot + psi;
      const VectorXd Jdu = L.apply(du) - q.cwiseProduct(du);
      p.slope = L.weight() * Jdu.dot(psi);
      p.tangent = GridFunction(dom, std::move(du));
    }
  }
  return p;
}

FiberTrace trace_fiber(const DiscreteLaplacian& L, const Nonlinearity& f, const GridFunction& z,
                       double t_lo, double t_hi, const TraceOptions& options,
                       const GridFunction* w_start) {
  if (!(t_lo < t_hi)) throw Error(ErrorKind::Precondition, "trace_fiber", "need t_lo < t_hi");
  const double span = t_hi - t_lo;
  const double cap = options.step_cap > 0.0 ? options.step_cap : 0.05 * span;
  const double min_step = options.min_step > 0.0 ? options.min_step : 1e-9 * span;
  FiberOptions newton = options.newton;
  newton.with_tangent = true;

  FiberTrace trace;
  trace.points.push_back(fiber_solve(L, f, z, t_lo, w_start, newton));
  trace.z = trace.points.front().z;
  const VectorXd psi = ground_state(L).values();
  double dt = cap;
  while (trace.points.back().t < t_hi) {
    const FiberPoint& last = trace.points.back();
    // Snap to the end rather than leave a sliver of rounding length.
    const double t_next = t_hi - last.t <= dt * (1.0 + 1e-9) ? t_hi : last.t + dt;
    const double step = t_next - last.t;
    const GridFunction guess(L.domain(), last.w.values() + step * (last.tangent->values() - psi));
    try {
      FiberOptions quick = newton;
      quick.max_iterations = std::min(newton.max_iterations, 12);
      FiberPoint p = fiber_solve(L, f, trace.z, t_next, &guess, quick);
      const bool cheap = p.iterations <= options.fast_iterations;
      trace.points.push_back(std::move(p));
      if (cheap) dt = std::min(cap, 1.5 * dt);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoConvergence && e.kind() != ErrorKind::HypothesisViolation) throw;
      dt *= 0.5;
      if (dt < min_step) {
        throw Error(ErrorKind::ContinuationStall, "trace_fiber",
                    "step underflow at t=" + std::to_string(last.t) + " (" + e.detail() + ")");
      }
    }
  }
  return trace;
}

std::vector<CriticalPoint> fiber_critical_points(const DiscreteLaplacian& L, const Nonlinearity& f,
                                                 const FiberTrace& trace,
                                                 const FiberOptions& options) {
  std::vector<CriticalPoint> out;
  const auto& pts = trace.points;
  FiberOptions newton = options;
  newton.with_lambda = true;
  newton.with_tangent = false;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const double la = pts[i].lambda1, lb = pts[i + 1].lambda1;
    if (!(la * lb < 0.0 || (lb == 0.0 && la != 0.0))) continue;
    const GridFunction* seed = &pts[i].w;
    const auto lambda_at = [&](double t) {
      const FiberPoint& near = std::abs(t - pts[i].t) < std::abs(t - pts[i + 1].t) ? pts[i] : pts[i + 1];
      seed = &near.w;
      return fiber_solve(L, f, trace.z, t, seed, newton).lambda1;
    };
    RootOptions ro;
    ro.x_tol = 1e-10;
    ro.f_tol = 1e-11;
    const RootResult root = find_root(lambda_at, pts[i].t, pts[i + 1].t, la, lb, ro);
    FiberOptions full = options;
    full.with_lambda = true;
    full.with_tangent = true;
    CriticalPoint c;
    c.t = root.x;
    c.point = fiber_solve(L, f, trace.z, root.x, seed, full);
    const FunctionalValues fv = functionals(L, c.point.u, f, 1, false);
    c.delta = fv.delta;
    c.alignment = inner_product(fv.pair.phi, *c.point.tangent) / norm(*c.point.tangent);
    out.push_back(std::move(c));
  }
  return out;
}

double asymptotic_height_constant(const DiscreteLaplacian& L, const Nonlinearity& f,
                                  double epsilon, double reach) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::Precondition, "asymptotic_bound", "epsilon <= 0");
  double mu1 = 0.0;
  const GridFunction psi = ground_state(L, &mu1);
  const double mass = inner_product(psi, GridFunction::constant(L.domain(), 1.0));

  const auto sup_of = [&](double a) {
    if (!(f.d1(-reach) < a && f.d1(reach) > a)) {
      throw Error(ErrorKind::HypothesisViolation, "asymptotic_bound",
                  "slopes at +-reach do not straddle " + std::to_string(a));
    }
    const int n = 400001;
    const double dx = 2.0 * reach / (n - 1);
    double best = -std::numeric_limits<double>::infinity();
    int at = 0;
    for (int i = 0; i < n; ++i) {
      const double x = -reach + i * dx;
      const double g = a * x - f.value(x);
      if (g > best) {
        best = g;
        at = i;
      }
    }
    // Refine at the stationary point next to the best sample.
    const double lo = -reach + std::max(0, at - 1) * dx, hi = -reach + std::min(n - 1, at + 1) * dx;
    const auto slope = [&](double x) { return a - f.d1(x); };
    if (slope(lo) * slope(hi) <= 0.0) {
      const double x = find_root(slope, lo, hi).x;
      best = std::max(best, a * x - f.value(x));
    }
    return best;
  };
  const double c_plus = sup_of(mu1 + 0.5 * epsilon);
  const double c_minus = sup_of(mu1 - 0.5 * epsilon);
  return std::max(c_plus, c_minus) * mass;
}

}  // namespace apsing
