#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "apsing/domain.hpp"
#include "apsing/nonlinearity.hpp"

namespace apsing {

/// Orthogonal split g = z + s psi_1 with <z, psi_1> = 0.
std::pair<GridFunction, double> project_z(const DiscreteLaplacian& L, const GridFunction& g);

struct FiberOptions {
  double tolerance = 1e-11;  // Newton stops here
  double accept = 1e-9;      // and succeeds if the residual reached this
  int max_iterations = 40;
  int max_halvings = 30;
  bool with_lambda = true;   // lowest eigenvalue of DF(u)
  bool with_tangent = true;  // du/dt and dh/dt
};

/// Point u = w + t psi_1 on the fiber over z, i.e. Pi_W F(u) = z.
struct FiberPoint {
  GridFunction z;
  double t = 0.0;
  GridFunction w;
  GridFunction u;
  double h = 0.0;  // <F(u), psi_1>
  double lambda1 = 0.0;
  double newton_residual = 0.0;  // weighted norm of Pi_W F(u) - z
  int iterations = 0;
  std::optional<GridFunction> tangent;  // du/dt
  double slope = 0.0;                   // dh/dt, from the tangent
};

/// Damped Newton on Pi_W F(w + t psi_1) = z with bordered linear systems.
/// Throws no-convergence (with the last residual) or hypothesis-violation when
/// the Jacobian restricted to W is numerically singular.
FiberPoint fiber_solve(const DiscreteLaplacian& L, const Nonlinearity& f, const GridFunction& z,
                       double t, const GridFunction* w_init = nullptr,
                       const FiberOptions& options = {});

/// <F(u), psi_1>.
double height(const DiscreteLaplacian& L, const Nonlinearity& f, const GridFunction& u);
/// mu_1 <u, psi_1> - <f(u), psi_1>; equals height() up to the eigen-residual.
double height_alt(const DiscreteLaplacian& L, const Nonlinearity& f, const GridFunction& u);

struct TraceOptions {
  double step_cap = 0.0;  // 0 means 0.05 (t_hi - t_lo)
  double min_step = 0.0;  // 0 means 1e-9 (t_hi - t_lo)
  int fast_iterations = 3;  // grow the step after solves this cheap
  FiberOptions newton{};
};

struct FiberTrace {
  GridFunction z;
  std::vector<FiberPoint> points;  // strictly increasing t
};

/// Adaptive continuation in t with a tangent predictor; the step halves when
/// Newton fails. Throws continuation-stall when it underflows `min_step`.
FiberTrace trace_fiber(const DiscreteLaplacian& L, const Nonlinearity& f, const GridFunction& z,
                       double t_lo, double t_hi, const TraceOptions& options = {},
                       const GridFunction* w_start = nullptr);

struct CriticalPoint {
  double t = 0.0;
  FiberPoint point;
  double delta = 0.0;        // < 0: local max of h, > 0: local min
  double alignment = 0.0;    // <phi_1, du/dt> / (|phi_1| |du/dt|)
};

/// Zeros of lambda_1 along the fiber, one per sign change between samples.
std::vector<CriticalPoint> fiber_critical_points(const DiscreteLaplacian& L, const Nonlinearity& f,
                                                 const FiberTrace& trace,
                                                 const FiberOptions& options = {});

/// C with h(u(t)) <= -(eps/2)|t| + C on every fiber, for f whose slopes
/// eventually exceed mu_1 + eps (right) and fall below mu_1 - eps (left).
/// C = max(c+, c-) int psi_1 with c+- = sup_x ((mu_1 +- eps/2) x - f(x)),
/// the sup taken on [-reach, reach] after checking it is attained inside.
double asymptotic_height_constant(const DiscreteLaplacian& L, const Nonlinearity& f,
                                  double epsilon, double reach = 1e3);

}  // namespace apsing
