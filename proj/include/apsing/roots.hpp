#pragma once

#include <functional>

namespace apsing {

struct RootOptions {
  double x_tol = 1e-12;
  double f_tol = 0.0;  // stop once |f| <= f_tol (0 disables)
  int max_iterations = 200;
};

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int iterations = 0;
};

// Bracketing root finder: regula falsi with the Illinois modification, falling
// back to bisection whenever the bracket fails to halve. Requires f(lo) and
// f(hi) of opposite signs (or one of them zero); throws no-bracket otherwise.
RootResult find_root(const std::function<double(double)>& f, double lo, double hi,
                     const RootOptions& options = {});

// Same, with endpoint values already known.
RootResult find_root(const std::function<double(double)>& f, double lo, double hi,
                     double f_lo, double f_hi, const RootOptions& options = {});

// Plain bisection; the bracket halves every step.
RootResult bisect(const std::function<double(double)>& f, double lo, double hi,
                  const RootOptions& options = {});

}  // namespace apsing
