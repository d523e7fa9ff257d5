#pragma once

#include <optional>

#include "apsing/domain.hpp"
#include "apsing/nonlinearity.hpp"

namespace apsing {

/// Discrete Gaussian convolution honoring the boundary closure: zero
/// extension (Dirichlet), reflection about the boundary (Neumann), wrapping
/// (periodic). Rectangles are smoothed one axis at a time.
GridFunction smooth(const GridFunction& u, double sigma);

/// max |second difference| over interior nodes, times h^2, over the
/// oscillation of u. Zero for affine u, about one at a unit jump.
double roughness(const GridFunction& u);

struct MollifyResult {
  GridFunction u;
  double sigma = 0.0;
  double a = 0.0;  // coefficient of the first probe (or the single direction)
  double b = 0.0;  // coefficient of the second probe
  double lambda = 0.0;
  double delta = 0.0;
  std::optional<double> tau;
  double independence = 0.0;
  double condition = 0.0;  // of the probe Jacobian at the start
  double roughness = 0.0;
  int iterations = 0;
  bool used_fallback = false;
};

struct RestoreOptions {
  double reach = 1.0;          // |t| bound for the single-direction search
  double lambda_tol = 1e-9;
  int k = 1;
};

/// Root of t -> lambda_k(u0 + t direction) inside [-reach, reach]; requires
/// delta_k > 0 at the result. Throws no-bracket or delta-lost.
MollifyResult restore_lambda_zero(const DiscreteLaplacian& L, const GridFunction& u0,
                                  const Nonlinearity& f, const GridFunction& direction,
                                  const RestoreOptions& options = {});

struct NonfoldRestoreOptions {
  double ball = 1.0;      // |(a, b)| bound
  double tol = 1e-10;     // Newton target for |(lambda, delta)|
  double accept = 1e-8;   // success threshold
  int max_iterations = 30;
  int grid = 17;          // sign-map resolution of the fallback
  double min_condition_inverse = 1e-12;
  int k = 1;
};

/// 2D Newton on (a, b) -> (lambda, delta)(u0 + a v1 + b v2) from (0, 0).
/// Falls back to a sign map of both components on the (a, b) box with cell
/// subdivision when Newton stalls or leaves the ball. Throws
/// jacobian-singular or newton-diverged.
MollifyResult restore_nonfold(const DiscreteLaplacian& L, const GridFunction& u0,
                              const Nonlinearity& f, const GridFunction& v1,
                              const GridFunction& v2, const NonfoldRestoreOptions& options = {});

}  // namespace apsing
