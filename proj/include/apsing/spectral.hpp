#pragma once

#include <optional>
#include <utility>

#include "apsing/domain.hpp"

namespace apsing {

struct EigenPair {
  int k = 1;
  double lambda = 0.0;
  GridFunction phi;
  double residual = 0.0;
  double gap = 0.0;  // distance to the nearest other eigenvalue
};

struct SpectralOptions {
  // Simplicity threshold, relative to the free gap mu_2 - mu_1.
  double relative_gap = 1e-6;
};

/// Lowest-but-(k-1) eigenpair of -Lap - q. phi has unit weighted norm;
/// <phi, 1> > 0 for k = 1 and <phi, psi_k> > 0 for k > 1.
/// Throws near-degenerate if the eigenvalue is not simple.
EigenPair eigenpair(const DiscreteLaplacian& L, const GridFunction& q, int k = 1,
                    const SpectralOptions& options = {});

/// Nodal f'(u), f''(u), f'''(u). Two-valued potentials build these by mixing
/// the values at their two levels instead of evaluating f at a grid function.
struct DerivativeProfile {
  Eigen::VectorXd d1, d2, d3;
};

DerivativeProfile derivative_profile(const GridFunction& u, const Nonlinearity& f);

struct FunctionalValues {
  EigenPair pair;
  double lambda = 0.0;
  double delta = 0.0;
  std::optional<double> tau;
  GridFunction grad_lambda;
  std::optional<GridFunction> grad_delta;
  std::optional<GridFunction> w;
};

// lambda, phi, grad lambda and delta; with `second_order` also w, grad delta, tau.
FunctionalValues functionals(const DiscreteLaplacian& L, const DerivativeProfile& profile, int k,
                             bool second_order, const SpectralOptions& options = {});
FunctionalValues functionals(const DiscreteLaplacian& L, const GridFunction& u,
                             const Nonlinearity& f, int k, bool second_order,
                             const SpectralOptions& options = {});

EigenPair lambda_phi(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f,
                     int k = 1);
GridFunction grad_lambda(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f,
                         int k = 1);
double delta(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f, int k = 1);
GridFunction solve_w(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f,
                     int k = 1);
GridFunction grad_delta(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f,
                        int k = 1);
double tau(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f, int k = 1);
std::pair<double, double> Lambda_map(const DiscreteLaplacian& L, const GridFunction& u,
                                     const Nonlinearity& f, int k = 1);

// Rows (grad lambda, grad delta) against probes (v1, v2); fv needs grad_delta.
Eigen::Matrix2d probe_jacobian(const FunctionalValues& fv, const GridFunction& v1,
                               const GridFunction& v2);

// Smallest singular value of the probe Jacobian. Without probes the
// normalized gradients themselves are used.
double independence(const FunctionalValues& fv, const GridFunction* v1 = nullptr,
                    const GridFunction* v2 = nullptr);

// Solution of (J - lambda) x = Pi_W rhs with <x, phi> = 0, where J = -Lap - q.
// Throws singular-restriction when the bordered matrix cannot be factored.
Eigen::VectorXd restricted_solve(const DiscreteLaplacian& L, const Eigen::VectorXd& q,
                                 double lambda, const Eigen::VectorXd& phi,
                                 const Eigen::VectorXd& rhs);

}  // namespace apsing
