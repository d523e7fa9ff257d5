#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <vector>

namespace apsing {

struct EigenSolverOptions {
  double tolerance = 1e-10;
  // Look for extra copies of degenerate eigenvalues that a single Krylov
  // space cannot see.
  bool check_multiplicity = true;
};

/// Lowest eigenpairs of a symmetric sparse matrix; vectors are Euclidean-unit.
struct EigenDecomposition {
  std::vector<double> values;
  std::vector<Eigen::VectorXd> vectors;
  std::vector<double> residuals;  // ||M x - mu x||_2
};

// Shift-invert Lanczos with full reorthogonalization, then inverse-iteration
// polishing and Rayleigh quotients taken in edge form.
// Operator is A - diag(potential).
EigenDecomposition lowest_eigenpairs(const Eigen::SparseMatrix<double>& A,
                                     const Eigen::VectorXd& potential, int count,
                                     const EigenSolverOptions& options = {});

// x^T M x evaluated as sum_{i<j} (-m_ij)(x_i - x_j)^2 + sum_i rowsum_i x_i^2.
// For Laplacian-like matrices this avoids cancellation between large terms.
double quadratic_form(const Eigen::SparseMatrix<double>& M, const Eigen::VectorXd& x);

// Lower bound of the spectrum from Gershgorin discs.
double gershgorin_lower(const Eigen::SparseMatrix<double>& M);

}  // namespace apsing
