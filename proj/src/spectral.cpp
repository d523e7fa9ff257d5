#include "apsing/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

#include "apsing/eigensolver.hpp"
#include "apsing/error.hpp"

namespace apsing {

using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

namespace {

bool may_be_degenerate(const Domain& d) { return d.dim == 2 || d.bc == Boundary::Periodic; }

}  // namespace

EigenPair eigenpair(const DiscreteLaplacian& L, const GridFunction& q, int k,
                    const SpectralOptions& options) {
  require_same_domain(L.domain(), q.domain(), "eigenpair");
  const int N = L.domain().nodes();
  if (k < 1 || k >= N) throw Error(ErrorKind::Precondition, "eigenpair", "index k out of range");
  const FreeSpectrum free = L.free_spectrum(std::max(2, k));
  const double threshold = options.relative_gap * free.gap;

  EigenSolverOptions eo;
  eo.check_multiplicity = may_be_degenerate(L.domain());
  const EigenDecomposition dec = lowest_eigenpairs(L.matrix(), q.values(), k + 1, eo);

  EigenPair out;
  out.k = k;
  out.lambda = dec.values[k - 1];
  out.residual = dec.residuals[k - 1];
  out.gap = dec.values[k] - dec.values[k - 1];
  if (k > 1) out.gap = std::min(out.gap, dec.values[k - 1] - dec.values[k - 2]);
  if (!(out.gap > threshold)) {
    throw Error(ErrorKind::NearDegenerate, "eigenpair",
                "eigenvalue " + std::to_string(k) + " has gap " + std::to_string(out.gap) +
                    " below " + std::to_string(threshold));
  }
  VectorXd phi = dec.vectors[k - 1] / std::sqrt(L.weight());
  const double orient = k == 1 ? phi.sum() : phi.dot(free.pairs[k - 1].psi.values());
  if (orient < 0.0) phi = -phi;
  out.phi = GridFunction(L.domain(), std::move(phi));
  return out;
}

DerivativeProfile derivative_profile(const GridFunction& u, const Nonlinearity& f) {
  const int n = u.size();
  DerivativeProfile p{VectorXd(n), VectorXd(n), VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    const Derivatives d = f(u[i]);
    p.d1[i] = d.d1;
    p.d2[i] = d.d2;
    p.d3[i] = d.d3;
  }
  return p;
}

VectorXd restricted_solve(const DiscreteLaplacian& L, const VectorXd& q, double lambda,
                          const VectorXd& phi, const VectorXd& rhs) {
  const int N = static_cast<int>(q.size());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(L.matrix().nonZeros() + 2 * N + 1);
  const SpMat& A = L.matrix();
  for (int c = 0; c < A.outerSize(); ++c)
    for (SpMat::InnerIterator it(A, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < N; ++i) {
    t.emplace_back(i, i, -q[i] - lambda);
    t.emplace_back(i, N, phi[i]);
    t.emplace_back(N, i, phi[i]);
  }
  SpMat B(N + 1, N + 1);
  B.setFromTriplets(t.begin(), t.end());
  B.makeCompressed();
  Eigen::SparseLU<SpMat> lu;
  lu.compute(B);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularRestriction, "solve_w", "bordered system is singular");
  }
  VectorXd b(N + 1);
  b.head(N) = rhs;
  b[N] = 0.0;
  VectorXd x = lu.solve(b);
  if (!x.allFinite()) throw Error(ErrorKind::SingularRestriction, "solve_w", "non-finite solution");
  // One step of iterative refinement.
  VectorXd r = b - B * x;
  x += lu.solve(r);
  return x.head(N);
}

FunctionalValues functionals(const DiscreteLaplacian& L, const DerivativeProfile& profile, int k,
                             bool second_order, const SpectralOptions& options) {
  const Domain& dom = L.domain();
  FunctionalValues out;
  out.pair = eigenpair(L, GridFunction(dom, profile.d1), k, options);
  const VectorXd& phi = out.pair.phi.values();
  const VectorXd phi2 = phi.cwiseProduct(phi);
  out.lambda = out.pair.lambda;
  out.grad_lambda = GridFunction(dom, -profile.d2.cwiseProduct(phi2));
  out.delta = inner_product(out.grad_lambda, out.pair.phi);
  if (!second_order) return out;

  const VectorXd rhs = profile.d2.cwiseProduct(phi2);
  VectorXd w = restricted_solve(L, profile.d1, out.lambda, phi, rhs);
  VectorXd gd = -profile.d3.cwiseProduct(phi2.cwiseProduct(phi)) -
                3.0 * w.cwiseProduct(profile.d2).cwiseProduct(phi);
  out.w = GridFunction(dom, std::move(w));
  out.grad_delta = GridFunction(dom, std::move(gd));
  out.tau = inner_product(*out.grad_delta, out.pair.phi);
  return out;
}

FunctionalValues functionals(const DiscreteLaplacian& L, const GridFunction& u,
                             const Nonlinearity& f, int k, bool second_order,
                             const SpectralOptions& options) {
  require_same_domain(L.domain(), u.domain(), "functionals");
  return functionals(L, derivative_profile(u, f), k, second_order, options);
}

EigenPair lambda_phi(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f,
                     int k) {
  require_same_domain(L.domain(), u.domain(), "lambda_phi");
  return eigenpair(L, GridFunction(u.domain(), map_values(f, u.values(), 1)), k);
}

GridFunction grad_lambda(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f,
                         int k) {
  return functionals(L, u, f, k, false).grad_lambda;
}

double delta(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f, int k) {
  return functionals(L, u, f, k, false).delta;
}

GridFunction solve_w(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f,
                     int k) {
  return *functionals(L, u, f, k, true).w;
}

GridFunction grad_delta(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f,
                        int k) {
  return *functionals(L, u, f, k, true).grad_delta;
}

double tau(const DiscreteLaplacian& L, const GridFunction& u, const Nonlinearity& f, int k) {
  return *functionals(L, u, f, k, true).tau;
}

std::pair<double, double> Lambda_map(const DiscreteLaplacian& L, const GridFunction& u,
                                     const Nonlinearity& f, int k) {
  const FunctionalValues v = functionals(L, u, f, k, false);
  return {v.lambda, v.delta};
}

Eigen::Matrix2d probe_jacobian(const FunctionalValues& fv, const GridFunction& v1,
                               const GridFunction& v2) {
  if (!fv.grad_delta) throw Error(ErrorKind::Precondition, "independence", "grad delta missing");
  Eigen::Matrix2d M;
  M << inner_product(fv.grad_lambda, v1), inner_product(fv.grad_lambda, v2),
      inner_product(*fv.grad_delta, v1), inner_product(*fv.grad_delta, v2);
  return M;
}

double independence(const FunctionalValues& fv, const GridFunction* v1, const GridFunction* v2) {
  if (!fv.grad_delta) throw Error(ErrorKind::Precondition, "independence", "grad delta missing");
  Eigen::Matrix2d M;
  if (v1 && v2) {
    M = probe_jacobian(fv, *v1, *v2);
  } else {
    const double a = norm(fv.grad_lambda), b = norm(*fv.grad_delta);
    if (a == 0.0 || b == 0.0) return 0.0;
    M = probe_jacobian(fv, fv.grad_lambda * (1.0 / a), *fv.grad_delta * (1.0 / b));
  }
  return Eigen::JacobiSVD<Eigen::Matrix2d>(M).singularValues()[1];
}

}  // namespace apsing
