#include "apsing/eigensolver.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "apsing/error.hpp"

namespace apsing {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::VectorXd;

double quadratic_form(const SpMat& M, const VectorXd& x) {
  // Extended accumulators: Rayleigh quotients are differenced by callers.
  long double edges = 0.0L, diag = 0.0L;
  for (int col = 0; col < M.outerSize(); ++col) {
    long double rowsum = 0.0L;
    for (SpMat::InnerIterator it(M, col); it; ++it) {
      rowsum += it.value();
      if (it.row() < col) {
        const long double d = static_cast<long double>(x[it.row()]) - x[col];
        edges -= it.value() * d * d;
      }
    }
    // M is symmetric, so the column sum is the row sum.
    diag += rowsum * x[col] * x[col];
  }
  return static_cast<double>(edges + diag);
}

double gershgorin_lower(const SpMat& M) {
  double lo = std::numeric_limits<double>::infinity();
  for (int col = 0; col < M.outerSize(); ++col) {
    double d = 0.0, off = 0.0;
    for (SpMat::InnerIterator it(M, col); it; ++it) {
      if (it.row() == col) d += it.value();
      else off += std::abs(it.value());
    }
    lo = std::min(lo, d - off);
  }
  return lo;
}

namespace {

double inf_norm(const SpMat& M) {
  double best = 0.0;
  for (int col = 0; col < M.outerSize(); ++col) {
    double s = 0.0;
    for (SpMat::InnerIterator it(M, col); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

// Deterministic start: ones plus an asymmetric ripple so that odd modes of
// symmetric problems are not missed.
VectorXd start_vector(int n) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / std::max(1, n - 1);
    v[i] = 1.0 + 0.3 * std::sin(7.31 * s + 0.4) + 0.2 * s * s + 0.05 * std::cos(29.7 * s);
  }
  return v;
}

void orthogonalize(VectorXd& v, const std::vector<VectorXd>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) v -= b.dot(v) * b;
}

struct Ritz {
  std::vector<double> mu;
  std::vector<VectorXd> x;
  std::vector<double> estimate;
};

// Lanczos on K^{-1} = (M - sigma)^{-1} restricted to the complement of `locked`.
Ritz lanczos(const Eigen::SimplicialLDLT<SpMat>& solver, double sigma, int n, int want,
             const std::vector<VectorXd>& locked) {
  const int limit = n - static_cast<int>(locked.size());
  int steps = std::min(limit, std::max(40, 4 * (want + 1) + 20));
  VectorXd v0 = start_vector(n);
  orthogonalize(v0, locked);
  if (v0.norm() == 0.0) return {};
  for (;;) {
    std::vector<VectorXd> Q;
    std::vector<double> alpha, beta;
    Q.reserve(steps);
    Q.push_back(v0 / v0.norm());
    bool breakdown = false;
    double beta_last = 0.0;
    for (int j = 0; j < steps; ++j) {
      VectorXd w = solver.solve(Q[j]);
      orthogonalize(w, locked);
      const double a = Q[j].dot(w);
      alpha.push_back(a);
      w -= a * Q[j];
      if (j > 0) w -= beta.back() * Q[j - 1];
      orthogonalize(w, Q);
      const double b = w.norm();
      beta_last = b;
      if (j + 1 == steps) break;
      if (b <= 1e-13 * std::abs(a)) {
        breakdown = true;
        break;
      }
      beta.push_back(b);
      Q.push_back(w / b);
    }
    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) T(i, i) = alpha[i];
    for (int i = 0; i + 1 < m; ++i) T(i, i + 1) = T(i + 1, i) = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri(T);
    const int got = std::min(want, m);
    Ritz r;
    bool converged = true;
    for (int c = 0; c < got; ++c) {
      const int idx = m - 1 - c;  // largest theta gives the lowest mu
      const double theta = tri.eigenvalues()[idx];
      const double est = breakdown ? 0.0 : std::abs(beta_last * tri.eigenvectors()(m - 1, idx));
      if (est > 1e-9 * std::abs(theta)) converged = false;
      VectorXd x = VectorXd::Zero(n);
      for (int i = 0; i < m; ++i) x += tri.eigenvectors()(i, idx) * Q[i];
      r.mu.push_back(sigma + 1.0 / theta);
      r.x.push_back(x.normalized());
      r.estimate.push_back(est);
    }
    if (converged || breakdown || steps >= limit) return r;
    steps = std::min(limit, 2 * steps);
  }
}

// Two inverse-iteration steps at a shift just below the Ritz value, then
// correction steps whose residual comes from `residual` (more accurate than
// M x): d solves (M - shift) d = -r, its x component is dropped.
template <class Residual>
VectorXd polish(const SpMat& M, double mu, const VectorXd& x, double scale, Residual&& residual) {
  SpMat S = M;
  const double shift = mu - 1e-10 * scale;
  for (int i = 0; i < S.rows(); ++i) S.coeffRef(i, i) -= shift;
  S.makeCompressed();
  Eigen::SparseLU<SpMat> lu;
  lu.compute(S);
  if (lu.info() != Eigen::Success) return x;
  VectorXd y = x;
  for (int it = 0; it < 2; ++it) {
    VectorXd z = lu.solve(y);
    if (!z.allFinite() || z.norm() == 0.0) return y;
    y = z / z.norm();
  }
  for (int it = 0; it < 2; ++it) {
    const VectorXd r = residual(y);
    VectorXd d = lu.solve(r);
    if (!d.allFinite()) break;
    d -= d.dot(y) * y;
    VectorXd z = y - d;
    y = z / z.norm();
  }
  if (y.dot(x) < 0.0) y = -y;
  return y;
}

}  // namespace

EigenDecomposition lowest_eigenpairs(const SpMat& A, const VectorXd& potential, int count,
                                     const EigenSolverOptions& options) {
  const int n = static_cast<int>(A.rows());
  if (count < 1 || count > n) {
    throw Error(ErrorKind::Precondition, "eigensolver",
                "count must be in [1, " + std::to_string(n) + "]");
  }
  if (potential.size() != n) {
    throw Error(ErrorKind::DomainMismatch, "eigensolver", "potential length differs from matrix");
  }
  SpMat M = A;
  for (int i = 0; i < n; ++i) M.coeffRef(i, i) -= potential[i];
  M.makeCompressed();
  // Rayleigh quotients use A and the potential separately; the rounded
  // diagonal of M would add noise of order eps * ||A||.
  auto rayleigh = [&](const VectorXd& x) {
    long double pot = 0.0L;
    for (int i = 0; i < n; ++i) pot += static_cast<long double>(potential[i]) * x[i] * x[i];
    return (quadratic_form(A, x) - static_cast<double>(pot)) / x.squaredNorm();
  };
  // (A - diag(q) - rho) x with A applied in difference form, rho the Rayleigh
  // quotient; rounding scales with the differences of x, not with |A| |x|.
  auto residual = [&](const VectorXd& x) {
    const long double rho = rayleigh(x);
    VectorXd r(n);
    for (int col = 0; col < A.outerSize(); ++col) {
      long double acc = 0.0L, rowsum = 0.0L;
      for (SpMat::InnerIterator it(A, col); it; ++it) {
        rowsum += it.value();
        if (it.row() != col) acc -= it.value() * (static_cast<long double>(x[col]) - x[it.row()]);
      }
      acc += rowsum * x[col];
      r[col] = static_cast<double>(acc - (static_cast<long double>(potential[col]) + rho) * x[col]);
    }
    return r;
  };
  const double scale = std::max(1.0, inf_norm(M));
  const double sigma = gershgorin_lower(M) - 1.0;
  SpMat K = M;
  for (int i = 0; i < n; ++i) K.coeffRef(i, i) -= sigma;
  K.makeCompressed();
  Eigen::SimplicialLDLT<SpMat> solver(K);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NoConvergence, "eigensolver", "shifted factorization failed");
  }

  std::vector<VectorXd> found;
  std::vector<double> values;
  auto absorb = [&](const Ritz& r) {
    for (size_t c = 0; c < r.x.size(); ++c) {
      VectorXd x = polish(M, r.mu[c], r.x[c], scale, residual);
      orthogonalize(x, found);
      const double nx = x.norm();
      if (nx < 1e-8) continue;
      x /= nx;
      found.push_back(x);
      values.push_back(rayleigh(x));
    }
  };
  absorb(lanczos(solver, sigma, n, count, {}));

  auto sort_pairs = [&]() {
    std::vector<int> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return values[a] < values[b]; });
    std::vector<VectorXd> fx;
    std::vector<double> fv;
    for (int i : order) {
      fx.push_back(found[i]);
      fv.push_back(values[i]);
    }
    found.swap(fx);
    values.swap(fv);
  };
  sort_pairs();

  // Missing copies of a degenerate eigenvalue live in the complement of what
  // was found; a second Krylov space there reveals them.
  if (options.check_multiplicity && count >= 2) {
    for (int round = 0; round < count && static_cast<int>(found.size()) < n; ++round) {
      const double top = values.size() >= static_cast<size_t>(count) ? values[count - 1]
                                                                      : values.back();
      Ritz extra = lanczos(solver, sigma, n, 1, found);
      if (extra.mu.empty()) break;
      const double gap_tol = 1e-8 * std::max(1.0, std::abs(top));
      if (static_cast<int>(values.size()) >= count && extra.mu[0] > top + gap_tol) break;
      const size_t before = found.size();
      absorb(extra);
      if (found.size() == before) break;
      sort_pairs();
    }
    if (static_cast<int>(found.size()) < count) {
      Ritz more = lanczos(solver, sigma, n, count - static_cast<int>(found.size()), found);
      absorb(more);
      sort_pairs();
    }
  }
  if (static_cast<int>(found.size()) < count) {
    throw Error(ErrorKind::NoConvergence, "eigensolver",
                "found " + std::to_string(found.size()) + " of " + std::to_string(count) +
                    " eigenpairs");
  }

  EigenDecomposition out;
  for (int c = 0; c < count; ++c) {
    out.values.push_back(values[c]);
    out.vectors.push_back(found[c]);
    out.residuals.push_back((M * found[c] - values[c] * found[c]).norm());
  }
  return out;
}

}  // namespace apsing
