#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "apsing/error.hpp"
#include "apsing/spectral.hpp"
#include "doctest.h"

using namespace apsing;

namespace {

const double kPi = std::acos(-1.0);

Nonlinearity reference_family() { return construct_sigmoid_bump(2.0, 15.0, -3.0, 0.5, 5.0); }

GridFunction smooth_random(const Domain& d, std::mt19937& rng, double mean, double amp) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double a[5];
  for (double& c : a) c = U(rng);
  return GridFunction::sample(d, [&](double x, double) {
    double s = mean;
    for (int k = 0; k < 5; ++k) s += amp * a[k] * std::cos((k + 1) * kPi * x + 0.3 * k) / (k + 1);
    return s;
  });
}

// Dense oracle: lowest eigenpair of A - diag(q), weighted-normalized, positive sum.
std::pair<double, Eigen::VectorXd> dense_ground(const DiscreteLaplacian& L, const Eigen::VectorXd& q) {
  Eigen::MatrixXd M = Eigen::MatrixXd(L.matrix());
  M.diagonal() -= q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  Eigen::VectorXd v = es.eigenvectors().col(0) / std::sqrt(L.weight());
  if (v.sum() < 0) v = -v;
  return {es.eigenvalues()[0], v};
}

double order(double e3, double e4) { return std::log10(e3 / e4); }

}  // namespace

TEST_CASE("constant potential shifts the free spectrum") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 199);
  const auto L = build_laplacian(d);
  const FreeSpectrum s = free_eigenpairs(L, 2);
  for (double c : {-7.0, -1.0, 0.0, 3.3, 9.0, 20.0}) {
    const EigenPair p = eigenpair(L, GridFunction::constant(d, c), 1);
    CHECK(std::abs(p.lambda - (s.pairs[0].mu - c)) <= 1e-9);
    CHECK(norm(p.phi - s.pairs[0].psi) < 1e-9);
    CHECK(p.residual <= 1e-10);
    const EigenPair p2 = eigenpair(L, GridFunction::constant(d, c), 2);
    CHECK(std::abs(p2.lambda - (s.pairs[1].mu - c)) <= 1e-8);
    CHECK(inner_product(p2.phi, s.pairs[1].psi) > 0.0);
  }
}

TEST_CASE("two-valued potential matches the dense oracle") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 199);
  const auto L = build_laplacian(d);
  const GridFunction q = GridFunction::sample(d, [](double x, double) { return x < 0.37 ? 5.0 : 15.0; });
  const EigenPair p = eigenpair(L, q, 1);
  const auto [lam, vec] = dense_ground(L, q.values());
  CHECK(std::abs(p.lambda - lam) <= 1e-9);
  CHECK((p.phi.values() - vec).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((p.phi.values().array() > 0.0).all());
  CHECK(std::abs(norm(p.phi) - 1.0) < 1e-10);
}

TEST_CASE("larger potential lowers the ground eigenvalue") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Neumann, 80);
  const auto L = build_laplacian(d);
  std::mt19937 rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    const GridFunction q1 = smooth_random(d, rng, 3.0, 2.0);
    const GridFunction bump = GridFunction::sample(d, [](double x, double) { return x > 0.6 ? 0.5 : 0.0; });
    CHECK(eigenpair(L, q1, 1).lambda > eigenpair(L, q1 + bump, 1).lambda);
  }
}

TEST_CASE("lambda_phi at a resonant constant") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 120);
  const auto L = build_laplacian(d);
  const FreeSpectrum s = free_eigenpairs(L, 2);
  const Nonlinearity f = construct_wiggle(s.pairs[0].mu, 5.0, 1.0, 0.5);
  const EigenPair p = lambda_phi(L, GridFunction::constant(d, 1.0), f, 1);
  CHECK(std::abs(p.lambda) <= 1e-9);
  CHECK(norm(p.phi - s.pairs[0].psi) < 1e-9);
  const Nonlinearity f2 = construct_wiggle(s.pairs[1].mu, 5.0, 1.0, 0.5);
  const EigenPair p2 = lambda_phi(L, GridFunction::constant(d, 1.0), f2, 2);
  CHECK(std::abs(p2.lambda) <= 1e-9);
  CHECK(norm(p2.phi - s.pairs[1].psi) < 1e-9);
}

TEST_CASE("Lambda at a resonant constant is (0, -f''(c) int psi^3)") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 150);
  const auto L = build_laplacian(d);
  const FreeSpectrum s = free_eigenpairs(L, 1);
  const Nonlinearity f = construct_wiggle(s.pairs[0].mu, 5.0, 1.0, 0.5);
  const auto [lam, del] = Lambda_map(L, GridFunction::constant(d, 1.0), f, 1);
  const Eigen::VectorXd psi = s.pairs[0].psi.values();
  const double int_psi3 = d.weight() * psi.array().cube().sum();
  CHECK(std::abs(lam) <= 1e-9);
  CHECK(del == doctest::Approx(-f.d2(1.0) * int_psi3).epsilon(1e-9));
}

TEST_CASE("signs of delta for convex and linear nonlinearities") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 100);
  const auto L = build_laplacian(d);
  std::mt19937 rng(2);
  const Nonlinearity convex = construct_poly_clamped(2.0, 15.0, -2.0, 2.0);
  for (int rep = 0; rep < 5; ++rep) {
    const GridFunction u = smooth_random(d, rng, 0.0, 1.5);
    CHECK(delta(L, u, convex) < 0.0);
    CHECK(delta(L, u, construct_linear(4.0)) == 0.0);
    CHECK(grad_lambda(L, u, construct_linear(4.0)).max_abs() == 0.0);
    CHECK(solve_w(L, u, construct_linear(4.0)).max_abs() == 0.0);
    CHECK(tau(L, u, construct_linear(4.0)) == 0.0);
  }
  const auto [lam, del] = Lambda_map(L, GridFunction::constant(d, -1.0), convex);
  CHECK(lam > 0.0);
  CHECK(del < 0.0);
}

TEST_CASE("w solves the restricted system and matches a dense bordered solve") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 90);
  const auto L = build_laplacian(d);
  const Nonlinearity f = construct_quadratic(1.5, 2.0);  // f'' = 3, f''' = 0
  const GridFunction u = GridFunction::constant(d, 1.2);
  const FunctionalValues v = functionals(L, u, f, 1, true);
  const Eigen::VectorXd phi = v.pair.phi.values();
  const int N = d.nodes();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(N + 1, N + 1);
  B.topLeftCorner(N, N) = Eigen::MatrixXd(L.matrix());
  B.topLeftCorner(N, N).diagonal().array() -= f.d1(1.2) + v.lambda;
  B.block(0, N, N, 1) = phi;
  B.block(N, 0, 1, N) = phi.transpose();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + 1);
  rhs.head(N) = 3.0 * phi.cwiseProduct(phi);
  const Eigen::VectorXd x = B.fullPivLu().solve(rhs);
  CHECK((v.w->values() - x.head(N)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(inner_product(*v.w, v.pair.phi)) <= 1e-10);
  // gradient of delta reduces to -3 w f'' phi when f''' = 0
  const Eigen::VectorXd expect = -3.0 * 3.0 * v.w->values().cwiseProduct(phi);
  CHECK((v.grad_delta->values() - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("restricted residual and orthogonality for a nonlinear u") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 199);
  const auto L = build_laplacian(d);
  std::mt19937 rng(9);
  const Nonlinearity f = reference_family();
  const GridFunction u = smooth_random(d, rng, -2.5, 1.0);
  const FunctionalValues v = functionals(L, u, f, 1, true);
  const GridFunction& phi = v.pair.phi;
  GridFunction rhs(d, derivative_profile(u, f).d2.cwiseProduct(phi.values().cwiseProduct(phi.values())));
  rhs = rhs - phi * inner_product(rhs, phi);
  const GridFunction res = apply_jacobian(u, f, L, *v.w) - *v.w * v.lambda - rhs;
  CHECK(norm(res) <= 1e-9);
  CHECK(std::abs(inner_product(*v.w, phi)) <= 1e-10);
  CHECK(v.delta == doctest::Approx(inner_product(v.grad_lambda, phi)).epsilon(1e-12));
  CHECK(*v.tau == doctest::Approx(inner_product(*v.grad_delta, phi)).epsilon(1e-12));
}

TEST_CASE("finite differences confirm the gradients of lambda and delta") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 63);
  const auto L = build_laplacian(d);
  const Nonlinearity f = reference_family();
  std::mt19937 rng(42);
  for (int rep = 0; rep < 6; ++rep) {
    const GridFunction u = smooth_random(d, rng, -2.4, 1.2);
    const GridFunction v = smooth_random(d, rng, 0.0, 1.0);
    const FunctionalValues base = functionals(L, u, f, 1, true);
    const double gl = inner_product(base.grad_lambda, v);
    const double gd = inner_product(*base.grad_delta, v);
    auto diff = [&](double t) {
      const auto p = Lambda_map(L, u + v * t, f);
      const auto m = Lambda_map(L, u - v * t, f);
      return std::pair{(p.first - m.first) / (2 * t), (p.second - m.second) / (2 * t)};
    };
    const auto d3 = diff(1e-3), d4 = diff(1e-4);
    CHECK(order(std::abs(d3.first - gl), std::abs(d4.first - gl)) >= 1.9);
    CHECK(order(std::abs(d3.second - gd), std::abs(d4.second - gd)) >= 1.9);
  }
}

TEST_CASE("tau matches a nested difference of delta along phi") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 63);
  const auto L = build_laplacian(d);
  const Nonlinearity f = reference_family();
  std::mt19937 rng(4);
  const GridFunction u = smooth_random(d, rng, -2.6, 0.8);
  const FunctionalValues base = functionals(L, u, f, 1, true);
  auto fd = [&](double t) {
    return (delta(L, u + base.pair.phi * t, f) - delta(L, u - base.pair.phi * t, f)) / (2 * t);
  };
  const double e3 = std::abs(fd(1e-3) - *base.tau), e4 = std::abs(fd(1e-4) - *base.tau);
  CHECK(e4 < 1e-5 * std::max(1.0, std::abs(*base.tau)));
  CHECK(order(e3, e4) >= 1.9);
}

TEST_CASE("second eigenpair on a periodic interval is rejected as degenerate") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Periodic, 64);
  const auto L = build_laplacian(d);
  try {
    eigenpair(L, GridFunction::constant(d, 1.0), 2);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NearDegenerate);
  }
  CHECK_NOTHROW(eigenpair(L, GridFunction::constant(d, 1.0), 1));
}

TEST_CASE("eigenvalue is continuous in u") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 100);
  const auto L = build_laplacian(d);
  const Nonlinearity f = reference_family();
  std::mt19937 rng(8);
  const GridFunction u = smooth_random(d, rng, -2.0, 1.0);
  const GridFunction v = smooth_random(d, rng, 0.0, 1.0);
  const double l0 = lambda_phi(L, u, f).lambda;
  double bound = 0.0;
  for (const Eigen::Index i : {0}) (void)i;
  for (int i = 0; i < d.nodes(); ++i) bound = std::max(bound, std::abs(f.d2(u[i])));
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const double l1 = lambda_phi(L, u + v * eps, f).lambda;
    CHECK(std::abs(l1 - l0) <= 2.0 * bound * v.max_abs() * eps);
  }
}
