#include <Eigen/Dense>
#include <cmath>

#include "apsing/error.hpp"
#include "apsing/roots.hpp"
#include "apsing/sector.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace apsing;
using namespace apsing::testing;

namespace {

double dense_lambda(const DiscreteLaplacian& L, const GridFunction& q) {
  Eigen::MatrixXd A = Eigen::MatrixXd(L.matrix());
  A.diagonal() -= q.values();
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues()[0];
}

double total(const GridFunction& g) { return g.values().sum(); }

}  // namespace

TEST_CASE("sector indicator: endpoints, range and monotone measure") {
  const Domain d1 = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 101);
  const Domain d2 = Domain::rectangle(0.0, 1.0, 0.0, 1.0, Boundary::Dirichlet, 41);
  for (const Domain& d : {d1, d2}) {
    const Eigen::Vector2d p = default_apex(d);
    CHECK(sector_indicator(d, p, 0.0).max_abs() == 0.0);
    CHECK((sector_indicator(d, p, kTwoPi).values().array() == 1.0).all());
    double prev = 0.0;
    for (int i = 1; i <= 64; ++i) {
      const GridFunction chi = sector_indicator(d, p, kTwoPi * i / 64.0);
      CHECK(chi.values().minCoeff() >= 0.0);
      CHECK(chi.values().maxCoeff() <= 1.0);
      const double m = total(chi) / d.nodes();
      CHECK(m >= prev - 1e-14);
      // On intervals the cut sweeps the covered span at a uniform rate.
      if (d.dim == 1) CHECK(m == doctest::Approx(i / 64.0).epsilon(1e-12));
      prev = m;
    }
  }
  const SectorPotential half = make_sector_potential(d2, default_apex(d2), kPi, 1.0, 0.0);
  CHECK(std::abs(half.fraction - 0.5) <= d2.hx());
}

TEST_CASE("sector indicator in 2D agrees with a nodal count away from the edges") {
  const Domain d = Domain::rectangle(0.0, 1.0, 0.0, 1.0, Boundary::Dirichlet, 40);
  const Eigen::Vector2d p(0.5, 0.5);  // on a cell corner
  const GridFunction chi = sector_indicator(d, p, 0.5 * kPi);
  int mismatches = 0;
  for (int j = 0; j < d.n; ++j)
    for (int i = 0; i < d.n; ++i) {
      const double x = d.ax + (i + 1) * d.hx() - p.x(), y = d.ay + (j + 1) * d.hy() - p.y();
      const double expected = (x > 0 && y > 0) ? 1.0 : 0.0;
      mismatches += std::abs(chi.values()[j * d.n + i] - expected) > 1e-12;
    }
  CHECK(mismatches == 0);
}

TEST_CASE("endpoint values of the two-valued eigenvalue") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 199);
  const DiscreteLaplacian L = build_laplacian(d);
  const double mu1 = free_eigenpairs(L, 1).pairs[0].mu;
  auto [at0, at2pi] = endpoint_lambda(L, 5.0, 15.0);
  CHECK(at0 == doctest::Approx(mu1 - 15.0).epsilon(1e-12));
  CHECK(at2pi == doctest::Approx(mu1 - 5.0).epsilon(1e-12));
  CHECK(std::abs(two_valued_lambda(L, 5.0, 15.0, default_apex(d), 0.0) - at0) <= 1e-9);
  CHECK(std::abs(two_valued_lambda(L, 5.0, 15.0, default_apex(d), kTwoPi) - at2pi) <= 1e-9);
  auto [z0, z1] = endpoint_lambda(L, mu1, mu1);
  CHECK(std::abs(z0) <= 1e-12);
  CHECK(std::abs(z1) <= 1e-12);
}

TEST_CASE("two-valued eigenvalue is monotone in both levels and in the angle") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 79);
  const DiscreteLaplacian L = build_laplacian(d);
  const Eigen::Vector2d p = default_apex(d);
  const double levels[] = {0.0, 6.0, 12.0, 18.0};
  for (double a : levels)
    for (double b : levels) {
      for (int i = 1; i < 8; ++i) {
        const double th = kTwoPi * i / 8.0;
        const double base = two_valued_lambda(L, a, b, p, th);
        CHECK(two_valued_lambda(L, a + 1.0, b, p, th) < base);
        CHECK(two_valued_lambda(L, a, b + 1.0, p, th) < base);
        const double next = two_valued_lambda(L, a, b, p, th + kTwoPi / 8.0);
        if (b > a) CHECK(next > base);
        if (b < a) CHECK(next < base);
        if (b == a) CHECK(next == doctest::Approx(base).epsilon(1e-10));
      }
    }
}

TEST_CASE("balancing angle") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 199);
  const DiscreteLaplacian L = build_laplacian(d);
  const Eigen::Vector2d p = default_apex(d);
  const double mu1 = free_eigenpairs(L, 1).pairs[0].mu;

  CHECK(balance_theta(L, mu1, 15.0, p).theta == kTwoPi);
  CHECK(balance_theta(L, 15.0, mu1, p).theta == 0.0);

  const BalanceResult b = balance_theta(L, 5.0, 15.0, p);
  CHECK(b.theta > 0.0);
  CHECK(b.theta < kTwoPi);
  CHECK(std::abs(b.lambda) <= 1e-9);

  // Independent oracle: dense eigenvalues under plain bisection.
  const auto dense = [&](double th) {
    return dense_lambda(L, make_sector_potential(d, p, th, 5.0, 15.0).values());
  };
  RootOptions ro;
  ro.x_tol = 1e-12;
  const RootResult oracle = bisect(dense, 0.0, kTwoPi, ro);
  CHECK(std::abs(oracle.x - b.theta) <= 1e-8);
  CHECK(std::abs(dense(b.theta)) <= 1e-9);

  // Same answer from a differently seeded bracket.
  const RootResult reseeded = bisect(dense, 0.3 * b.theta, b.theta + 0.5 * (kTwoPi - b.theta), ro);
  CHECK(std::abs(reseeded.x - b.theta) <= 1e-9);

  // Mirrored levels balance too.
  const BalanceResult m = balance_theta(L, 15.0, 5.0, p);
  CHECK(std::abs(m.lambda) <= 1e-9);

  CHECK_THROWS_AS(balance_theta(L, 1.0, 5.0, p), Error);
  try {
    balance_theta(L, 12.0, 15.0, p);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OutOfDomain);
  }
}

TEST_CASE("balancing angle is continuous in the levels") {
  const Domain d = Domain::rectangle(0.0, 1.0, 0.0, 1.0, Boundary::Dirichlet, 32);
  const DiscreteLaplacian L = build_laplacian(d);
  const Eigen::Vector2d p = default_apex(d);
  const double base = balance_theta(L, 5.0, 30.0, p).theta;
  double prev = 1e9;
  for (double dl : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double gap = std::abs(balance_theta(L, 5.0 + dl, 30.0, p).theta - base);
    CHECK(gap < prev);
    CHECK(gap <= 10.0 * dl);
    prev = gap;
  }
}

TEST_CASE("positive-delta recipe and its mirror") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 199);
  const DiscreteLaplacian L = build_laplacian(d);
  const NonfoldCandidate c = find_positive_delta_nonfold(L, reference_family());
  CHECK(std::abs(c.lambda) <= 1e-8);
  CHECK(c.delta > 0.0);
  CHECK(reference_family().d2(c.potential.left) < 0.0);

  const NonfoldCandidate m = find_positive_delta_nonfold(L, reference_family().mirrored());
  CHECK(std::abs(m.lambda) <= 1e-8);
  CHECK(m.delta > 0.0);

  try {
    find_positive_delta_nonfold(L, convex_family());
    FAIL("convex family has no inflection");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RecipeFailed);
  }
}

TEST_CASE("regular nonfold recipe") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 199);
  const DiscreteLaplacian L = build_laplacian(d);
  const double mu1 = free_eigenpairs(L, 1).pairs[0].mu;
  for (const Nonlinearity& f : {construct_wiggle(mu1, 6.0, 1.5, 0.6), reference_family()}) {
    const NonfoldCandidate c = find_regular_nonfold(L, f);
    CHECK(std::abs(c.lambda) <= 1e-8);
    CHECK(std::abs(c.delta) <= 1e-8);
    CHECK(c.independence > 1e-6);
    CHECK(std::abs(f.d3(c.potential.left)) <= 1e-8);
    // Levels sit on opposite sides of resonance and of the inflection.
    CHECK((f.d1(c.potential.left) - mu1) * (f.d1(c.potential.right) - mu1) < 0.0);
    CHECK(f.d2(c.potential.left) * f.d2(c.potential.right) < 0.0);
  }
  CHECK_THROWS_AS(find_regular_nonfold(L, convex_family()), Error);
}

TEST_CASE("resonant-level nonfold recipe") {
  const Domain d = Domain::interval(0.0, 1.0, Boundary::Dirichlet, 199);
  const DiscreteLaplacian L = build_laplacian(d);
  const FreeSpectrum s = free_eigenpairs(L, 2);
  const double mu1 = s.pairs[0].mu;
  const Nonlinearity f = construct_wiggle(mu1, 6.0, 1.5, 0.6);
  const NonfoldCandidate c = find_nonfold_Hk(L, f, 1);
  CHECK(c.potential.theta > 0.0);
  CHECK(c.potential.theta < kTwoPi);
  CHECK(std::abs(c.lambda) <= 1e-9);
  CHECK(std::abs(c.delta) <= 1e-8);
  CHECK(c.independence > 1e-6);

  // The potential f' is identically mu_1 at every angle.
  for (double th : {0.5, 2.0, 4.0}) {
    const SectorPotential sp =
        make_sector_potential(d, c.potential.p, th, c.potential.left, c.potential.right);
    CHECK(std::abs(functionals(L, sp.profile(f), 1, false).lambda) <= 1e-9);
  }

  // theta = 0: u is the constant right level and delta = -f''(y) * integral psi^3.
  const GridFunction& psi = s.pairs[0].psi;
  const double cube = d.weight() * psi.values().array().cube().sum();
  const GridFunction flat(d, Eigen::VectorXd::Constant(d.nodes(), c.potential.right));
  const double expected = -f.d2(c.potential.right) * cube * (psi.values().sum() > 0 ? 1.0 : -1.0);
  CHECK(functionals(L, flat, f, 1, false).delta == doctest::Approx(expected).epsilon(1e-8));
}
