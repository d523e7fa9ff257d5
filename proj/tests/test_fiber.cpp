#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "apsing/error.hpp"
#include "apsing/fiber.hpp"
#include "apsing/spectral.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace apsing;
using namespace apsing::testing;

namespace {

struct Setup {
  Domain d;
  DiscreteLaplacian L;
  GridFunction psi;
  double mu1;
  explicit Setup(int n)
      : d(Domain::interval(0.0, 1.0, Boundary::Dirichlet, n)), L(build_laplacian(d)) {
    const FreeSpectrum s = free_eigenpairs(L, 2);
    psi = s.pairs[0].psi;
    mu1 = s.pairs[0].mu;
  }
};

GridFunction random_z(const Setup& s, std::mt19937& rng, double amp) {
  return project_z(s.L, smooth_random(s.d, rng, 0.0, amp)).first;
}

}  // namespace

TEST_CASE("vertical projection") {
  Setup s(99);
  auto [z0, s0] = project_z(s.L, s.psi);
  CHECK(z0.max_abs() < 1e-12);
  CHECK(s0 == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937 rng(3);
  const GridFunction g = smooth_random(s.d, rng, 1.0, 2.0);
  auto [z, c] = project_z(s.L, g);
  CHECK(std::abs(inner_product(z, s.psi)) <= 1e-12);
  CHECK(norm(z + c * s.psi - g) <= 1e-12);

  auto [z2, c2] = project_z(s.L, z);
  CHECK(std::abs(c2) <= 1e-12);
  CHECK(norm(z2 - z) <= 1e-12);
}

TEST_CASE("linear nonlinearity: flat fibers and affine heights") {
  Setup s(99);
  const double c = 4.0;
  const Nonlinearity f = construct_linear(c);
  const GridFunction zero(s.d);
  for (double t : {-3.0, 0.0, 2.5}) {
    const FiberPoint p = fiber_solve(s.L, f, zero, t);
    CHECK(p.w.max_abs() <= 1e-10);
    CHECK(p.h == doctest::Approx((s.mu1 - c) * t).epsilon(1e-10));
    CHECK(p.lambda1 == doctest::Approx(s.mu1 - c).epsilon(1e-9));
  }

  // Nonzero z: w = (A - c)^{-1} z restricted to W, independent of t.
  std::mt19937 rng(5);
  const GridFunction z = random_z(s, rng, 3.0);
  Eigen::MatrixXd J = Eigen::MatrixXd(s.L.matrix());
  J.diagonal().array() -= c;
  const Eigen::VectorXd oracle = J.ldlt().solve(z.values());
  for (double t : {-1.0, 4.0}) {
    const FiberPoint p = fiber_solve(s.L, f, z, t);
    CHECK((p.w.values() - oracle).lpNorm<Eigen::Infinity>() <= 1e-9 * oracle.lpNorm<Eigen::Infinity>());
  }

  const FiberTrace tr = trace_fiber(s.L, f, z, -2.0, 2.0);
  CHECK(fiber_critical_points(s.L, f, tr).empty());
  for (size_t i = 1; i < tr.points.size(); ++i) {
    const double slope = (tr.points[i].h - tr.points[i - 1].h) / (tr.points[i].t - tr.points[i - 1].t);
    CHECK(slope == doctest::Approx(s.mu1 - c).epsilon(1e-8));
  }
}

TEST_CASE("fiber points satisfy residual, orthogonality and both height formulas") {
  Setup s(199);
  std::mt19937 rng(11);
  const Nonlinearity f = reference_family();
  for (int rep = 0; rep < 4; ++rep) {
    const GridFunction z = random_z(s, rng, 20.0);
    for (double t : {-6.0, -1.0, 0.5, 4.0}) {
      const FiberPoint p = fiber_solve(s.L, f, z, t);
      auto [image_z, image_h] = project_z(s.L, apply_F(p.u, f, s.L));
      CHECK(norm(image_z - z) <= 1e-9);
      CHECK(p.newton_residual <= 1e-9);
      CHECK(std::abs(inner_product(p.w, s.psi)) <= 1e-10);
      CHECK(std::abs(p.h - height(s.L, f, p.u)) <= 1e-10 * std::max(1.0, std::abs(p.h)));
      CHECK(std::abs(height(s.L, f, p.u) - height_alt(s.L, f, p.u)) <= 1e-9 * std::max(1.0, std::abs(p.h)));
      CHECK(image_h == doctest::Approx(p.h).epsilon(1e-10));
    }
  }
}

TEST_CASE("continuation steps converge in a few Newton iterations") {
  Setup s(199);
  std::mt19937 rng(13);
  const Nonlinearity f = reference_family();
  const GridFunction z = random_z(s, rng, 10.0);
  const FiberTrace tr = trace_fiber(s.L, f, z, -8.0, 8.0);
  REQUIRE(tr.points.size() >= 21);
  for (size_t i = 1; i < tr.points.size(); ++i) {
    CHECK(tr.points[i].t > tr.points[i - 1].t);
    CHECK(tr.points[i].iterations <= 8);
    CHECK(tr.points[i].newton_residual <= 1e-9);
  }
  CHECK(tr.points.back().t == 8.0);
}

TEST_CASE("convex family: one critical point, a maximum of the height") {
  Setup s(199);
  const Nonlinearity f = convex_family();
  std::mt19937 rng(17);
  for (int rep = 0; rep < 3; ++rep) {
    const GridFunction z = rep == 0 ? GridFunction(s.d) : random_z(s, rng, 10.0);
    const FiberTrace tr = trace_fiber(s.L, f, z, -12.0, 12.0);
    int changes = 0;
    for (size_t i = 1; i < tr.points.size(); ++i)
      changes += (tr.points[i].lambda1 > 0) != (tr.points[i - 1].lambda1 > 0);
    CHECK(changes == 1);
    const auto crit = fiber_critical_points(s.L, f, tr);
    REQUIRE(crit.size() == 1);
    const CriticalPoint& c = crit[0];
    CHECK(std::abs(c.point.lambda1) <= 1e-9);
    CHECK(c.delta < 0.0);
    CHECK(c.alignment > 0.99);
    CHECK(std::abs(c.point.slope) <= 1e-7);
    for (const FiberPoint& p : tr.points) CHECK(p.h <= c.point.h + 1e-12);
  }
}

TEST_CASE("height slope has the sign of lambda_1") {
  Setup s(149);
  std::mt19937 rng(19);
  for (const Nonlinearity& f : {convex_family(), reference_family()}) {
    const GridFunction z = random_z(s, rng, 15.0);
    const FiberTrace tr = trace_fiber(s.L, f, z, -10.0, 10.0);
    for (const FiberPoint& p : tr.points) {
      if (std::abs(p.lambda1) <= 1e-6) continue;
      const double eta = 1e-4;
      const double hp = fiber_solve(s.L, f, z, p.t + eta, &p.w).h;
      const double hm = fiber_solve(s.L, f, z, p.t - eta, &p.w).h;
      const double fd = (hp - hm) / (2 * eta);
      CHECK((fd > 0) == (p.lambda1 > 0));
      CHECK((p.slope > 0) == (p.lambda1 > 0));
      CHECK(fd == doctest::Approx(p.slope).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("heights decay linearly in both directions") {
  Setup s(149);
  const Nonlinearity f = reference_family();
  const SpectrumLevels lv{s.mu1, free_eigenpairs(s.L, 2).pairs[1].mu, s.mu1};
  const HypothesisReport rep = check_hypotheses(f, lv, ScanWindow{});
  REQUIRE(rep.h4);
  const double C = asymptotic_height_constant(s.L, f, rep.epsilon);
  std::mt19937 rng(23);
  for (int k = 0; k < 3; ++k) {
    const GridFunction z = random_z(s, rng, 10.0);
    const FiberTrace tr = trace_fiber(s.L, f, z, -40.0, 40.0);
    for (const FiberPoint& p : tr.points)
      CHECK(p.h <= -0.5 * rep.epsilon * std::abs(p.t) + C + 1e-9);
  }
}

TEST_CASE("distinct fibers stay apart") {
  Setup s(99);
  const Nonlinearity f = reference_family();
  std::mt19937 rng(29);
  for (int k = 0; k < 3; ++k) {
    const GridFunction z1 = random_z(s, rng, 10.0), z2 = random_z(s, rng, 10.0);
    const FiberTrace a = trace_fiber(s.L, f, z1, -5.0, 5.0);
    const FiberTrace b = trace_fiber(s.L, f, z2, -5.0, 5.0);
    for (const FiberPoint& p : a.points)
      for (const FiberPoint& q : b.points) {
        auto [zp, hp] = project_z(s.L, apply_F(p.u, f, s.L));
        auto [zq, hq] = project_z(s.L, apply_F(q.u, f, s.L));
        CHECK(norm(zp - zq) >= 0.5 * norm(z1 - z2));
      }
  }
}

TEST_CASE("fiber_solve rejects a vertical z and reports stalls") {
  Setup s(49);
  CHECK_THROWS_AS(fiber_solve(s.L, reference_family(), s.psi, 0.0), Error);
  FiberOptions starved;
  starved.max_iterations = 1;
  std::mt19937 rng(31);
  const GridFunction z = random_z(s, rng, 30.0);
  try {
    fiber_solve(s.L, reference_family(), z, 3.0, nullptr, starved);
    FAIL("expected no-convergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoConvergence);
  }
}
