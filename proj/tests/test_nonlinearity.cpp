#include <cmath>

#include "apsing/domain.hpp"
#include "apsing/error.hpp"
#include "apsing/nonlinearity.hpp"
#include "doctest.h"

using namespace apsing;

namespace {

Nonlinearity reference_family() { return construct_sigmoid_bump(2.0, 15.0, -3.0, 0.5, 5.0); }

SpectrumLevels unit_interval_levels() {
  const auto L = build_laplacian(Domain::interval(0.0, 1.0, Boundary::Dirichlet, 199));
  const FreeSpectrum s = free_eigenpairs(L, 2);
  return {s.pairs[0].mu, s.pairs[1].mu, s.pairs[0].mu};
}

// Observed order of central differences of g against its claimed derivative dg.
template <class G, class DG>
double fd_order(G g, DG dg, double x) {
  auto err = [&](double t) { return std::abs((g(x + t) - g(x - t)) / (2.0 * t) - dg(x)); };
  const double e3 = err(1e-3), e4 = err(1e-4);
  if (e3 < 1e-11) return 2.0;  // exact to rounding
  return std::log10(e3 / e4);
}

void check_derivatives(const Nonlinearity& f, std::initializer_list<double> xs) {
  for (double x : xs) {
    CHECK(fd_order([&](double t) { return f.value(t); }, [&](double t) { return f.d1(t); }, x) > 1.9);
    CHECK(fd_order([&](double t) { return f.d1(t); }, [&](double t) { return f.d2(t); }, x) > 1.9);
    CHECK(fd_order([&](double t) { return f.d2(t); }, [&](double t) { return f.d3(t); }, x) > 1.9);
  }
}

}  // namespace

TEST_CASE("derivative chains are consistent for every family") {
  check_derivatives(reference_family(), {-4.0, -3.1, -2.6, -1.0, 0.3, 2.0});
  check_derivatives(construct_wiggle(9.87, 6.0, 1.0, 0.7), {-0.5, 0.4, 0.9, 1.3, 2.2});
  check_derivatives(construct_poly_clamped(2.0, 15.0, -1.0, 2.0), {-0.6, 0.0, 0.7, 1.5});
  check_derivatives(construct_sigmoid_bump(2.0, 15.0, -3.0, 0.5, 5.0).mirrored(), {-2.0, 0.1, 2.7});
}

TEST_CASE("reference family satisfies the slope hypotheses") {
  const SpectrumLevels lv = unit_interval_levels();
  CHECK(lv.mu1 == doctest::Approx(9.8694).epsilon(1e-3));
  CHECK(lv.mu2 == doctest::Approx(39.47).epsilon(1e-3));
  const Nonlinearity f = reference_family();
  ScanWindow win{-10.0, 10.0, 10001};
  for (int i = 0; i < win.points; ++i) {
    const double x = win.lo + (win.hi - win.lo) * i / (win.points - 1);
    CHECK_MESSAGE(f.d1(x) >= 2.0 - 1e-9, x);
    CHECK_MESSAGE(f.d1(x) <= 15.0 + 1e-9, x);
  }
  const HypothesisReport r = check_hypotheses(f, lv, win);
  CHECK(r.h1);
  CHECK(r.h2);
  CHECK(r.h3);
  CHECK(r.h4);
  CHECK(r.epsilon >= 0.5);
  CHECK(r.epsilon == doctest::Approx(std::min(lv.mu1 - 2.0, 15.0 - lv.mu1)).epsilon(1e-6));
  for (const auto& w : r.inflections) CHECK(std::abs(f.d2(w.x)) <= 1e-10);
}

TEST_CASE("convex controls have no inflection") {
  const SpectrumLevels lv = unit_interval_levels();
  const Nonlinearity flat = construct_sigmoid_bump(2.0, 15.0, -3.0, 0.5, 0.0);
  const Nonlinearity poly = construct_poly_clamped(2.0, 15.0, -2.0, 2.0);
  for (const Nonlinearity* f : {&flat, &poly}) {
    const HypothesisReport r = check_hypotheses(*f, lv, ScanWindow{});
    CHECK_FALSE(r.h3);
    CHECK(r.h1);
    CHECK(r.h4);
    CHECK_THROWS_AS(find_inflection(*f, ScanWindow{}), Error);
  }
}

TEST_CASE("bump leaving the slope range is rejected") {
  try {
    construct_sigmoid_bump(2.0, 15.0, 3.0, 0.5, 5.0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RangeViolation);
  }
}

TEST_CASE("wiggle crosses its level with opposite curvature") {
  const double mu = 9.8696;
  const Nonlinearity f = construct_wiggle(mu, 6.0, 1.5, 0.6);
  CHECK(f.d1(1.5) == mu);
  const HypothesisReport r = check_hypotheses(f, {mu, 39.47, mu}, ScanWindow{}, 1);
  REQUIRE(r.hk);
  CHECK(std::abs(f.d1(*r.x_mu) - mu) < 1e-12);
  CHECK(std::abs(f.d1(*r.y_mu) - mu) < 1e-12);
  CHECK(f.d2(*r.x_mu) < 0.0);
  CHECK(f.d2(*r.y_mu) > 0.0);
  CHECK(f.d3(*r.x_mu) >= 0.0);
  CHECK(f.d3(*r.y_mu) >= 0.0);
  CHECK(r.crossings.size() == 3);

  const HypothesisReport flat = check_hypotheses(construct_wiggle(mu, 1e-12, 1.5, 0.6),
                                                 {mu, 39.47, mu}, ScanWindow{}, 1);
  CHECK_FALSE(flat.hk);
  CHECK_FALSE(flat.h2);
}

TEST_CASE("inflection search") {
  const Nonlinearity f = reference_family();
  const double x = find_inflection(f, ScanWindow{});
  CHECK(std::abs(f.d2(x)) <= 1e-10);
  CHECK(f.d3(x) != 0.0);
  CHECK(x > -4.5);
  CHECK(x < -1.0);
  const Nonlinearity w = construct_wiggle(9.87, 4.0, 0.0, 1.0);
  const double xw = find_inflection(w, ScanWindow{});
  const double s2 = xw * xw;
  // stationary points of the Gaussian factor derivative: 2 s^4 - 5 s^2 + 1 = 0
  CHECK(std::abs(2.0 * s2 * s2 - 5.0 * s2 + 1.0) < 1e-9);
}

TEST_CASE("almost critical points") {
  const double mu = 9.8696;
  const Nonlinearity f = reference_family();
  const double above = find_almost_critical(f, mu, Side::Above, 1e-6);
  CHECK(above > 3.0);
  CHECK(f.d1(above) >= mu + 0.5);
  CHECK(std::abs(f.d2(above)) <= 1e-6);
  const double below = find_almost_critical(f, mu, Side::Below, 1e-6);
  CHECK(below < -3.0);
  CHECK(f.d1(below) <= mu - 0.5);
  CHECK(std::abs(f.d2(below)) <= 1e-6);
  // f' tends to mu at both tails: only the interior maximum qualifies
  const Nonlinearity w = construct_wiggle(mu, 6.0, 0.0, 1.0);
  const double top = find_almost_critical(w, mu, Side::Above, 1e-8);
  CHECK(std::abs(w.d2(top)) <= 1e-8);
  CHECK(w.d1(top) > mu + 0.5);
  CHECK_THROWS_AS(find_almost_critical(construct_linear(3.0), mu, Side::Above, 1e-8), Error);
}

TEST_CASE("hypothesis report is deterministic and refuses coarse scans") {
  const Nonlinearity f = reference_family();
  const SpectrumLevels lv{9.8696, 39.47, 9.8696};
  const HypothesisReport a = check_hypotheses(f, lv, ScanWindow{});
  const HypothesisReport b = check_hypotheses(f, lv, ScanWindow{});
  CHECK(a.h2_gap == b.h2_gap);
  CHECK(a.inflections.size() == b.inflections.size());
  CHECK_THROWS_AS(check_hypotheses(f, lv, ScanWindow{-10, 10, 50}), Error);
}

TEST_CASE("mirrored family keeps the slope range and moves the bump above resonance") {
  const Nonlinearity f = reference_family();
  const Nonlinearity g = f.mirrored();
  CHECK(g.lower_slope() == 2.0);
  CHECK(g.upper_slope() == 15.0);
  CHECK(g.d1(3.0) == doctest::Approx(17.0 - f.d1(-3.0)));
  CHECK(g.d1(20.0) == doctest::Approx(15.0));
  CHECK(g.d1(-20.0) == doctest::Approx(2.0));
}
