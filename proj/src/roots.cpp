#include "apsing/roots.hpp"

#include <algorithm>
#include <cmath>

#include "apsing/error.hpp"

namespace apsing {
namespace {

bool opposite(double a, double b) { return (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0); }

void require_bracket(double f_lo, double f_hi, double lo, double hi) {
  if (!(f_lo == 0.0 || f_hi == 0.0 || opposite(f_lo, f_hi))) {
    throw Error(ErrorKind::NoBracket, "find_root",
                "f(" + std::to_string(lo) + ")=" + std::to_string(f_lo) + " and f(" +
                    std::to_string(hi) + ")=" + std::to_string(f_hi) + " share a sign");
  }
}

}  // namespace

RootResult find_root(const std::function<double(double)>& f, double lo, double hi,
                     const RootOptions& options) {
  return find_root(f, lo, hi, f(lo), f(hi), options);
}

RootResult find_root(const std::function<double(double)>& f, double lo, double hi,
                     double f_lo, double f_hi, const RootOptions& options) {
  require_bracket(f_lo, f_hi, lo, hi);
  if (f_lo == 0.0) return {lo, 0.0, lo, lo, 0};
  if (f_hi == 0.0) return {hi, 0.0, hi, hi, 0};

  double a = lo, b = hi, fa = f_lo, fb = f_hi;
  int side = 0;
  RootResult best{std::abs(fa) < std::abs(fb) ? a : b, std::abs(fa) < std::abs(fb) ? fa : fb,
                  a, b, 0};
  for (int it = 1; it <= options.max_iterations; ++it) {
    double x = (a * fb - b * fa) / (fb - fa);
    const double lo_edge = std::min(a, b), hi_edge = std::max(a, b);
    if (!(x > lo_edge && x < hi_edge) || !std::isfinite(x)) x = 0.5 * (a + b);
    const double fx = f(x);
    best.iterations = it;
    if (std::abs(fx) < std::abs(best.fx)) {
      best.x = x;
      best.fx = fx;
    }
    if (fx == 0.0) {
      best.lo = best.hi = x;
      return best;
    }
    if (opposite(fx, fb)) {
      a = b;
      fa = fb;
      b = x;
      fb = fx;
      side = 0;
    } else {
      b = x;
      fb = fx;
      fa *= 0.5;  // Illinois step
      if (++side >= 2) {
        // Stagnating on one side: force a bisection step.
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (std::abs(fm) < std::abs(best.fx)) {
          best.x = m;
          best.fx = fm;
        }
        if (opposite(fm, fb)) {
          a = b;
          fa = fb;
        }
        b = m;
        fb = fm;
        side = 0;
        if (fm == 0.0) {
          best.lo = best.hi = m;
          return best;
        }
      }
    }
    best.lo = std::min(a, b);
    best.hi = std::max(a, b);
    if (options.f_tol > 0.0 && std::abs(best.fx) <= options.f_tol) return best;
    if (std::abs(b - a) <= options.x_tol) {
      return best;
    }
  }
  return best;
}

RootResult bisect(const std::function<double(double)>& f, double lo, double hi,
                  const RootOptions& options) {
  double f_lo = f(lo), f_hi = f(hi);
  require_bracket(f_lo, f_hi, lo, hi);
  if (f_lo == 0.0) return {lo, 0.0, lo, lo, 0};
  if (f_hi == 0.0) return {hi, 0.0, hi, hi, 0};
  RootResult r{lo, f_lo, lo, hi, 0};
  for (int it = 1; it <= options.max_iterations; ++it) {
    const double m = 0.5 * (lo + hi);
    if (m <= std::min(lo, hi) || m >= std::max(lo, hi)) return r;  // bracket at rounding
    const double fm = f(m);
    r.iterations = it;
    r.x = m;
    r.fx = fm;
    if (fm == 0.0) {
      r.lo = r.hi = m;
      return r;
    }
    if (opposite(fm, f_lo)) {
      hi = m;
      f_hi = fm;
    } else {
      lo = m;
      f_lo = fm;
    }
    r.lo = lo;
    r.hi = hi;
    if (options.f_tol > 0.0 && std::abs(fm) <= options.f_tol) return r;
    if (std::abs(hi - lo) <= options.x_tol) return r;
  }
  return r;
}

}  // namespace apsing
