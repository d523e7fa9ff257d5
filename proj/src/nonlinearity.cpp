#include "apsing/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "apsing/error.hpp"
#include "apsing/roots.hpp"

namespace apsing {

Nonlinearity::Nonlinearity(std::string family, std::map<std::string, double> parameters,
                           double lower_slope, double upper_slope, Evaluator evaluator)
    : family_(std::move(family)),
      parameters_(std::move(parameters)),
      lower_slope_(lower_slope),
      upper_slope_(upper_slope),
      evaluator_(std::move(evaluator)) {}

Nonlinearity Nonlinearity::mirrored() const {
  const double s = lower_slope_ + upper_slope_;
  Evaluator base = evaluator_;
  return Nonlinearity("mirrored_" + family_, parameters_, lower_slope_, upper_slope_,
                      [base, s](double x) {
                        const Derivatives d = base(-x);
                        return Derivatives{s * x + d.f, s - d.d1, d.d2, -d.d3};
                      });
}

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

void check_slope_range(const Nonlinearity& f, const ScanWindow& window, const char* stage) {
  const int pts = std::max(window.points, 10001);
  for (int i = 0; i < pts; ++i) {
    const double x = window.lo + (window.hi - window.lo) * i / (pts - 1);
    const double s = f.d1(x);
    if (!std::isfinite(s) || s < f.lower_slope() - 1e-9 || s > f.upper_slope() + 1e-9) {
      throw Error(ErrorKind::RangeViolation, stage,
                  "f'(" + std::to_string(x) + ") = " + std::to_string(s) + " leaves [" +
                      std::to_string(f.lower_slope()) + ", " + std::to_string(f.upper_slope()) +
                      "]");
    }
  }
}

// max |s (s^2-1) exp(-s^2)|, attained at s^2 = (5 - sqrt 17)/4
double wiggle_peak() {
  const double s = std::sqrt((5.0 - std::sqrt(17.0)) / 4.0);
  return std::abs(s * (s * s - 1.0) * std::exp(-s * s));
}

double require(const std::map<std::string, double>& p, const std::string& key,
               const std::string& family) {
  auto it = p.find(key);
  if (it == p.end()) {
    throw Error(ErrorKind::Config, "nonlinearity",
                "family '" + family + "' needs parameter '" + key + "'");
  }
  return it->second;
}

}  // namespace

Nonlinearity construct_sigmoid_bump(double m, double M, double bump_center, double bump_width,
                                    double bump_height, const ScanWindow& window) {
  if (!(m < M)) throw Error(ErrorKind::RangeViolation, "construct_sigmoid_bump", "need m < M");
  if (!(bump_width > 0.0))
    throw Error(ErrorKind::RangeViolation, "construct_sigmoid_bump", "bump_width must be > 0");
  const double a = M - m, c = bump_center, w = bump_width, H = bump_height;
  Nonlinearity f("sigmoid_bump",
                 {{"m", m}, {"M", M}, {"bump_center", c}, {"bump_width", w}, {"bump_height", H}},
                 m, M, [=](double x) {
                   const double th = std::tanh(x);
                   const double sech2 = 1.0 - th * th;
                   const double xi = (x - c) / w;
                   const double g = std::exp(-xi * xi);
                   Derivatives d;
                   d.f = m * x + 0.5 * a * (x + log_cosh(x)) + H * w * 0.5 * kSqrtPi * std::erf(xi);
                   d.d1 = m + 0.5 * a * (1.0 + th) + H * g;
                   d.d2 = 0.5 * a * sech2 - 2.0 * H * xi / w * g;
                   d.d3 = -a * sech2 * th - 2.0 * H / (w * w) * (1.0 - 2.0 * xi * xi) * g;
                   return d;
                 });
  check_slope_range(f, window, "construct_sigmoid_bump");
  return f;
}

Nonlinearity construct_wiggle(double mu_k, double amplitude, double center, double width) {
  if (!(width > 0.0)) throw Error(ErrorKind::RangeViolation, "construct_wiggle", "width must be > 0");
  const double A = amplitude, c = center, w = width;
  const double spread = std::abs(A) * wiggle_peak();
  return Nonlinearity("wiggle", {{"mu_k", mu_k}, {"amplitude", A}, {"center", c}, {"width", w}},
                      mu_k - spread, mu_k + spread, [=](double x) {
                        const double s = (x - c) / w;
                        const double s2 = s * s;
                        const double g = std::exp(-s2);
                        Derivatives d;
                        d.f = mu_k * x - 0.5 * A * w * s2 * g;
                        d.d1 = mu_k + A * s * (s2 - 1.0) * g;
                        d.d2 = A / w * (-2.0 * s2 * s2 + 5.0 * s2 - 1.0) * g;
                        d.d3 = A / (w * w) * s * (4.0 * s2 * s2 - 18.0 * s2 + 12.0) * g;
                        return d;
                      });
}

Nonlinearity construct_poly_clamped(double m, double M, double x0, double x1) {
  if (!(m < M)) throw Error(ErrorKind::RangeViolation, "construct_poly_clamped", "need m < M");
  if (!(x1 > x0)) throw Error(ErrorKind::RangeViolation, "construct_poly_clamped", "need x1 > x0");
  const double a = M - m, D = x1 - x0;
  return Nonlinearity("poly_clamped", {{"m", m}, {"M", M}, {"x0", x0}, {"x1", x1}}, m, M,
                      [=](double x) {
                        Derivatives d;
                        if (x <= x0) {
                          d.f = m * x;
                          d.d1 = m;
                          return d;
                        }
                        if (x >= x1) {
                          d.f = m * x + a * (0.5 * D + (x - x1));
                          d.d1 = M;
                          return d;
                        }
                        const double t = (x - x0) / D;
                        const double t2 = t * t, t4 = t2 * t2, u = 1.0 - t;
                        const double S = t4 * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t2 * t);
                        const double P = t4 * t * (7.0 - 14.0 * t + 10.0 * t2 - 2.5 * t2 * t);
                        d.f = m * x + a * D * P;
                        d.d1 = m + a * S;
                        d.d2 = a / D * 140.0 * t2 * t * u * u * u;
                        d.d3 = a / (D * D) * 420.0 * t2 * u * u * (1.0 - 2.0 * t);
                        return d;
                      });
}

Nonlinearity construct_linear(double slope) {
  return Nonlinearity("linear", {{"slope", slope}}, slope, slope, [slope](double x) {
    return Derivatives{slope * x, slope, 0.0, 0.0};
  });
}

Nonlinearity construct_quadratic(double a, double b) {
  const double inf = std::numeric_limits<double>::infinity();
  return Nonlinearity("quadratic", {{"a", a}, {"b", b}}, a == 0.0 ? b : -inf, a == 0.0 ? b : inf,
                      [a, b](double x) {
                        return Derivatives{a * x * x + b * x, 2.0 * a * x + b, 2.0 * a, 0.0};
                      });
}

Nonlinearity construct_family(const std::string& family,
                              const std::map<std::string, double>& p, const ScanWindow& window) {
  std::set<std::string> allowed;
  Nonlinearity out = construct_linear(0.0);
  if (family == "sigmoid_bump") {
    allowed = {"m", "M", "bump_center", "bump_width", "bump_height"};
    out = construct_sigmoid_bump(require(p, "m", family), require(p, "M", family),
                                 require(p, "bump_center", family), require(p, "bump_width", family),
                                 require(p, "bump_height", family), window);
  } else if (family == "wiggle") {
    allowed = {"mu_k", "amplitude", "center", "width"};
    out = construct_wiggle(require(p, "mu_k", family), require(p, "amplitude", family),
                           require(p, "center", family), require(p, "width", family));
  } else if (family == "poly_clamped") {
    allowed = {"m", "M", "x0", "x1"};
    out = construct_poly_clamped(require(p, "m", family), require(p, "M", family),
                                 require(p, "x0", family), require(p, "x1", family));
  } else if (family == "linear") {
    allowed = {"slope"};
    out = construct_linear(require(p, "slope", family));
  } else if (family == "quadratic") {
    allowed = {"a", "b"};
    out = construct_quadratic(require(p, "a", family), require(p, "b", family));
  } else {
    throw Error(ErrorKind::Config, "nonlinearity", "unknown family '" + family + "'");
  }
  for (const auto& [key, value] : p) {
    if (!allowed.count(key)) {
      throw Error(ErrorKind::Config, "nonlinearity",
                  "unknown parameter '" + key + "' for family '" + family + "'");
    }
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::Config, "nonlinearity", "parameter '" + key + "' is not finite");
    }
  }
  return out;
}

namespace {

struct Scan {
  std::vector<double> x;
  std::vector<Derivatives> d;
};

Scan scan(const Nonlinearity& f, const ScanWindow& window, const char* stage) {
  if (!(window.hi > window.lo)) {
    throw Error(ErrorKind::Precondition, stage, "scan window is empty");
  }
  if (window.points < 201) {
    throw Error(ErrorKind::InconclusiveScan, stage,
                "scan of " + std::to_string(window.points) + " points is too coarse (need >= 201)");
  }
  Scan s;
  s.x.resize(window.points);
  s.d.resize(window.points);
  for (int i = 0; i < window.points; ++i) {
    s.x[i] = window.lo + (window.hi - window.lo) * i / (window.points - 1);
    s.d[i] = f(s.x[i]);
  }
  return s;
}

bool strict_change(double a, double b) { return (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0); }

// Roots of g between scan points where its sign changes. Exact zeros on the
// scan count once, and only when the sign differs on either side.
std::vector<double> sign_changes(const std::function<double(double)>& g, const Scan& s,
                                 const std::vector<double>& values);

double refine(const std::function<double(double)>& g, double lo, double hi) {
  RootOptions opt;
  opt.x_tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lo) + std::abs(hi));
  opt.max_iterations = 300;
  return find_root(g, lo, hi, opt).x;
}

std::vector<double> sign_changes(const std::function<double(double)>& g, const Scan& s,
                                 const std::vector<double>& values) {
  std::vector<double> roots;
  int prev = -1;
  for (int i = 0; i < static_cast<int>(values.size()); ++i) {
    if (values[i] == 0.0) continue;
    if (prev >= 0 && strict_change(values[prev], values[i])) {
      if (i == prev + 1) roots.push_back(refine(g, s.x[prev], s.x[i]));
      else roots.push_back(s.x[(prev + i) / 2]);
    }
    prev = i;
  }
  return roots;
}

std::vector<double> column(const Scan& s, int order, double shift = 0.0) {
  std::vector<double> v(s.d.size());
  for (size_t i = 0; i < v.size(); ++i) {
    const Derivatives& d = s.d[i];
    v[i] = (order == 1 ? d.d1 : order == 2 ? d.d2 : d.d3) - shift;
  }
  return v;
}

std::vector<Inflection> inflections_from(const Nonlinearity& f, const Scan& s) {
  std::vector<Inflection> out;
  for (double x : sign_changes([&f](double t) { return f.d2(t); }, s, column(s, 2))) {
    const Derivatives d = f(x);
    if (std::abs(d.d2) > 1e-10 || std::abs(d.d3) <= 1e-8) continue;
    out.push_back({x, d.d1, d.d3});
  }
  return out;
}

}  // namespace

std::vector<Inflection> find_inflections(const Nonlinearity& f, const ScanWindow& window) {
  return inflections_from(f, scan(f, window, "find_inflection"));
}

double find_inflection(const Nonlinearity& f, const ScanWindow& window) {
  auto all = find_inflections(f, window);
  if (all.empty()) {
    throw Error(ErrorKind::NotFound, "find_inflection",
                "f'' has no sign change on [" + std::to_string(window.lo) + ", " +
                    std::to_string(window.hi) + "]");
  }
  return all.front().x;
}

HypothesisReport check_hypotheses(const Nonlinearity& f, const SpectrumLevels& levels,
                                  const ScanWindow& window, int k) {
  const Scan s = scan(f, window, "check_hypotheses");
  HypothesisReport r;
  r.window = window;
  r.k = k;
  r.mu1 = levels.mu1;
  r.mu2 = levels.mu2;
  r.mu_k = k == 1 ? levels.mu1 : levels.mu_k;

  r.scan_min_slope = std::numeric_limits<double>::infinity();
  r.scan_max_slope = -std::numeric_limits<double>::infinity();
  r.h2_gap = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < s.x.size(); ++i) {
    const Derivatives& d = s.d[i];
    r.scan_min_slope = std::min(r.scan_min_slope, d.d1);
    r.scan_max_slope = std::max(r.scan_max_slope, d.d1);
    const double g = std::max({std::abs(d.d1 - levels.mu1), std::abs(d.d2), std::abs(d.d3)});
    if (g < r.h2_gap) {
      r.h2_gap = g;
      r.h2_gap_at = s.x[i];
    }
  }
  const double m = f.lower_slope(), M = f.upper_slope();
  r.h1 = m < levels.mu1 && levels.mu1 < M && M < levels.mu2 &&
         r.scan_min_slope >= m - 1e-9 && r.scan_max_slope <= M + 1e-9;
  r.h2 = r.h2_gap >= 1e-6;

  r.inflections = inflections_from(f, s);
  r.h3 = !r.inflections.empty();

  r.tail_x = 10.0 * window.radius();
  const Derivatives lo = f(window.center() - r.tail_x);
  const Derivatives hi = f(window.center() + r.tail_x);
  r.slope_minus = lo.d1;
  r.slope_plus = hi.d1;
  r.curvature_minus = lo.d2;
  r.curvature_plus = hi.d2;
  r.epsilon = std::min(hi.d1 - levels.mu1, levels.mu1 - lo.d1);
  r.h4 = r.epsilon > 0.0 && std::abs(lo.d2) <= 1e-4 && std::abs(hi.d2) <= 1e-4;

  const double target = r.mu_k;
  for (double x : sign_changes([&f, target](double t) { return f.d1(t) - target; }, s,
                               column(s, 1, target))) {
    const Derivatives d = f(x);
    r.crossings.push_back({x, d.d2, d.d3});
  }
  // Pick a pair with opposite f'' (each clearly nonzero); prefer f''' >= 0 at
  // both points, then the closest pair.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : r.crossings) {
    for (const auto& b : r.crossings) {
      if (!(a.d2 < -1e-6 && b.d2 > 1e-6)) continue;
      const bool nice = a.d3 >= 0.0 && b.d3 >= 0.0;
      const double score = std::abs(a.x - b.x) + (nice ? 0.0 : 1e6);
      if (score < best) {
        best = score;
        r.x_mu = a.x;
        r.y_mu = b.x;
      }
    }
  }
  r.hk = r.x_mu.has_value();
  return r;
}

double find_almost_critical(const Nonlinearity& f, double mu1, Side side, double tol,
                            const AlmostCriticalOptions& options) {
  auto on_side = [&](double slope) {
    return side == Side::Above ? slope >= mu1 + options.margin : slope <= mu1 - options.margin;
  };
  const double c = options.window.center();
  for (double dir : {1.0, -1.0}) {
    for (double step = 1.0; step <= options.horizon; step *= 2.0) {
      const Derivatives d = f(c + dir * step);
      if (on_side(d.d1) && std::abs(d.d2) <= tol) return c + dir * step;
    }
  }
  // Interior extrema of f' (zeros of f'') on the requested side.
  const Scan s = scan(f, options.window, "find_almost_critical");
  double best_x = 0.0, best_gap = -1.0;
  for (double x : sign_changes([&f](double t) { return f.d2(t); }, s, column(s, 2))) {
    const Derivatives d = f(x);
    if (!on_side(d.d1) || std::abs(d.d2) > tol) continue;
    const double gap = std::abs(d.d1 - mu1);
    if (gap > best_gap) {
      best_gap = gap;
      best_x = x;
    }
  }
  if (best_gap < 0.0) {
    throw Error(ErrorKind::NotFound, "find_almost_critical",
                std::string("no point with f' ") + (side == Side::Above ? "above" : "below") +
                    " mu1 by " + std::to_string(options.margin) + " and |f''| <= " +
                    std::to_string(tol) + " within horizon " + std::to_string(options.horizon));
  }
  return best_x;
}

}  // namespace apsing
