#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace apsing {

/// Value of f together with its first three derivatives at one point.
struct Derivatives {
  double f = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

/// A smooth scalar nonlinearity f: R -> R with derivatives up to order three.
///
/// `lower_slope()` and `upper_slope()` are the essential bounds m <= f' <= M
/// (the closure of the range of f'). Families built by the factories below
/// record their name and parameters so reports can echo them.
class Nonlinearity {
 public:
  using Evaluator = std::function<Derivatives(double)>;

  Nonlinearity(std::string family, std::map<std::string, double> parameters,
               double lower_slope, double upper_slope, Evaluator evaluator);

  Derivatives operator()(double x) const { return evaluator_(x); }
  double value(double x) const { return evaluator_(x).f; }
  double d1(double x) const { return evaluator_(x).d1; }
  double d2(double x) const { return evaluator_(x).d2; }
  double d3(double x) const { return evaluator_(x).d3; }

  double lower_slope() const { return lower_slope_; }
  double upper_slope() const { return upper_slope_; }
  const std::string& family() const { return family_; }
  const std::map<std::string, double>& parameters() const { return parameters_; }

  // g(x) = (m+M) x + f(-x): reflects x and mirrors f' about (m+M)/2, so the
  // range [m, M] and the asymptotic order of f' are preserved while a feature
  // below the resonance moves above it.
  Nonlinearity mirrored() const;

 private:
  std::string family_;
  std::map<std::string, double> parameters_;
  double lower_slope_;
  double upper_slope_;
  Evaluator evaluator_;
};

struct ScanWindow {
  double lo = -10.0;
  double hi = 10.0;
  int points = 20001;

  double center() const { return 0.5 * (lo + hi); }
  double radius() const { return 0.5 * (hi - lo); }
};

// f'(x) = m + (M-m)(1 + tanh x)/2 + height * exp(-((x-center)/width)^2).
// Throws range-violation when f' leaves [m, M] on `window`.
Nonlinearity construct_sigmoid_bump(double m, double M, double bump_center,
                                    double bump_width, double bump_height,
                                    const ScanWindow& window = {});

// f'(x) = mu_k + amplitude * s (s^2 - 1) exp(-s^2), s = (x - center)/width.
// f' crosses mu_k at center and center +- width; f'' alternates sign there.
Nonlinearity construct_wiggle(double mu_k, double amplitude, double center,
                              double width);

// f'(x) = m + (M-m) S((x-x0)/(x1-x0)) with S the clamped C^3 smoothstep.
// Convex, with f'' supported on [x0, x1].
Nonlinearity construct_poly_clamped(double m, double M, double x0, double x1);

Nonlinearity construct_linear(double slope);
Nonlinearity construct_quadratic(double a, double b);

/// Build a named family from a parameter map (the CLI config path).
Nonlinearity construct_family(const std::string& family,
                              const std::map<std::string, double>& parameters,
                              const ScanWindow& window = {});

struct SpectrumLevels {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double mu_k = 0.0;  // used by the resonant-level check; equals mu1 when k == 1
};

struct Inflection {
  double x = 0.0;
  double d1 = 0.0;
  double d3 = 0.0;
};

struct Crossing {
  double x = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

struct HypothesisReport {
  ScanWindow window;
  int k = 1;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double mu_k = 0.0;

  bool h1 = false;
  double scan_min_slope = 0.0;
  double scan_max_slope = 0.0;

  bool h2 = false;
  double h2_gap = 0.0;      // min over scan of max(|f'-mu1|, |f''|, |f'''|)
  double h2_gap_at = 0.0;

  bool h3 = false;
  std::vector<Inflection> inflections;

  bool h4 = false;
  double epsilon = 0.0;
  double tail_x = 0.0;
  double slope_minus = 0.0;  // f'(-X)
  double slope_plus = 0.0;   // f'(+X)
  double curvature_minus = 0.0;
  double curvature_plus = 0.0;

  bool hk = false;
  std::vector<Crossing> crossings;  // zeros of f' - mu_k on the scan
  std::optional<double> x_mu;       // f''(x_mu) < 0
  std::optional<double> y_mu;       // f''(y_mu) > 0
};

HypothesisReport check_hypotheses(const Nonlinearity& f, const SpectrumLevels& levels,
                                  const ScanWindow& window, int k = 1);

std::vector<Inflection> find_inflections(const Nonlinearity& f, const ScanWindow& window);

/// Leftmost zero of f'' on the window with f''' != 0. Throws not-found.
double find_inflection(const Nonlinearity& f, const ScanWindow& window);

enum class Side { Above, Below };

struct AlmostCriticalOptions {
  double margin = 0.5;
  double horizon = 1e6;
  ScanWindow window{};
};

/// A point where f' sits on `side` of mu1 by at least `margin` and |f''| <= tol.
/// Tails are searched first with a doubling horizon, then interior extrema of f'.
double find_almost_critical(const Nonlinearity& f, double mu1, Side side, double tol,
                            const AlmostCriticalOptions& options = {});

}  // namespace apsing
