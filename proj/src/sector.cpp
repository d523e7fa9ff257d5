#include "apsing/sector.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "apsing/error.hpp"
#include "apsing/roots.hpp"

namespace apsing {

using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

using Polygon = std::vector<Vector2d>;

double cross(const Vector2d& a, const Vector2d& b) { return a[0] * b[1] - a[1] * b[0]; }

// Keep the part of `poly` where cross(dir, x - p) * sign >= 0.
Polygon clip(const Polygon& poly, const Vector2d& p, const Vector2d& dir, double sign) {
  Polygon out;
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Vector2d& a = poly[i];
    const Vector2d& b = poly[(i + 1) % n];
    const double da = sign * cross(dir, a - p), db = sign * cross(dir, b - p);
    if (da >= 0.0) out.push_back(a);
    if ((da >= 0.0) != (db >= 0.0)) out.push_back(a + (da / (da - db)) * (b - a));
  }
  return out;
}

double area(const Polygon& poly) {
  double s = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) s += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * std::abs(s);
}

// Area of cell ∩ (p + {arg in [a0, a1]}) for a1 - a0 <= pi.
double wedge_area(const Polygon& cell, const Vector2d& p, double a0, double a1) {
  const Vector2d d0(std::cos(a0), std::sin(a0)), d1(std::cos(a1), std::sin(a1));
  Polygon part = clip(cell, p, d0, 1.0);
  if (part.empty()) return 0.0;
  part = clip(part, p, d1, -1.0);
  return part.size() < 3 ? 0.0 : area(part);
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

GridFunction unit(const GridFunction& v) {
  const double n = norm(v);
  return n > 0.0 ? v * (1.0 / n) : v;
}

double mu1_of(const DiscreteLaplacian& L) { return free_eigenpairs(L, 2).pairs[0].mu; }

}  // namespace

GridFunction sector_indicator(const Domain& d, const Vector2d& p, double theta) {
  if (!(theta >= 0.0 && theta <= kTwoPi)) {
    throw Error(ErrorKind::Precondition, "sector_indicator", "theta outside [0, 2pi]");
  }
  const int N = d.nodes();
  if (theta == 0.0) return GridFunction(d);
  if (theta == kTwoPi) return GridFunction::constant(d, 1.0);
  VectorXd chi(N);
  if (d.dim == 1) {
    const double h = d.hx();
    const double lo = d.x_at(0) - 0.5 * h, hi = d.x_at(d.n - 1) + 0.5 * h;
    const double cut = lo + (theta / kTwoPi) * (hi - lo);
    for (int i = 0; i < N; ++i) chi[i] = std::clamp((cut - (d.x_at(i) - 0.5 * h)) / h, 0.0, 1.0);
    return GridFunction(d, std::move(chi));
  }
  const double hx = d.hx(), hy = d.hy(), cell_area = hx * hy;
  const double pi = 0.5 * kTwoPi;
  for (int idx = 0; idx < N; ++idx) {
    const Vector2d c = d.node(idx);
    const Polygon cell{{c[0] - 0.5 * hx, c[1] - 0.5 * hy},
                       {c[0] + 0.5 * hx, c[1] - 0.5 * hy},
                       {c[0] + 0.5 * hx, c[1] + 0.5 * hy},
                       {c[0] - 0.5 * hx, c[1] + 0.5 * hy}};
    const double a = theta <= pi ? wedge_area(cell, p, 0.0, theta)
                                 : cell_area - wedge_area(cell, p, theta, kTwoPi);
    chi[idx] = std::clamp(a / cell_area, 0.0, 1.0);
  }
  return GridFunction(d, std::move(chi));
}

Vector2d default_apex(const Domain& d) {
  return d.dim == 1 ? Vector2d(0.5 * (d.ax + d.bx), 0.0)
                    : Vector2d(0.5 * (d.ax + d.bx), 0.5 * (d.ay + d.by));
}

GridFunction SectorPotential::values() const {
  const GridFunction one = GridFunction::constant(chi.domain(), 1.0);
  return chi * left + (one - chi) * right;
}

DerivativeProfile SectorPotential::profile(const Nonlinearity& f) const {
  const Derivatives a = f(left), b = f(right);
  const VectorXd& c = chi.values();
  const VectorXd cc = VectorXd::Ones(c.size()) - c;
  return {a.d1 * c + b.d1 * cc, a.d2 * c + b.d2 * cc, a.d3 * c + b.d3 * cc};
}

SectorPotential make_sector_potential(const Domain& d, const Vector2d& p, double theta,
                                      double left, double right) {
  SectorPotential s;
  s.p = p;
  s.theta = theta;
  s.left = left;
  s.right = right;
  s.chi = sector_indicator(d, p, theta);
  s.fraction = s.chi.values().sum() / d.nodes();
  return s;
}

double two_valued_lambda(const DiscreteLaplacian& L, double left_level, double right_level,
                         const Vector2d& p, double theta) {
  const GridFunction chi = sector_indicator(L.domain(), p, theta);
  const VectorXd q = right_level * VectorXd::Ones(chi.size()) + (left_level - right_level) * chi.values();
  return eigenpair(L, GridFunction(L.domain(), q), 1).lambda;
}

std::pair<double, double> endpoint_lambda(const DiscreteLaplacian& L, double left_level,
                                          double right_level) {
  const double mu1 = mu1_of(L);
  return {mu1 - right_level, mu1 - left_level};
}

BalanceResult balance_theta(const DiscreteLaplacian& L, double left_level, double right_level,
                            const Vector2d& p, const BalanceOptions& options) {
  const double mu1 = mu1_of(L);
  const bool rising = left_level <= mu1 && mu1 < right_level;
  const bool falling = right_level <= mu1 && mu1 < left_level;
  if (!rising && !falling) {
    throw Error(ErrorKind::OutOfDomain, "balance_theta",
                "levels " + std::to_string(left_level) + ", " + std::to_string(right_level) +
                    " do not straddle mu_1 = " + std::to_string(mu1));
  }
  BalanceResult out;
  if (left_level == mu1) {
    out.theta = out.lo = out.hi = kTwoPi;
    return out;
  }
  if (right_level == mu1) return out;
  int count = 0;
  const auto g = [&](double theta) {
    ++count;
    return two_valued_lambda(L, left_level, right_level, p, theta);
  };
  RootOptions ro;
  ro.x_tol = options.theta_tol;
  ro.f_tol = 0.1 * options.lambda_tol;
  const RootResult r = find_root(g, 0.0, kTwoPi, mu1 - right_level, mu1 - left_level, ro);
  out.theta = r.x;
  out.lambda = r.fx;
  out.lo = r.lo;
  out.hi = r.hi;
  out.evaluations = count;
  return out;
}

std::pair<GridFunction, GridFunction> sector_probes(const SectorPotential& s) {
  const GridFunction one = GridFunction::constant(s.chi.domain(), 1.0);
  return {unit(s.chi), unit(one - s.chi)};
}

void evaluate_candidate(const DiscreteLaplacian& L, const Nonlinearity& f, NonfoldCandidate& c) {
  const FunctionalValues fv = functionals(L, c.potential.profile(f), c.k, true);
  c.lambda = fv.lambda;
  c.delta = fv.delta;
  c.tau = fv.tau;
  const auto [v1, v2] = sector_probes(c.potential);
  c.independence = independence(fv, &v1, &v2);
}

NonfoldCandidate find_positive_delta_nonfold(const DiscreteLaplacian& L, const Nonlinearity& f,
                                             const NonfoldOptions& options) {
  const double mu1 = mu1_of(L);
  const ScanWindow& win = options.window;
  const double dx = (win.hi - win.lo) / (win.points - 1);

  // Most negative f'' away from resonance; below mu_1 first, then the mirror case.
  int best = -1;
  bool below = true;
  for (int pass = 0; pass < 2 && best < 0; ++pass) {
    below = pass == 0;
    double lowest = 0.0;
    for (int i = 0; i < win.points; ++i) {
      const double x = win.lo + i * dx;
      const Derivatives d = f(x);
      const bool side_ok = below ? d.d1 < mu1 - options.margin : d.d1 > mu1 + options.margin;
      if (side_ok && d.d2 < lowest) {
        lowest = d.d2;
        best = i;
      }
    }
  }
  if (best < 0) {
    throw Error(ErrorKind::RecipeFailed, "positive_delta:inflection",
                "f'' is nonnegative wherever f' is away from mu_1");
  }
  double x_star = win.lo + best * dx;
  if (best > 0 && best + 1 < win.points) {
    const double a = x_star - dx, b = x_star + dx;
    const auto third = [&](double x) { return f.d3(x); };
    if (third(a) * third(b) < 0.0) {
      const double x = find_root(third, a, b).x;
      const double s = f.d1(x);
      if (f.d2(x) < 0.0 && (below ? s < mu1 - options.margin : s > mu1 + options.margin)) x_star = x;
    }
  }
  const double curvature = f.d2(x_star);
  const Side side = below ? Side::Above : Side::Below;
  const Vector2d p = default_apex(L.domain());

  AlmostCriticalOptions ac;
  ac.margin = options.margin;
  ac.window = win;
  double tol = 1e-3 * std::abs(curvature);
  std::string last;
  for (int attempt = 0; attempt < 6; ++attempt, tol *= 1e-2) {
    double partner = 0.0;
    try {
      partner = find_almost_critical(f, mu1, side, tol, ac);
    } catch (const Error& e) {
      throw Error(ErrorKind::RecipeFailed, "positive_delta:almost_critical", e.what());
    }
    const BalanceResult bal = balance_theta(L, f.d1(x_star), f.d1(partner), p, options.balance);
    NonfoldCandidate c;
    c.recipe = "positive-delta";
    c.potential = make_sector_potential(L.domain(), p, bal.theta, x_star, partner);
    c.x_star = x_star;
    c.balance_lambda = bal.lambda;
    evaluate_candidate(L, f, c);
    if (c.delta > 0.0) return c;
    last = "delta " + std::to_string(c.delta) + " with partner " + std::to_string(partner);
  }
  throw Error(ErrorKind::RecipeFailed, "positive_delta:balance", "delta stayed <= 0: " + last);
}

namespace {

// Zeros of g on the window: sign changes refined by bracketing.
std::vector<double> scan_zeros(const std::function<double(double)>& g, const ScanWindow& win) {
  std::vector<double> out;
  const double dx = (win.hi - win.lo) / (win.points - 1);
  double xa = win.lo, ga = g(xa);
  for (int i = 1; i < win.points; ++i) {
    const double xb = win.lo + i * dx, gb = g(xb);
    if (ga == 0.0) {
      out.push_back(xa);
    } else if (ga * gb < 0.0) {
      RootOptions ro;
      ro.x_tol = 1e-13 * std::max(1.0, std::abs(xa));
      out.push_back(find_root(g, xa, xb, ga, gb, ro).x);
    }
    xa = xb;
    ga = gb;
  }
  return out;
}

}  // namespace

NonfoldCandidate find_regular_nonfold(const DiscreteLaplacian& L, const Nonlinearity& f,
                                      const NonfoldOptions& options) {
  const double mu1 = mu1_of(L);
  const ScanWindow& win = options.window;
  const Vector2d p = default_apex(L.domain());

  std::vector<double> lefts;
  for (double x : scan_zeros([&](double x) { return f.d3(x); }, win)) {
    const Derivatives d = f(x);
    if (std::abs(d.d2) > 1e-6 && std::abs(d.d1 - mu1) > options.margin) lefts.push_back(x);
  }
  std::stable_sort(lefts.begin(), lefts.end(),
                   [&](double a, double b) { return std::abs(f.d2(a)) > std::abs(f.d2(b)); });
  if (lefts.empty()) {
    throw Error(ErrorKind::RecipeFailed, "regular_nonfold:left_level",
                "no zero of f''' with f'' != 0 away from resonance");
  }
  const std::vector<double> crossings = scan_zeros([&](double x) { return f.d1(x) - mu1; }, win);
  const std::vector<double> flats = scan_zeros([&](double x) { return f.d2(x); }, win);

  std::string diagnostics;
  for (double ell : lefts) {
    const double s1 = sign_of(f.d1(ell) - mu1), s2 = sign_of(f.d2(ell));
    for (double y : crossings) {
      if (sign_of(f.d2(y)) != -s2) continue;
      const double dir = s1 * s2;  // f' - mu_1 takes the sign -s1 on this side of y
      // Far end: next zero of f'' in direction dir, else a tail point where
      // f'' has died out.
      std::optional<double> far;
      for (double z : flats)
        if ((z - y) * dir > 0.0 && (!far || std::abs(z - y) < std::abs(*far - y))) far = z;
      const double eta = 1e-7 * std::max(1.0, std::abs(y));
      const double near_end = y + dir * eta;

      const auto delta_at = [&](double r) {
        const BalanceResult bal = balance_theta(L, f.d1(ell), f.d1(r), p, options.balance);
        NonfoldCandidate c;
        c.recipe = "regular";
        c.potential = make_sector_potential(L.domain(), p, bal.theta, ell, r);
        c.x_star = ell;
        c.balance_lambda = bal.lambda;
        const FunctionalValues fv = functionals(L, c.potential.profile(f), 1, false);
        return std::make_pair(fv.delta, c);
      };
      double far_end;
      if (far) {
        far_end = *far;
      } else {
        far_end = y + dir;
        const double target = 1e-3 * std::abs(f.d2(ell));
        for (int j = 0; j < 40 && std::abs(f.d2(far_end)) > target; ++j) far_end = y + dir * std::ldexp(1.0, j);
      }
      double d_near, d_far;
      try {
        d_near = delta_at(near_end).first;
        d_far = delta_at(far_end).first;
        if (!far) {
          // Push further into the tail until the sign settles.
          for (int j = 0; j < 20 && sign_of(d_far) != -s2; ++j) {
            far_end = y + 2.0 * (far_end - y);
            d_far = delta_at(far_end).first;
          }
        }
      } catch (const Error& e) {
        diagnostics += std::string(" [") + e.what() + "]";
        continue;
      }
      if (!(d_near * d_far < 0.0)) {
        diagnostics += " delta(" + std::to_string(near_end) + ")=" + std::to_string(d_near) +
                       ", delta(" + std::to_string(far_end) + ")=" + std::to_string(d_far) + ";";
        continue;
      }
      RootOptions ro;
      ro.x_tol = 1e-14 * std::max(1.0, std::abs(far_end));
      ro.f_tol = 0.1 * options.delta_tol;
      const RootResult root =
          find_root([&](double r) { return delta_at(r).first; }, near_end, far_end, d_near, d_far, ro);
      NonfoldCandidate c = delta_at(root.x).second;
      evaluate_candidate(L, f, c);
      return c;
    }
  }
  throw Error(ErrorKind::NoSignChange, "regular_nonfold:bracket",
              "no interval with a sign change of delta." + diagnostics);
}

NonfoldCandidate find_nonfold_Hk(const DiscreteLaplacian& L, const Nonlinearity& f, int k,
                                 const NonfoldOptions& options) {
  if (k < 1) throw Error(ErrorKind::Precondition, "nonfold_hk", "k must be >= 1");
  const FreeSpectrum s = free_eigenpairs(L, std::max(2, k + 1));
  const double mu_k = s.pairs[k - 1].mu;
  double gap = s.pairs[k].mu - mu_k;
  if (k > 1) gap = std::min(gap, mu_k - s.pairs[k - 2].mu);
  if (!(gap > 1e-6 * s.gap)) {
    throw Error(ErrorKind::DegenerateMuK, "nonfold_hk",
                "mu_" + std::to_string(k) + " is not simple (gap " + std::to_string(gap) + ")");
  }
  const HypothesisReport rep =
      check_hypotheses(f, {s.pairs[0].mu, s.pairs[1].mu, mu_k}, options.window, k);
  if (!rep.hk || !rep.x_mu || !rep.y_mu) {
    throw Error(ErrorKind::HypothesisViolation, "nonfold_hk",
                "no crossing pair of f' = mu_k with opposite curvature");
  }
  const double x_mu = *rep.x_mu, y_mu = *rep.y_mu;
  Vector2d p = default_apex(L.domain());
  if (k > 1) {
    int at = 0;
    s.pairs[k - 1].psi.values().cwiseAbs().maxCoeff(&at);
    p = L.domain().node(at);
  }
  const auto make = [&](double theta) {
    NonfoldCandidate c;
    c.recipe = "hk";
    c.k = k;
    c.potential = make_sector_potential(L.domain(), p, theta, x_mu, y_mu);
    c.x_star = x_mu;
    return c;
  };
  const auto delta_at = [&](double theta) {
    return functionals(L, make(theta).potential.profile(f), k, false).delta;
  };
  const double d0 = delta_at(0.0), d1 = delta_at(kTwoPi);
  double theta = 0.0;
  if (std::abs(d0) <= options.delta_tol) {
    theta = 0.0;
  } else if (std::abs(d1) <= options.delta_tol) {
    theta = kTwoPi;
  } else {
    if (!(d0 * d1 < 0.0)) {
      throw Error(ErrorKind::NoSignChange, "nonfold_hk",
                  "delta at theta=0 is " + std::to_string(d0) + " and at 2pi is " + std::to_string(d1));
    }
    RootOptions ro;
    ro.x_tol = options.balance.theta_tol;
    ro.f_tol = 0.1 * options.delta_tol;
    theta = find_root(delta_at, 0.0, kTwoPi, d0, d1, ro).x;
  }
  NonfoldCandidate c = make(theta);
  evaluate_candidate(L, f, c);
  return c;
}

}  // namespace apsing
