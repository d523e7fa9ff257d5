#include "apsing/mollifier.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "apsing/error.hpp"
#include "apsing/roots.hpp"
#include "apsing/spectral.hpp"

namespace apsing {

using Eigen::VectorXd;

namespace {

// Index of the value seen at position j of an axis of length n, or -1 for
// a zero (Dirichlet) extension.
int closure_index(int j, int n, Boundary bc) {
  if (j >= 0 && j < n) return j;
  switch (bc) {
    case Boundary::Dirichlet:
      return -1;
    case Boundary::Periodic:
      return ((j % n) + n) % n;
    case Boundary::Neumann:
      // Cell-centered grid: reflect about the outer cell faces.
      while (j < 0 || j >= n) j = j < 0 ? -1 - j : 2 * n - 1 - j;
      return j;
  }
  return -1;
}

std::vector<double> gaussian_kernel(double sigma, double h, int n) {
  const int J = std::min(n - 1, static_cast<int>(std::ceil(4.0 * sigma / h)));
  std::vector<double> k(2 * J + 1);
  double total = 0.0;
  for (int j = -J; j <= J; ++j) {
    const double x = j * h / sigma;
    k[j + J] = std::exp(-0.5 * x * x);
    total += k[j + J];
  }
  for (double& v : k) v /= total;
  return k;
}

// Convolve along one axis: entries idx = offset + stride * i, i < n.
void smooth_axis(VectorXd& v, int n, int stride, int lines, int line_stride, double sigma,
                 double h, Boundary bc) {
  const std::vector<double> k = gaussian_kernel(sigma, h, n);
  const int J = static_cast<int>(k.size() / 2);
  std::vector<double> line(n), out(n);
  for (int l = 0; l < lines; ++l) {
    const int base = l * line_stride;
    for (int i = 0; i < n; ++i) line[i] = v[base + stride * i];
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = -J; j <= J; ++j) {
        const int src = closure_index(i + j, n, bc);
        if (src >= 0) s += k[j + J] * line[src];
      }
      out[i] = s;
    }
    for (int i = 0; i < n; ++i) v[base + stride * i] = out[i];
  }
}

double sigma_min(const Eigen::Matrix2d& M) {
  return Eigen::JacobiSVD<Eigen::Matrix2d>(M).singularValues()[1];
}

double sigma_max(const Eigen::Matrix2d& M) {
  return Eigen::JacobiSVD<Eigen::Matrix2d>(M).singularValues()[0];
}

}  // namespace

GridFunction smooth(const GridFunction& u, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::Precondition, "smooth", "sigma must be > 0");
  const Domain& d = u.domain();
  VectorXd v = u.values();
  if (d.dim == 1) {
    smooth_axis(v, d.n, 1, 1, 0, sigma, d.hx(), d.bc);
  } else {
    smooth_axis(v, d.n, 1, d.n, d.n, sigma, d.hx(), d.bc);  // along x: rows
    smooth_axis(v, d.n, d.n, d.n, 1, sigma, d.hy(), d.bc);  // along y: columns
  }
  return GridFunction(d, std::move(v));
}

double roughness(const GridFunction& u) {
  const Domain& d = u.domain();
  const VectorXd& v = u.values();
  const double osc = v.maxCoeff() - v.minCoeff();
  if (osc == 0.0) return 0.0;
  double worst = 0.0;
  const int n = d.n;
  if (d.dim == 1) {
    for (int i = 1; i + 1 < n; ++i) worst = std::max(worst, std::abs(v[i - 1] - 2 * v[i] + v[i + 1]));
  } else {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int idx = j * n + i;
        double s = 0.0;
        if (i > 0 && i + 1 < n) s += std::abs(v[idx - 1] - 2 * v[idx] + v[idx + 1]);
        if (j > 0 && j + 1 < n) s += std::abs(v[idx - n] - 2 * v[idx] + v[idx + n]);
        worst = std::max(worst, s);
      }
  }
  return worst / osc;
}

MollifyResult restore_lambda_zero(const DiscreteLaplacian& L, const GridFunction& u0,
                                  const Nonlinearity& f, const GridFunction& direction,
                                  const RestoreOptions& options) {
  require_same_domain(L.domain(), u0.domain(), "restore_lambda_zero");
  require_same_domain(L.domain(), direction.domain(), "restore_lambda_zero");
  const auto lambda_at = [&](double t) {
    return eigenpair(L, GridFunction(L.domain(), map_values(f, (u0 + t * direction).values(), 1)),
                     options.k)
        .lambda;
  };
  const FunctionalValues start = functionals(L, u0, f, options.k, false);
  const double l0 = start.lambda;
  double t = 0.0;
  int evaluations = 1;
  if (std::abs(l0) > options.lambda_tol) {
    const double slope = inner_product(start.grad_lambda, direction);
    // Probe the side the linearization points to first, nearest offsets first.
    const double first = slope != 0.0 ? (-l0 / slope > 0.0 ? 1.0 : -1.0) : 1.0;
    std::optional<std::pair<double, double>> bracket;
    for (int j = 12; j >= 0 && !bracket; --j) {
      for (double side : {first, -first}) {
        const double probe = side * options.reach * std::ldexp(1.0, -j);
        const double lp = lambda_at(probe);
        ++evaluations;
        if (lp * l0 <= 0.0) {
          bracket = std::make_pair(probe, lp);
          break;
        }
      }
    }
    if (!bracket) {
      throw Error(ErrorKind::NoBracket, "restore_lambda_zero",
                  "lambda keeps the sign of " + std::to_string(l0) + " on [-" +
                      std::to_string(options.reach) + ", " + std::to_string(options.reach) + "]");
    }
    RootOptions ro;
    ro.x_tol = 1e-14;
    ro.f_tol = 0.1 * options.lambda_tol;
    const RootResult r = find_root(lambda_at, 0.0, bracket->first, l0, bracket->second, ro);
    t = r.x;
    evaluations += r.iterations;
  }
  MollifyResult out;
  out.u = u0 + t * direction;
  out.a = t;
  out.iterations = evaluations;
  const FunctionalValues fv = functionals(L, out.u, f, options.k, true);
  out.lambda = fv.lambda;
  out.delta = fv.delta;
  out.tau = fv.tau;
  out.independence = independence(fv);
  out.roughness = roughness(out.u);
  if (!(out.delta > 0.0)) {
    throw Error(ErrorKind::DeltaLost, "restore_lambda_zero",
                "delta " + std::to_string(out.delta) + " at t=" + std::to_string(t));
  }
  return out;
}

MollifyResult restore_nonfold(const DiscreteLaplacian& L, const GridFunction& u0,
                              const Nonlinearity& f, const GridFunction& v1,
                              const GridFunction& v2, const NonfoldRestoreOptions& options) {
  require_same_domain(L.domain(), u0.domain(), "restore_nonfold");
  require_same_domain(L.domain(), v1.domain(), "restore_nonfold");
  require_same_domain(L.domain(), v2.domain(), "restore_nonfold");
  struct State {
    Eigen::Vector2d x;
    Eigen::Vector2d value;
    Eigen::Matrix2d jacobian;
    FunctionalValues fv;
  };
  int steps = 0;
  const auto at = [&](const Eigen::Vector2d& x, bool jac) {
    State s;
    s.x = x;
    s.fv = functionals(L, u0 + x[0] * v1 + x[1] * v2, f, options.k, jac);
    s.value = {s.fv.lambda, s.fv.delta};
    if (jac) s.jacobian = probe_jacobian(s.fv, v1, v2);
    return s;
  };

  State cur = at(Eigen::Vector2d::Zero(), true);
  const double smax = sigma_max(cur.jacobian), smin = sigma_min(cur.jacobian);
  if (!(smin > options.min_condition_inverse * smax)) {
    throw Error(ErrorKind::JacobianSingular, "restore_nonfold",
                "probe Jacobian has singular values " + std::to_string(smax) + ", " +
                    std::to_string(smin));
  }
  const double condition = smax / smin;

  const auto newton = [&](State s, int max_iterations) -> std::optional<State> {
    for (int it = 0; it < max_iterations; ++it) {
      const double r = s.value.norm();
      if (r <= options.tol) return s;
      ++steps;
      const Eigen::Vector2d step = -s.jacobian.fullPivLu().solve(s.value);
      if (!step.allFinite()) return std::nullopt;
      bool moved = false;
      double scale = 1.0;
      for (int k = 0; k < 20; ++k, scale *= 0.5) {
        const Eigen::Vector2d x = s.x + scale * step;
        if (x.norm() > options.ball) continue;
        State trial = at(x, true);
        if (trial.value.norm() < (1.0 - 1e-4 * scale) * r) {
          s = std::move(trial);
          moved = true;
          break;
        }
      }
      if (!moved) return s.value.norm() <= options.accept ? std::optional<State>(s) : std::nullopt;
    }
    return s.value.norm() <= options.accept ? std::optional<State>(s) : std::nullopt;
  };

  std::optional<State> done = newton(cur, options.max_iterations);
  bool fallback = false;
  if (!done) {
    // Sign map on the box: cells where both components change sign contain a
    // zero of degree +-1; subdivide the most central such cell, then polish.
    fallback = true;
    const int G = options.grid;
    const double R = options.ball / std::sqrt(2.0);
    std::vector<Eigen::Vector2d> vals(G * G);
    const auto node = [&](int i, int j) {
      return Eigen::Vector2d(-R + 2.0 * R * i / (G - 1), -R + 2.0 * R * j / (G - 1));
    };
    for (int j = 0; j < G; ++j)
      for (int i = 0; i < G; ++i) vals[j * G + i] = at(node(i, j), false).value;
    const auto mixed = [](const std::array<Eigen::Vector2d, 4>& c) {
      bool ok = true;
      for (int comp = 0; comp < 2; ++comp) {
        double lo = c[0][comp], hi = c[0][comp];
        for (const auto& v : c) {
          lo = std::min(lo, v[comp]);
          hi = std::max(hi, v[comp]);
        }
        ok = ok && lo <= 0.0 && hi >= 0.0;
      }
      return ok;
    };
    std::vector<std::pair<double, Eigen::Vector2d>> cells;
    for (int j = 0; j + 1 < G; ++j)
      for (int i = 0; i + 1 < G; ++i) {
        const std::array<Eigen::Vector2d, 4> c{vals[j * G + i], vals[j * G + i + 1],
                                               vals[(j + 1) * G + i], vals[(j + 1) * G + i + 1]};
        if (mixed(c)) {
          const Eigen::Vector2d mid = 0.5 * (node(i, j) + node(i + 1, j + 1));
          cells.emplace_back(mid.norm(), mid);
        }
      }
    std::sort(cells.begin(), cells.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const double width0 = 2.0 * R / (G - 1);
    for (const auto& [dist, mid] : cells) {
      Eigen::Vector2d c = mid;
      double width = width0;
      for (int depth = 0; depth < 8; ++depth) {
        width *= 0.5;
        bool found = false;
        for (int q = 0; q < 4 && !found; ++q) {
          const Eigen::Vector2d sub = c + 0.5 * width * Eigen::Vector2d(q % 2 ? 1 : -1, q / 2 ? 1 : -1);
          const std::array<Eigen::Vector2d, 4> corners{
              at(sub + 0.5 * width * Eigen::Vector2d(-1, -1), false).value,
              at(sub + 0.5 * width * Eigen::Vector2d(1, -1), false).value,
              at(sub + 0.5 * width * Eigen::Vector2d(-1, 1), false).value,
              at(sub + 0.5 * width * Eigen::Vector2d(1, 1), false).value};
          if (mixed(corners)) {
            c = sub;
            found = true;
          }
        }
        if (!found) break;
      }
      done = newton(at(c, true), options.max_iterations);
      if (done) break;
    }
    if (!done) {
      throw Error(ErrorKind::NewtonDiverged, "restore_nonfold",
                  "no zero of (lambda, delta) found in the ball of radius " +
                      std::to_string(options.ball) + " (" + std::to_string(cells.size()) +
                      " sign-change cells)");
    }
  }

  State s = std::move(*done);
  if (!s.fv.grad_delta) s = at(s.x, true);
  MollifyResult out;
  out.u = u0 + s.x[0] * v1 + s.x[1] * v2;
  out.a = s.x[0];
  out.b = s.x[1];
  out.lambda = s.fv.lambda;
  out.delta = s.fv.delta;
  out.tau = s.fv.tau;
  const GridFunction n1 = v1 * (1.0 / norm(v1)), n2 = v2 * (1.0 / norm(v2));
  out.independence = independence(s.fv, &n1, &n2);
  out.condition = condition;
  out.roughness = roughness(out.u);
  out.iterations = steps;
  out.used_fallback = fallback;
  return out;
}

}  // namespace apsing
