#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <utility>

#include "apsing/domain.hpp"
#include "apsing/nonlinearity.hpp"
#include "apsing/spectral.hpp"

namespace apsing {

constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Fraction of each node's cell covered by the sector p + {arg x in [0, theta]}.
///
/// Rectangles clip every cell against the wedge exactly. Intervals use a cut
/// sweeping the span covered by the cells left to right, so the covered
/// measure is (theta / 2pi) times the total. Values lie in [0, 1]; theta = 0
/// gives zero and theta = 2pi gives one everywhere.
GridFunction sector_indicator(const Domain& domain, const Eigen::Vector2d& p, double theta);

/// Center of the domain (ignored on intervals).
Eigen::Vector2d default_apex(const Domain& domain);

/// Two-valued function left * chi + right * (1 - chi) on a sector.
struct SectorPotential {
  Eigen::Vector2d p{0.0, 0.0};
  double theta = 0.0;
  double left = 0.0;   // value on the sector
  double right = 0.0;  // value on its complement
  GridFunction chi;
  double fraction = 0.0;  // measure of the sector over the measure of the domain

  GridFunction values() const;
  // f^(j)(left) chi + f^(j)(right) (1 - chi): derivatives of f composed with the
  // two-valued function, split exactly across cut cells.
  DerivativeProfile profile(const Nonlinearity& f) const;
};

SectorPotential make_sector_potential(const Domain& domain, const Eigen::Vector2d& p,
                                      double theta, double left, double right);

/// Lowest eigenvalue of -Lap - (L chi_theta + R (1 - chi_theta)).
double two_valued_lambda(const DiscreteLaplacian& L, double left_level, double right_level,
                         const Eigen::Vector2d& p, double theta);

/// (value at theta = 0, value at theta = 2pi) = (mu_1 - R, mu_1 - L).
std::pair<double, double> endpoint_lambda(const DiscreteLaplacian& L, double left_level,
                                          double right_level);

struct BalanceOptions {
  double theta_tol = 1e-10;
  double lambda_tol = 1e-9;
};

struct BalanceResult {
  double theta = 0.0;
  double lambda = 0.0;
  double lo = 0.0, hi = 0.0;  // terminal bracket
  int evaluations = 0;
};

/// The angle at which the two-valued potential has lambda_1 = 0. Requires
/// L <= mu_1 < R or R <= mu_1 < L (throws out-of-domain otherwise).
BalanceResult balance_theta(const DiscreteLaplacian& L, double left_level, double right_level,
                            const Eigen::Vector2d& p, const BalanceOptions& options = {});

struct NonfoldCandidate {
  std::string recipe;  // positive-delta | regular | hk
  int k = 1;
  SectorPotential potential;
  double lambda = 0.0;
  double delta = 0.0;
  std::optional<double> tau;
  double independence = 0.0;  // probes: normalized chi and 1 - chi
  std::optional<double> x_star;
  double balance_lambda = 0.0;
};

// Probe directions of a sector: chi and 1 - chi, each of unit weighted norm.
std::pair<GridFunction, GridFunction> sector_probes(const SectorPotential& s);

/// Full functional evaluation of a candidate (lambda, delta, tau, independence).
void evaluate_candidate(const DiscreteLaplacian& L, const Nonlinearity& f, NonfoldCandidate& c);

struct NonfoldOptions {
  ScanWindow window{};
  double margin = 0.5;     // distance of f' from mu_1 required at the plateaus
  double delta_tol = 1e-8;
  BalanceOptions balance{};
};

/// Two-valued u with lambda_1 = 0 and delta_1 > 0, from a point of most
/// negative f'' paired with an almost-critical point across the resonance.
/// Throws recipe-failed naming the stage.
NonfoldCandidate find_positive_delta_nonfold(const DiscreteLaplacian& L, const Nonlinearity& f,
                                             const NonfoldOptions& options = {});

/// Two-valued zero of (lambda_1, delta_1): left level where f''' = 0, right
/// level found by bracketing delta along an interval opposite in both the sign
/// of f' - mu_1 and of f''. Throws no-sign-change or recipe-failed.
NonfoldCandidate find_regular_nonfold(const DiscreteLaplacian& L, const Nonlinearity& f,
                                      const NonfoldOptions& options = {});

/// Resonant levels: x_mu, y_mu with f' = mu_k at both, so lambda_k = 0 for
/// every angle; the angle is bracketed on delta_k. Apex at argmax |psi_k| for
/// k > 1. Throws degenerate-mu_k when mu_k is not simple.
NonfoldCandidate find_nonfold_Hk(const DiscreteLaplacian& L, const Nonlinearity& f, int k,
                                 const NonfoldOptions& options = {});

}  // namespace apsing
