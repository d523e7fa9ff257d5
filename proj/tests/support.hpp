#pragma once

#include <cmath>
#include <random>

#include "apsing/domain.hpp"
#include "apsing/nonlinearity.hpp"

namespace apsing::testing {

inline const double kPi = std::acos(-1.0);

// Nonconvex reference family: a bump below resonance on a 2 -> 15 sigmoid.
inline Nonlinearity reference_family() { return construct_sigmoid_bump(2.0, 15.0, -3.0, 0.5, 5.0); }

// Convex Ambrosetti-Prodi control with the same slope range.
inline Nonlinearity convex_family() { return construct_poly_clamped(2.0, 15.0, -2.0, 2.0); }

// Low-mode random function: mean + amp * sum_k a_k cos(k pi x + phase_k)/k,
// with a matching y-factor on rectangles.
inline GridFunction smooth_random(const Domain& d, std::mt19937& rng, double mean, double amp) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double a[5], b[3];
  for (double& c : a) c = U(rng);
  for (double& c : b) c = U(rng);
  const double Lx = d.bx - d.ax, Ly = d.by - d.ay;
  return GridFunction::sample(d, [&](double x, double y) {
    const double sx = (x - d.ax) / Lx;
    double s = 0.0;
    for (int k = 0; k < 5; ++k) s += a[k] * std::cos((k + 1) * kPi * sx + 0.3 * k) / (k + 1);
    if (d.dim == 2) {
      const double sy = (y - d.ay) / Ly;
      double t = 1.0;
      for (int k = 0; k < 3; ++k) t += 0.5 * b[k] * std::cos((k + 1) * kPi * sy + 0.7 * k);
      s *= t;
    }
    return mean + amp * s;
  });
}

}  // namespace apsing::testing
