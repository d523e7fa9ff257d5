#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apsing/domain.hpp"
#include "apsing/fiber.hpp"
#include "apsing/mollifier.hpp"
#include "apsing/nonlinearity.hpp"
#include "apsing/sector.hpp"

namespace apsing {

enum class CriticalKind { Fold, RegularNonfold, Cusp, CollapsingCandidate, Degenerate };

std::string_view to_string(CriticalKind kind);

struct ClassifyOptions {
  double tol = 1e-8;        // |lambda_k| and |delta_k| at a nonfold
  double tol_tau = 1e-6;
  double tol_ind = 1e-6;
  double roughness_cap = 0.1;  // above it u is treated as two-valued, not smooth
  int k = 1;
};

/// One right-hand side of a local census: y_s = z_c + s g + h_star psi_1.
struct CensusSample {
  double s = 0.0;
  double h_star = 0.0;
  int count = 0;           // distinct preimages inside the census ball
  int fiber_crossings = 0;  // crossings of h = h_star on the local trace
  std::vector<double> t;   // fiber coordinate of each counted preimage
};

struct SingularityCertificate {
  CriticalKind kind = CriticalKind::Degenerate;
  int k = 1;
  GridFunction u;
  double lambda = 0.0;
  double delta = 0.0;
  std::optional<double> tau;
  double independence = 0.0;
  double roughness = 0.0;
  ClassifyOptions tolerances;
  std::vector<CensusSample> census;
  double census_radius = 0.0;
  double census_scale = 0.0;  // largest |s|
};

/// Decision tree: |delta| > tol -> Fold; independence <= tol_ind -> Degenerate;
/// roughness > cap -> RegularNonfold; |tau| > tol_tau -> Cusp; otherwise
/// CollapsingCandidate. Independence uses the probe pair when given, the
/// normalized gradients otherwise. Requires |lambda_k(u)| <= tol.
SingularityCertificate classify_critical_point(const DiscreteLaplacian& L, const GridFunction& u,
                                               const Nonlinearity& f,
                                               const ClassifyOptions& options = {},
                                               const GridFunction* v1 = nullptr,
                                               const GridFunction* v2 = nullptr);

struct PreimageOptions {
  double tol = 1e-11;
  double accept = 1e-8;
  int max_iterations = 60;
  int max_halvings = 30;
  double separation = 1e-2;  // relative to the largest solution norm
  int threads = 0;           // 0: AP_THREADS or hardware concurrency
};

struct PreimageCertificate {
  GridFunction y;
  std::vector<GridFunction> solutions;
  std::vector<double> residuals;   // weighted norm of F(u) - y
  std::vector<double> t;           // <u, psi_1>
  std::vector<double> z_residual;  // |Pi_W F(u) - Pi_W y|
  Eigen::MatrixXd distances;
  double separation = 0.0;  // absolute threshold used
  int starts = 0;
  int converged = 0;
  int dropped = 0;  // starts that failed to converge
  int outside = 0;  // converged outside the requested ball
};

/// Damped Newton on F(u) = y from every start; converged solutions are merged
/// when closer than separation * max |solution|, keeping the smaller residual.
/// With a center, solutions farther than `radius` from it are discarded before
/// merging. Solutions are returned sorted by t.
PreimageCertificate newton_preimages(const DiscreteLaplacian& L, const Nonlinearity& f,
                                     const GridFunction& y, const std::vector<GridFunction>& starts,
                                     const PreimageOptions& options = {},
                                     const GridFunction* center = nullptr,
                                     double radius = 0.0);

/// Recompute residuals and distances of a certificate from y and the solutions.
/// Returns the worst residual; throws range-violation when any residual
/// exceeds `accept` or two solutions are closer than the recorded separation.
double recheck_certificate(const DiscreteLaplacian& L, const Nonlinearity& f,
                           const PreimageCertificate& c, double accept = 1e-8);

/// Every t in (lo, hi) along `trace` where h crosses `level`, polished on the
/// fiber. Returns the fiber points.
std::vector<FiberPoint> height_crossings(const DiscreteLaplacian& L, const Nonlinearity& f,
                                         const FiberTrace& trace, double level);

struct FourPreimageOptions {
  double sigma = 0.0;  // 0: 3h
  NonfoldOptions nonfold{};
  RestoreOptions restore{};
  double initial_window = 4.0;  // t half-width, doubled until both maxima are bracketed
  int max_doublings = 6;
  int samples = 400;            // trace resolution over the window
  PreimageOptions newton{};
};

struct FourPreimageResult {
  NonfoldCandidate candidate;
  MollifyResult mollified;
  FiberTrace trace;
  std::vector<CriticalPoint> critical;
  double t_min = 0.0, h_min = 0.0;
  double t_left_max = 0.0, h_left_max = 0.0;
  double t_right_max = 0.0, h_right_max = 0.0;
  double h_star = 0.0;
  PreimageCertificate certificate;
};

/// Positive-delta nonfold -> smoothing with lambda_1 restored -> the fiber
/// through it -> a local minimum of the height flanked by two maxima -> the
/// level halfway between the minimum and the lower maximum -> its crossings,
/// polished by Newton. Throws stage-failure naming the stage.
FourPreimageResult four_preimage_certificate(const DiscreteLaplacian& L, const Nonlinearity& f,
                                             const FourPreimageOptions& options = {});

struct CensusOptions {
  int per_side = 5;          // samples for s > 0 (and as many for s < 0), plus s = 0
  int random_starts = 40;
  double ball_fraction = 0.5;  // of |u_c|, capped by the distance to other critical points
  double target_width = 0.25;  // fold pair half-width at the largest |s|, relative to the ball
  std::uint64_t seed = 1;
  PreimageOptions newton{};
};

struct CuspOptions {
  std::string recipe = "regular";  // regular | hk
  int k = 1;
  double sigma = 0.0;  // 0: 3h
  NonfoldOptions nonfold{};
  ClassifyOptions classify{};
  CensusOptions census{};
  bool run_census = true;
};

struct CollapseReport {
  double window = 0.0;
  int samples = 0;
  double h_variation = 0.0;
  double lambda_variation = 0.0;
  double tol = 0.0;
  bool collapsing = false;
};

struct CuspResult {
  NonfoldCandidate candidate;
  MollifyResult mollified;
  SingularityCertificate certificate;
  GridFunction unfolding;  // unit direction g in W
  std::optional<CollapseReport> collapse;
};

/// Regular (or resonant-level) nonfold -> smoothing with (lambda, delta) restored ->
/// classification -> for a cusp, a census of local preimage counts along the
/// unfolding z_c + s g of the fiber. Throws stage-failure naming the stage.
CuspResult cusp_certificate(const DiscreteLaplacian& L, const Nonlinearity& f,
                            const CuspOptions& options = {});

/// Local census around a cusp u_c (called by cusp_certificate).
std::vector<CensusSample> census_counts(const DiscreteLaplacian& L, const Nonlinearity& f,
                                        const GridFunction& u_c, const GridFunction& g,
                                        const CensusOptions& options, double* radius,
                                        double* scale);

/// Unit direction in W along which the fiber of a cusp unfolds:
/// Pi_W DF(u) Pi_W grad lambda_1(u), normalized.
GridFunction unfolding_direction(const DiscreteLaplacian& L, const Nonlinearity& f,
                                 const GridFunction& u);

struct CollapseOptions {
  double window = 1.0;   // t half-width of the trace
  int samples = 100;
  double tol = 1e-8;     // variation threshold for the flag
  double nonfold_tol = 1e-8;
};

/// Trace the fiber through a nonfold and measure the variation of h and
/// lambda_1 along it. Requires |(lambda_1, delta_1)(u_nf)| <= nonfold_tol.
CollapseReport detect_collapsing_fiber(const DiscreteLaplacian& L, const Nonlinearity& f,
                                       const GridFunction& u_nf, const CollapseOptions& options = {});

/// The same measurement on a given trace.
CollapseReport collapse_from_trace(const FiberTrace& trace, double tol);

/// From a cusp result: the census sample with the most preimages (at least 3),
/// rebuilt and polished into a certificate.
PreimageCertificate three_preimage_certificate(const DiscreteLaplacian& L, const Nonlinearity& f,
                                               const CuspResult& cusp,
                                               const CensusOptions& options = {});

/// Worker count: AP_THREADS when set and positive, else hardware concurrency.
int worker_threads(int requested = 0);

}  // namespace apsing
