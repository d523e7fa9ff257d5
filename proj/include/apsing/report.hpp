#pragma once

#include <Eigen/Core>
#include <string>

#include "apsing/fiber.hpp"
#include "apsing/singularity.hpp"
#include "json.hpp"

namespace apsing {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "apsing-report/1";

Json to_json(const Domain& d);
Json to_json(const Nonlinearity& f);
Json to_json(const GridFunction& u);
Json to_json(const ClassifyOptions& o);
Json to_json(const PreimageOptions& o);
Json to_json(const MollifyResult& m);
Json to_json(const NonfoldCandidate& c);
Json to_json(const SingularityCertificate& c);
Json to_json(const PreimageCertificate& c);
Json to_json(const CollapseReport& r);

/// Rebuild a preimage certificate (y, solutions, separation) from its JSON
/// form; residuals and distances are left for recheck_certificate.
PreimageCertificate preimage_certificate_from_json(const Json& j, const Domain& d);

/// Write `j` with two-space indent and a trailing newline. Throws io-error.
void write_json(const std::string& path, const Json& j);

/// CSV "t,h,lambda1,newton_residual,w_norm", one row per fiber point.
void emit_trace(const FiberTrace& trace, const std::string& path);

/// CSV "theta,lambda1" on `samples` equally spaced angles in [0, 2 pi].
void emit_theta_sweep(const DiscreteLaplacian& L, double left_level, double right_level,
                      const Eigen::Vector2d& p, int samples, const std::string& path);

/// CSV "x,f,df,d2f,d3f" on the scan window.
void emit_nonlinearity(const Nonlinearity& f, const ScanWindow& window, int samples,
                       const std::string& path);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace apsing
