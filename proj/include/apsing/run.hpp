#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "apsing/config.hpp"

namespace apsing {

inline constexpr int kExitOk = 0;
inline constexpr int kExitStageFailure = 2;
inline constexpr int kExitConfig = 3;

/// Run one pipeline and write report.json, manifest.json and traces/*.csv
/// under config.out. Returns 0, or 2 when a stage fails (the report then
/// names the stage).
int run(const RunConfig& config, std::ostream& log);

/// Load and validate a config file, apply overrides, run. Config errors
/// return 3 before anything is written.
int run_file(const std::string& pipeline, const std::string& config_path,
             const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed,
             std::ostream& log);

const char* version();

}  // namespace apsing
