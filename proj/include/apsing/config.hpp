#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "apsing/domain.hpp"
#include "apsing/nonlinearity.hpp"

namespace apsing {

/// Scalar or numeric-array value of a config key.
using ConfigValue = std::variant<bool, double, std::string, std::vector<double>>;

/// Flat view of a TOML-style file: "section.key" -> value. Supports [section]
/// headers, comments, basic and literal strings, numbers, booleans and
/// single-line numeric arrays.
struct ConfigTable {
  std::map<std::string, ConfigValue> entries;
  std::map<std::string, int> lines;  // source line of each key
};

/// Throws config-error with the offending line.
ConfigTable parse_config(std::string_view text, const std::string& source = "<config>");
ConfigTable load_config(const std::string& path);

struct RunConfig {
  std::string pipeline;  // spectrum | fiber | balance | four-preimages | cusp | classify
  Domain domain;
  std::string family;
  std::map<std::string, double> parameters;
  bool auto_mu_k = false;  // wiggle without mu_k: take mu_k of the grid
  ScanWindow window;
  std::string out = "out";
  std::uint64_t seed = 1;
  int threads = 0;

  // tolerances
  double tol = 1e-8;
  double tol_tau = 1e-6;
  double tol_ind = 1e-6;
  double accept = 1e-8;
  double separation = 1e-2;
  double balance_tol = 1e-9;
  double collapse_tol = 1e-8;
  double roughness_cap = 0.1;

  // spectrum
  int count = 6;
  // fiber
  double t_lo = -20.0, t_hi = 20.0;
  double z_amplitude = 0.0;  // z = amplitude * psi_2
  // balance
  double left = 0.0, right = 0.0;
  int theta_samples = 65;
  // four-preimages and cusp
  double sigma = 0.0;  // 0: 3h
  std::string recipe = "regular";
  int k = 1;
  int per_side = 5;
  int random_starts = 40;
  bool three_preimages = true;

  std::string canonical;  // normalized key/value echo, sorted
};

const std::vector<std::string>& pipeline_names();

/// Validate and convert. Unknown keys, wrong types, non-positive tolerances
/// and unknown pipelines throw config-error. `pipeline` overrides the file.
RunConfig to_run_config(const ConfigTable& table, const std::string& pipeline = "");

}  // namespace apsing
