#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "apsing/config.hpp"
#include "apsing/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Certificates for semilinear elliptic maps -Lap u - f(u)"};
  app.set_version_flag("--version", apsing::version());
  std::string pipeline, config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  app.add_option("pipeline", pipeline, "spectrum | fiber | balance | four-preimages | cusp | classify")
      ->required()
      ->check(CLI::IsMember(apsing::pipeline_names()));
  app.add_option("--config,-c", config, "TOML-style config file")->required();
  app.add_option("--out,-o", out, "output directory (overrides the config)");
  app.add_option("--seed", seed, "seed for randomized starts (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : apsing::kExitConfig;
  }
  return apsing::run_file(pipeline, config, out, seed, std::cerr);
}
