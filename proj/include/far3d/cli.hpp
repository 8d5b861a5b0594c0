#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "far3d/fusion.hpp"
#include "far3d/metrics.hpp"
#include "far3d/synth.hpp"

namespace far3d::cli {

// Bad flag values or config contents. Reported with exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every setting with its default. A config file is merged over this, explicit
// flags over that; the result is echoed as resolved_config.json.
nlohmann::json default_config();

// Throws ConfigError on unknown keys or mistyped values.
void check_config_keys(const nlohmann::json& cfg);

SynthConfig synth_config_from(const nlohmann::json& cfg);
EvalConfig eval_config_from(const nlohmann::json& cfg);
FusionOptions fusion_options_from(const nlohmann::json& cfg);

// "0-50,50-80" -> [[0,50],[50,80]]
nlohmann::json parse_bands(std::string_view text);

// Runs the command line (without the program name). Returns the process exit
// code: 0 success, 2 usage or validation error, 1 internal error.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace far3d::cli
