#pragma once

#include <string>

#include "smrl/harness.hpp"

namespace smrl {

// JSON run configuration mirroring ExperimentConfig; every key optional,
// unknown keys rejected with the offending key named.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Fully resolved configuration, echoed next to every run's outputs.
std::string config_to_json_text(const ExperimentConfig& cfg);
void write_resolved_config(const ExperimentConfig& cfg, const std::string& path);

}  // namespace smrl
