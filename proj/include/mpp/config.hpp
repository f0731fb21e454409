#pragma once

#include <filesystem>
#include <string>

#include "mpp/sim_harness.hpp"

namespace mpp {

/// Scenario configuration as a JSON document with one object per module.
/// Every field is optional when reading; unknown keys are rejected.
std::string config_to_json(const ScenarioConfig& cfg, int indent = 2);

/// Throws ConfigInvalid on malformed JSON, unknown keys, wrong types or a
/// configuration that fails ScenarioConfig::validate(). `base_dir` resolves a
/// relative `field_file`.
ScenarioConfig config_from_json(const std::string& text,
                                const std::filesystem::path& base_dir = {});

ScenarioConfig load_config(const std::filesystem::path& path);

}  // namespace mpp
