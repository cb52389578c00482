#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ngd/detector/detector.hpp"
#include "ngd/narrate/narrate.hpp"
#include "ngd/policy/policy.hpp"
#include "ngd/synthesis/synthesis.hpp"

namespace ngd::app {

// Every module configuration in one document. The top-level seed is copied
// into each module before that module's own keys are applied.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string data_dir;  // empty: NGD_DATA_DIR, then "ngd-data"
  narrate::GeneratorConfig generator;
  detector::TrainConfig detector;
  synthesis::SynthesisConfig synthesis;
  policy::DQNConfig dqn;
  policy::EpisodeConfig episode;

  void set_seed(std::uint64_t s);
  std::filesystem::path data_path() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
// Throws ConfigError naming the first unknown key.
void from_json(const nlohmann::json& j, RunConfig& c);

// Throws IoError, ConfigError.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ngd::app
