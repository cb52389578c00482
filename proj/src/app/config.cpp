#include "ngd/app/config.hpp"

#include <cstdlib>
#include <fstream>

#include "ngd/core/error.hpp"
#include "ngd/core/json_util.hpp"

namespace ngd::app {

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  generator.seed = s;
  detector.seed = s;
  synthesis.seed = s;
  dqn.seed = s;
}

std::filesystem::path RunConfig::data_path() const {
  if (!data_dir.empty()) return data_dir;
  if (const char* env = std::getenv("NGD_DATA_DIR"); env && *env) return env;
  return "ngd-data";
}

void RunConfig::validate() const {
  generator.validate();
  detector.validate();
  synthesis.validate();
  dqn.validate();
  episode.validate();
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"seed", c.seed},
                     {"data_dir", c.data_dir},
                     {"generator", c.generator},
                     {"detector", c.detector},
                     {"synthesis", c.synthesis},
                     {"dqn", c.dqn},
                     {"episode", c.episode}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  check_keys(j, {"seed", "data_dir", "generator", "detector", "synthesis", "dqn", "episode"},
             "config");
  std::uint64_t seed = c.seed;
  read_opt(j, "seed", seed);
  c.set_seed(seed);
  read_opt(j, "data_dir", c.data_dir);
  read_opt(j, "generator", c.generator);
  read_opt(j, "detector", c.detector);
  read_opt(j, "synthesis", c.synthesis);
  read_opt(j, "dqn", c.dqn);
  read_opt(j, "episode", c.episode);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

}  // namespace ngd::app
