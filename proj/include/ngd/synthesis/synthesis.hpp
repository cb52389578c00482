#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ngd/core/rng.hpp"
#include "ngd/detector/detector.hpp"
#include "ngd/world/world.hpp"

namespace ngd::synthesis {

struct SynthesisConfig {
  std::size_t samples = 256;
  // Candidates are drawn within this many cm of the object on each axis.
  double window = 18.0;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthesisConfig& c);
void from_json(const nlohmann::json& j, SynthesisConfig& c);

struct GoalConfiguration {
  double cx = 0.0, cy = 0.0;  // target subject center, cm
  double score = 0.0;
  bool satisfies_oracle = false;  // diagnostic only
};

void to_json(nlohmann::json& j, const GoalConfiguration& g);

// A subject placement is plausible when the box lies on the table and
// overlaps no other non-container object. Containers may be overlapped.
bool plausible(const world::Scene& scene, const world::ObjectInstance& subject);

// Samples `config.samples` subject placements around the object (which
// stays fixed),
// scores the plausible ones and returns the best (first sampled on ties).
// Throws ParseError, UnknownCategory, NoPlausiblePlacement.
GoalConfiguration synthesize_goal(const detector::Scorer& scorer,
                                  const std::string& utterance,
                                  const world::Scene& scene,
                                  const SynthesisConfig& config, Rng& rng);
// Same, with the generator seeded from config.seed.
GoalConfiguration synthesize_goal(const detector::Scorer& scorer,
                                  const std::string& utterance,
                                  const world::Scene& scene,
                                  const SynthesisConfig& config);

// Euclidean distance in cm between the subject center and the goal.
double shaping_reward(double cx, double cy, const GoalConfiguration& goal);

}  // namespace ngd::synthesis
