#include "ngd/synthesis/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "ngd/core/error.hpp"
#include "ngd/core/json_util.hpp"

namespace ngd::synthesis {

void SynthesisConfig::validate() const {
  if (samples < 1) throw ConfigError("synthesis: samples must be >= 1");
  if (!(window > 0.0)) throw ConfigError("synthesis: window must be > 0");
}

void to_json(nlohmann::json& j, const SynthesisConfig& c) {
  j = nlohmann::json{{"samples", c.samples}, {"window", c.window}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SynthesisConfig& c) {
  check_keys(j, {"samples", "window", "seed"}, "synthesis");
  read_opt(j, "samples", c.samples);
  read_opt(j, "window", c.window);
  read_opt(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const GoalConfiguration& g) {
  j = nlohmann::json{{"cx", g.cx},
                     {"cy", g.cy},
                     {"score", g.score},
                     {"satisfies_oracle", g.satisfies_oracle}};
}

bool plausible(const world::Scene& scene, const world::ObjectInstance& subject) {
  if (subject.cx - subject.w / 2 < 0 || subject.cx + subject.w / 2 > scene.width ||
      subject.cy - subject.h / 2 < 0 || subject.cy + subject.h / 2 > scene.depth)
    return false;
  for (const auto& o : scene.objects) {
    if (o.id == subject.id || o.is_container) continue;
    const bool apart = std::abs(o.cx - subject.cx) >= (o.w + subject.w) / 2 ||
                       std::abs(o.cy - subject.cy) >= (o.h + subject.h) / 2;
    if (!apart) return false;
  }
  return true;
}

GoalConfiguration synthesize_goal(const detector::Scorer& scorer,
                                  const std::string& utterance,
                                  const world::Scene& scene,
                                  const SynthesisConfig& config, Rng& rng) {
  config.validate();
  const auto parsed = lang::parse_text(utterance);
  world::ObjectInstance subject = world::find_category(scene, parsed.subject);
  const world::ObjectInstance& object = world::find_category(scene, parsed.object);
  const auto fo = world::features_of(object, scene.width, scene.depth);

  const double x_lo = std::max(subject.w / 2, object.cx - config.window);
  const double x_hi = std::min(scene.width - subject.w / 2, object.cx + config.window);
  const double y_lo = std::max(subject.h / 2, object.cy - config.window);
  const double y_hi = std::min(scene.depth - subject.h / 2, object.cy + config.window);

  std::optional<GoalConfiguration> best;
  for (std::size_t i = 0; i < config.samples; ++i) {
    subject.cx = uniform(rng, x_lo, x_hi);
    subject.cy = uniform(rng, y_lo, y_hi);
    if (!plausible(scene, subject)) continue;
    const double s =
        scorer.score(utterance, world::features_of(subject, scene.width, scene.depth), fo);
    if (!best || s > best->score)
      best = GoalConfiguration{subject.cx, subject.cy, s,
                               world::relation_holds(subject, object, parsed.relation)};
  }
  if (!best)
    throw NoPlausiblePlacement("no plausible placement among " +
                               std::to_string(config.samples) + " samples");
  return *best;
}

GoalConfiguration synthesize_goal(const detector::Scorer& scorer,
                                  const std::string& utterance,
                                  const world::Scene& scene,
                                  const SynthesisConfig& config) {
  Rng rng = make_rng(config.seed, "synthesis");
  return synthesize_goal(scorer, utterance, scene, config, rng);
}

double shaping_reward(double cx, double cy, const GoalConfiguration& goal) {
  return std::hypot(cx - goal.cx, cy - goal.cy);
}

}  // namespace ngd::synthesis
