#include "ngd/app/session.hpp"

#include <cmath>

#include "ngd/core/error.hpp"
#include "ngd/lang/language.hpp"
#include "ngd/narrate/objects.hpp"

namespace ngd::app {

using nlohmann::json;

world::Scene session_scene(Rng& rng) {
  const auto& seen = narrate::ObjectLibrary::standard().seen;
  const auto conts = narrate::containers(seen);
  auto loose = narrate::non_containers(seen);
  world::Scene scene;
  scene.objects.push_back(narrate::make_instance(*conts[uniform_index(rng, conts.size())],
                                                 0, uniform(rng, 20.0, 40.0),
                                                 uniform(rng, 22.0, 33.0), rng));
  const auto& c = scene.objects.front();
  for (int id = 1; id <= 3; ++id) {
    const std::size_t pick = uniform_index(rng, loose.size());
    const auto* spec = loose[pick];
    loose.erase(loose.begin() + static_cast<std::ptrdiff_t>(pick));
    for (int attempt = 0; attempt < 1000; ++attempt) {
      auto o = narrate::make_instance(*spec, id, c.cx + uniform(rng, -15.0, 15.0),
                                      c.cy + uniform(rng, -15.0, 15.0), rng);
      bool clear = true;
      for (const auto& other : scene.objects)
        clear = clear && (std::abs(o.cx - other.cx) >= (o.w + other.w) / 2 + 1.0 ||
                          std::abs(o.cy - other.cy) >= (o.h + other.h) / 2 + 1.0);
      if (clear) {
        scene.objects.push_back(o);
        break;
      }
    }
  }
  return scene;
}

InstructSession::InstructSession(std::shared_ptr<const InstructModels> models,
                                 std::uint64_t seed)
    : models_(std::move(models)), seed_(seed) {
  if (models_->detector)
    scorer_ = std::make_unique<detector::DetectorScorer>(*models_->detector);
  reset(seed);
}

void InstructSession::reset(std::optional<std::uint64_t> seed) {
  rng_ = seed ? make_rng(*seed, "session") : make_rng(seed_, "session", ++resets_);
  scene_ = session_scene(rng_);
  instruction_.reset();
  episode_.reset();
  goal_.reset();
  steps_taken_ = 0;
  success_.reset();
}

std::optional<double> InstructSession::current_score() const {
  if (!episode_ || !scorer_) return std::nullopt;
  return scorer_->score(episode_->utterance,
                        world::normalized_features(scene_, episode_->subject_id),
                        world::normalized_features(scene_, episode_->object_id));
}

json InstructSession::instruct(const std::string& text) {
  const auto parsed = lang::parse_text(text);
  const auto& subject = world::find_category(scene_, parsed.subject);
  const auto& object = world::find_category(scene_, parsed.object);

  policy::Episode e;
  e.subject_id = subject.id;
  e.object_id = object.id;
  e.relation = parsed.relation;
  e.utterance = text;
  if (scene_.held) scene_ = world::release_object(scene_);
  scene_.held = subject.id;
  e.scene = scene_;

  const detector::OracleScorer oracle;
  const detector::Scorer& scorer =
      scorer_ ? static_cast<const detector::Scorer&>(*scorer_) : oracle;
  goal_ = synthesis::synthesize_goal(scorer, text, scene_, models_->synthesis, rng_);
  episode_ = std::move(e);
  instruction_ = text;
  steps_taken_ = 0;
  success_.reset();

  json out{{"parsed",
            {{"subject", parsed.subject},
             {"relation", lang::relation_label(parsed.relation)},
             {"object", parsed.object}}},
           {"goal", *goal_}};
  const auto s = current_score();
  out["score"] = s ? json(*s) : json(nullptr);
  out["reward"] = s ? json(*s > scorer_->threshold(text)) : json(nullptr);
  return out;
}

json InstructSession::step(std::size_t count) {
  const std::size_t horizon = models_->episode.horizon;
  if (!episode_ || steps_taken_ >= horizon)
    throw NoInstruction("no active instruction; POST /instruct first");
  json scenes = json::array();
  for (std::size_t i = 0; i < count && steps_taken_ < horizon; ++i) {
    world::Action a = world::Action::Forward;
    if (models_->policy) {
      const auto q = models_->policy->q_values(policy::encode_state(
          models_->policy->variant(), scene_, episode_->subject_id, episode_->object_id));
      std::size_t best = 0;
      for (std::size_t k = 1; k < q.size(); ++k)
        if (q[k] > q[best]) best = k;
      a = world::kAllActions[best];
    } else {
      // Without a policy, move greedily toward the synthesized goal.
      double best_d = INFINITY;
      for (world::Action cand : world::kAllActions) {
        const auto n = world::apply_action(scene_, cand, models_->episode.step);
        const double d = policy::goal_distance(n, episode_->subject_id,
                                               policy::Goal{goal_->cx, goal_->cy});
        if (d < best_d - 1e-9) {
          best_d = d;
          a = cand;
        }
      }
    }
    scene_ = world::apply_action(scene_, a, models_->episode.step);
    ++steps_taken_;
    if (steps_taken_ == horizon) {
      scene_ = world::release_object(scene_);
      success_ = world::predicate_holds(scene_, episode_->subject_id,
                                        episode_->object_id, episode_->relation);
    }
    scenes.push_back({{"action", world::action_name(a)}, {"scene", scene_}});
  }
  json out = state();
  out["scenes"] = std::move(scenes);
  return out;
}

json InstructSession::state() const {
  const std::size_t horizon = models_->episode.horizon;
  json out{{"scene", scene_},
           {"steps_taken", steps_taken_},
           {"horizon", horizon},
           {"done", episode_ && steps_taken_ >= horizon}};
  out["instruction"] = instruction_ ? json(*instruction_) : json(nullptr);
  out["goal"] = goal_ ? json{{"cx", goal_->cx}, {"cy", goal_->cy}} : json(nullptr);
  const auto s = current_score();
  out["score"] = s ? json(*s) : json(nullptr);
  out["reward"] = s ? json(*s > scorer_->threshold(episode_->utterance)) : json(nullptr);
  out["success"] = success_ ? json(*success_) : json(nullptr);
  return out;
}

SessionStore::SessionStore(std::shared_ptr<const InstructModels> models,
                           std::uint64_t seed)
    : models_(std::move(models)), seed_(seed) {}

std::string SessionStore::create() {
  std::lock_guard<std::mutex> lock(mutex_);
  const std::uint64_t n = next_++;
  const std::string id = "s" + std::to_string(n);
  sessions_.emplace(id, std::make_shared<Entry>(
                            InstructSession(models_, derive_seed(seed_, "session", n))));
  return id;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownId("unknown session '" + id + "'");
  return it->second;
}

}  // namespace ngd::app
