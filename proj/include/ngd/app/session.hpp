#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "ngd/detector/detector.hpp"
#include "ngd/policy/policy.hpp"
#include "ngd/synthesis/synthesis.hpp"
#include "ngd/world/world.hpp"

namespace ngd::app {

// Read-only models shared by every session.
struct InstructModels {
  std::shared_ptr<const detector::DetectorModel> detector;
  std::shared_ptr<const policy::QNetwork> policy;
  policy::EpisodeConfig episode;
  synthesis::SynthesisConfig synthesis;
};

// Tabletop with one container and three loose objects; nothing held.
world::Scene session_scene(Rng& rng);

class InstructSession {
 public:
  InstructSession(std::shared_ptr<const InstructModels> models, std::uint64_t seed);

  void reset(std::optional<std::uint64_t> seed = std::nullopt);
  // Parses, grasps the subject, synthesizes a goal. Throws ParseError,
  // UnknownCategory, NoPlausiblePlacement.
  nlohmann::json instruct(const std::string& text);
  // Up to `count` greedy actions; releases after the T-th. Throws
  // NoInstruction when no instruction is active.
  nlohmann::json step(std::size_t count);
  nlohmann::json state() const;

  const world::Scene& scene() const { return scene_; }

 private:
  std::optional<double> current_score() const;

  std::shared_ptr<const InstructModels> models_;
  std::unique_ptr<detector::DetectorScorer> scorer_;
  std::uint64_t seed_;
  std::uint64_t resets_ = 0;
  Rng rng_;
  world::Scene scene_;
  std::optional<std::string> instruction_;
  std::optional<policy::Episode> episode_;
  std::optional<synthesis::GoalConfiguration> goal_;
  std::size_t steps_taken_ = 0;
  std::optional<bool> success_;
};

// Session registry; each session is serialized by its own mutex.
class SessionStore {
 public:
  explicit SessionStore(std::shared_ptr<const InstructModels> models,
                        std::uint64_t seed = 1);

  std::string create();
  // Runs `fn` under the session's lock. Throws UnknownId.
  template <class Fn>
  auto with(const std::string& id, Fn&& fn) {
    auto entry = find(id);
    std::lock_guard<std::mutex> lock(entry->mutex);
    return fn(entry->session);
  }

 private:
  struct Entry {
    explicit Entry(InstructSession s) : session(std::move(s)) {}
    std::mutex mutex;
    InstructSession session;
  };
  std::shared_ptr<Entry> find(const std::string& id);

  std::shared_ptr<const InstructModels> models_;
  std::uint64_t seed_;
  std::mutex mutex_;
  std::uint64_t next_ = 1;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace ngd::app
