#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ngd/core/rng.hpp"
#include "ngd/detector/detector.hpp"
#include "ngd/nn/layers.hpp"
#include "ngd/synthesis/synthesis.hpp"
#include "ngd/world/world.hpp"

namespace ngd::policy {

using world::Action;

enum class Variant { Object, Raster };
// Oracle: oracle goal shaping + ground-truth terminal reward (R_gt).
// Detector: synthesized goal shaping + detector terminal reward (R_d).
// Binary: ground-truth terminal reward only.
enum class RewardSource { Oracle, Detector, Binary };

std::string_view variant_name(Variant v);          // "object" | "raster"
std::string_view reward_source_name(RewardSource r);  // "gt" | "d" | "binary"
Variant variant_from_name(std::string_view name);  // throws ConfigError
RewardSource reward_source_from_name(std::string_view name);

// ---- environment ---------------------------------------------------------

struct EpisodeConfig {
  std::size_t horizon = 5;
  double step = world::kStepSize;
  double region_x_lo = 10.0, region_x_hi = 50.0;  // container center region
  double region_y_lo = 20.0, region_y_hi = 35.0;
  double shaping_lambda = 0.1;  // per cm
  double terminal_bonus = 1.0;
  // -lambda * d_t per step instead of lambda * (d_{t-1} - d_t).
  bool raw_distance = false;

  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& j, const EpisodeConfig& c);
void from_json(const nlohmann::json& j, EpisodeConfig& c);

// Put-in-container task: the subject starts held, the container is placed
// in the region.
struct Episode {
  world::Scene scene;
  int subject_id = 0;
  int object_id = 1;
  world::Relation relation = world::Relation::In;
  std::string utterance;
};

void to_json(nlohmann::json& j, const Episode& e);

// Distinct subject centers reachable after exactly `steps` actions.
std::vector<std::pair<double, double>> reachable_ends(const world::Scene& scene,
                                                      std::size_t steps, double step);
// Some action sequence of length T leaves the predicate satisfied.
bool solvable(const Episode& episode, const EpisodeConfig& config);

// Starts are drawn within Chebyshev distance T*step of the container center,
// rejecting starts that already satisfy the predicate and unsolvable ones.
Episode sample_episode(const EpisodeConfig& config, bool unseen, Rng& rng);

// ---- states and networks -------------------------------------------------

inline constexpr std::size_t kObjectStateSize = 8;
inline constexpr std::size_t kRasterStateSize =
    3 * world::kRasterSize * world::kRasterSize;

// (f_subject, f_object); the order follows the expression roles.
std::vector<double> object_state(const world::Scene& scene, int subject_id,
                                 int object_id);
// Parses the utterance to find the roles. Throws ParseError, UnknownCategory.
std::vector<double> object_state(const world::Scene& scene,
                                 const std::string& utterance);
// Network input. Object features are centered and scaled by
// kObjectInputScale so that one step moves an input by about 0.8.
inline constexpr double kObjectInputScale = 10.0;
std::vector<double> encode_state(Variant variant, const world::Scene& scene,
                                 int subject_id, int object_id);

class QNetwork {
 public:
  struct Cache {
    std::vector<nn::Tensor> acts;  // input followed by every layer output
  };

  explicit QNetwork(Variant variant = Variant::Object);

  Variant variant() const { return variant_; }
  std::size_t input_size() const;

  void init(Rng& rng);
  void zero_output_layer();

  // x: N x input_size -> N x 4. Throws ShapeMismatch.
  nn::Tensor forward(const nn::Tensor& x) const;
  nn::Tensor forward(const nn::Tensor& x, Cache& cache) const;
  // Accumulates parameter gradients for dL/dQ.
  void backward(const Cache& cache, const nn::Tensor& dq);

  std::vector<double> q_values(std::span<const double> state) const;
  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  void copy_from(const QNetwork& other);

 private:
  Variant variant_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::Dense> dense_;
};

// ---- DQN -----------------------------------------------------------------

struct DQNConfig {
  double lr = 0.001;
  std::size_t batch = 128;
  double epsilon_start = 0.8;
  double epsilon_decay = 0.1;
  std::size_t epsilon_decay_every = 1000;  // action selections
  double epsilon_floor = 0.05;
  std::size_t update_every = 5;  // action selections per gradient step
  double gamma = 0.95;
  std::size_t replay_capacity = 50000;
  std::size_t warmup = 1000;
  std::size_t target_sync = 500;  // gradient steps
  bool use_target = true;
  std::size_t episodes = 8000;
  std::size_t eval_every = 250;
  std::size_t eval_episodes = 100;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& j, const DQNConfig& c);
void from_json(const nlohmann::json& j, DQNConfig& c);

// max(floor, start - decay * floor(n / decay_every))
double epsilon_at(const DQNConfig& config, std::size_t selections);

// Uniform with probability epsilon, otherwise argmax (lowest index on ties).
Action select_action(std::span<const double> q, double epsilon, Rng& rng);

struct Transition {
  world::Scene state;
  Action action = Action::Forward;
  double reward = 0.0;
  world::Scene next_state;
  bool terminal = false;
  int subject_id = 0;
  int object_id = 1;
};

// FIFO ring buffer.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  // Oldest first.
  const Transition& at(std::size_t i) const;
  // Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> items_;
};

// Mean Huber TD loss over the batch; accumulates gradients into `net`.
// y = r + gamma * max_a target(s', a), y = r at terminals.
double td_loss(QNetwork& net, const QNetwork& target,
               std::span<const Transition* const> batch, double gamma);

// ---- rewards and episodes ------------------------------------------------

struct Goal {
  double cx = 0.0, cy = 0.0;
};

// Reachable satisfying end position nearest to the subject's start.
// Throws NoGoal if the episode is unsolvable.
Goal oracle_goal(const Episode& episode, const EpisodeConfig& config);

double goal_distance(const world::Scene& scene, int subject_id, const Goal& goal);

// Reward for arriving in scene_t. Throws NoGoal when shaping is requested
// without a goal, MissingDetector for Detector without a scorer.
double reward_rule(RewardSource source, const world::Scene& scene_t,
                   double prev_distance, const Episode& episode,
                   const std::optional<Goal>& goal, bool terminal,
                   const EpisodeConfig& config,
                   const detector::Scorer* scorer = nullptr);

// Returns the action for `scene` at step index t.
using Chooser = std::function<Action(const world::Scene& scene, std::size_t t)>;

struct EpisodeResult {
  std::vector<Transition> transitions;
  std::vector<world::Scene> scenes;  // start, then after each action
  world::Scene final_scene;          // released
  bool success = false;
  double total_reward = 0.0;
};

// Exactly T actions, then release; success is the ground-truth predicate.
EpisodeResult run_episode(const EpisodeConfig& config, const Episode& episode,
                          const Chooser& chooser, RewardSource source,
                          const std::optional<Goal>& goal,
                          const detector::Scorer* scorer = nullptr);
EpisodeResult run_episode(const EpisodeConfig& config, const Episode& episode,
                          const QNetwork& net, RewardSource source,
                          const std::optional<Goal>& goal, double epsilon, Rng& rng,
                          const detector::Scorer* scorer = nullptr);

// Greedy planner toward the oracle goal.
Chooser oracle_chooser(const Episode& episode, const EpisodeConfig& config);
Chooser greedy_chooser(const QNetwork& net, const Episode& episode);

// Goal used for shaping under `source` (nullopt for Binary).
std::optional<Goal> episode_goal(RewardSource source, const Episode& episode,
                                 const EpisodeConfig& config,
                                 const detector::Scorer* scorer,
                                 const synthesis::SynthesisConfig& synth, Rng& rng);

// ---- training and evaluation ---------------------------------------------

struct CurvePoint {
  std::size_t episode = 0;
  double success_rate = 0.0;
  double epsilon = 0.0;
  double mean_td_loss = 0.0;
};

struct TrainResult {
  QNetwork net;
  std::vector<CurvePoint> curve;
  std::size_t selections = 0;
  std::size_t updates = 0;
};

// Throws MissingDetector when source is Detector and scorer is null.
TrainResult train_dqn(const EpisodeConfig& env, const DQNConfig& dqn,
                      RewardSource source, Variant variant,
                      const detector::Scorer* scorer = nullptr,
                      const synthesis::SynthesisConfig& synth = {});

// Success rate of greedy episodes on seen or unseen objects.
double evaluate_policy(const QNetwork& net, const EpisodeConfig& config,
                       std::size_t n, bool unseen, Rng& rng);
// Chooser built per episode.
double evaluate_chooser(const std::function<Chooser(const Episode&)>& make,
                        const EpisodeConfig& config, std::size_t n, bool unseen,
                        Rng& rng);

std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace ngd::policy
