#include "ngd/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>

#include "ngd/core/error.hpp"
#include "ngd/core/json_util.hpp"
#include "ngd/core/log.hpp"
#include "ngd/lang/language.hpp"
#include "ngd/narrate/narrate.hpp"
#include "ngd/narrate/objects.hpp"
#include "ngd/nn/adam.hpp"

namespace ngd::policy {

using world::Scene;

std::string_view variant_name(Variant v) {
  return v == Variant::Object ? "object" : "raster";
}

std::string_view reward_source_name(RewardSource r) {
  switch (r) {
    case RewardSource::Oracle: return "gt";
    case RewardSource::Detector: return "d";
    case RewardSource::Binary: return "binary";
  }
  return "gt";
}

Variant variant_from_name(std::string_view name) {
  if (name == "object") return Variant::Object;
  if (name == "raster" || name == "rgb") return Variant::Raster;
  throw ConfigError("unknown policy variant '" + std::string(name) + "'");
}

RewardSource reward_source_from_name(std::string_view name) {
  if (name == "gt") return RewardSource::Oracle;
  if (name == "d") return RewardSource::Detector;
  if (name == "binary") return RewardSource::Binary;
  throw ConfigError("unknown reward source '" + std::string(name) + "'");
}

// ---- environment ---------------------------------------------------------

void EpisodeConfig::validate() const {
  if (horizon < 1) throw ConfigError("episode: horizon must be >= 1");
  if (!(step > 0.0)) throw ConfigError("episode: step must be > 0");
  if (!(region_x_lo <= region_x_hi) || !(region_y_lo <= region_y_hi))
    throw ConfigError("episode: empty container region");
  if (shaping_lambda < 0.0) throw ConfigError("episode: shaping_lambda must be >= 0");
}

void to_json(nlohmann::json& j, const EpisodeConfig& c) {
  j = nlohmann::json{{"horizon", c.horizon},
                     {"step", c.step},
                     {"region_x", {c.region_x_lo, c.region_x_hi}},
                     {"region_y", {c.region_y_lo, c.region_y_hi}},
                     {"shaping_lambda", c.shaping_lambda},
                     {"terminal_bonus", c.terminal_bonus},
                     {"raw_distance", c.raw_distance}};
}

void from_json(const nlohmann::json& j, EpisodeConfig& c) {
  check_keys(j,
             {"horizon", "step", "region_x", "region_y", "shaping_lambda",
              "terminal_bonus", "raw_distance"},
             "episode");
  read_opt(j, "horizon", c.horizon);
  read_opt(j, "step", c.step);
  std::array<double, 2> r{};
  if (j.contains("region_x")) {
    read_opt(j, "region_x", r);
    c.region_x_lo = r[0];
    c.region_x_hi = r[1];
  }
  if (j.contains("region_y")) {
    read_opt(j, "region_y", r);
    c.region_y_lo = r[0];
    c.region_y_hi = r[1];
  }
  read_opt(j, "shaping_lambda", c.shaping_lambda);
  read_opt(j, "terminal_bonus", c.terminal_bonus);
  read_opt(j, "raw_distance", c.raw_distance);
}

void to_json(nlohmann::json& j, const Episode& e) {
  j = nlohmann::json{{"scene", e.scene},
                     {"subject_id", e.subject_id},
                     {"object_id", e.object_id},
                     {"relation", lang::relation_label(e.relation)},
                     {"utterance", e.utterance}};
}

namespace {

using PosKey = std::pair<long long, long long>;

PosKey pos_key(double x, double y) {
  return {std::llround(x * 1e6), std::llround(y * 1e6)};
}

const world::ObjectInstance& held_object(const Scene& scene) {
  if (!scene.held) throw NothingHeld("no object is held");
  return scene.get(*scene.held);
}

}  // namespace

std::vector<std::pair<double, double>> reachable_ends(const Scene& scene,
                                                      std::size_t steps,
                                                      double step) {
  std::map<PosKey, Scene> layer;
  const auto& h = held_object(scene);
  layer.emplace(pos_key(h.cx, h.cy), scene);
  for (std::size_t t = 0; t < steps; ++t) {
    std::map<PosKey, Scene> next;
    for (const auto& [key, s] : layer) {
      for (Action a : world::kAllActions) {
        Scene n = world::apply_action(s, a, step);
        const auto& o = held_object(n);
        next.emplace(pos_key(o.cx, o.cy), std::move(n));
      }
    }
    layer = std::move(next);
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(layer.size());
  for (const auto& [key, s] : layer) {
    const auto& o = held_object(s);
    out.emplace_back(o.cx, o.cy);
  }
  return out;
}

namespace {

std::vector<std::pair<double, double>> satisfying_ends(const Episode& e,
                                                       const EpisodeConfig& c) {
  std::vector<std::pair<double, double>> out;
  world::ObjectInstance s = e.scene.get(e.subject_id);
  const auto& o = e.scene.get(e.object_id);
  for (const auto& [x, y] : reachable_ends(e.scene, c.horizon, c.step)) {
    s.cx = x;
    s.cy = y;
    if (world::relation_holds(s, o, e.relation)) out.emplace_back(x, y);
  }
  return out;
}

}  // namespace

bool solvable(const Episode& episode, const EpisodeConfig& config) {
  return !satisfying_ends(episode, config).empty();
}

Episode sample_episode(const EpisodeConfig& config, bool unseen, Rng& rng) {
  config.validate();
  const auto& set = narrate::ObjectLibrary::standard().pick(unseen);
  const auto conts = narrate::containers(set);
  const auto subs = narrate::non_containers(set);
  std::vector<const narrate::Template*> usable;
  for (const auto& t : narrate::templates())
    if (!t.held_out) usable.push_back(&t);
  const auto phrases = lang::SynonymTable::builtin().phrases(lang::Relation::In);
  const double reach = static_cast<double>(config.horizon) * config.step;

  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto& cs = *conts[uniform_index(rng, conts.size())];
    const auto& ss = *subs[uniform_index(rng, subs.size())];
    const double ox = uniform(rng, config.region_x_lo, config.region_x_hi);
    const double oy = uniform(rng, config.region_y_lo, config.region_y_hi);
    auto container = narrate::make_instance(cs, 1, ox, oy, rng);
    auto subject = narrate::make_instance(ss, 0, ox, oy, rng);
    const double x_lo = std::max(subject.w / 2, ox - reach);
    const double x_hi = std::min(world::kTableWidth - subject.w / 2, ox + reach);
    const double y_lo = std::max(subject.h / 2, oy - reach);
    const double y_hi = std::min(world::kTableDepth - subject.h / 2, oy + reach);
    subject.cx = uniform(rng, x_lo, x_hi);
    subject.cy = uniform(rng, y_lo, y_hi);

    Episode e;
    e.scene.objects = {subject, container};
    e.scene.held = subject.id;
    e.subject_id = subject.id;
    e.object_id = container.id;
    e.relation = lang::Relation::In;
    const auto& t = *usable[uniform_index(rng, usable.size())];
    e.utterance = narrate::render(t, ss.name, phrases[uniform_index(rng, phrases.size())],
                                  cs.name);
    if (world::relation_holds(subject, container, e.relation)) continue;
    if (!solvable(e, config)) continue;
    return e;
  }
  throw GenerationFailure("no solvable episode start in 1000 attempts");
}

// ---- states and networks -------------------------------------------------

std::vector<double> object_state(const Scene& scene, int subject_id, int object_id) {
  const auto fs = world::normalized_features(scene, subject_id);
  const auto fo = world::normalized_features(scene, object_id);
  std::vector<double> out(fs.v.begin(), fs.v.end());
  out.insert(out.end(), fo.v.begin(), fo.v.end());
  return out;
}

std::vector<double> object_state(const Scene& scene, const std::string& utterance) {
  const auto parsed = lang::parse_text(utterance);
  return object_state(scene, world::find_category(scene, parsed.subject).id,
                      world::find_category(scene, parsed.object).id);
}

std::vector<double> encode_state(Variant variant, const Scene& scene, int subject_id,
                                 int object_id) {
  if (variant == Variant::Object) {
    auto x = object_state(scene, subject_id, object_id);
    for (auto& v : x) v = (v - 0.5) * kObjectInputScale;
    return x;
  }
  return world::rasterize(scene).storage();
}

QNetwork::QNetwork(Variant variant) : variant_(variant) {
  if (variant == Variant::Object) {
    dense_ = {nn::Dense("q.fc1", kObjectStateSize, 512), nn::Dense("q.fc2", 512, 512),
              nn::Dense("q.fc3", 512, 4)};
  } else {
    convs_ = {nn::Conv2d("q.conv1", 3, 32, 5, 2), nn::Conv2d("q.conv2", 32, 32, 5, 2),
              nn::Conv2d("q.conv3", 32, 32, 3, 1), nn::Conv2d("q.conv4", 32, 16, 5, 2),
              nn::Conv2d("q.conv5", 16, 16, 3, 1)};
    std::size_t n = world::kRasterSize;
    for (const auto& c : convs_) n = c.output_size(n);
    dense_ = {nn::Dense("q.fc1", 16 * n * n, 256), nn::Dense("q.fc2", 256, 64),
              nn::Dense("q.fc3", 64, 4)};
  }
}

std::size_t QNetwork::input_size() const {
  return variant_ == Variant::Object ? kObjectStateSize : kRasterStateSize;
}

void QNetwork::init(Rng& rng) {
  for (auto& c : convs_) c.init(rng);
  for (auto& d : dense_) d.init(rng);
}

void QNetwork::zero_output_layer() {
  dense_.back().weight.value.fill(0.0);
  dense_.back().bias.value.fill(0.0);
}

nn::Tensor QNetwork::forward(const nn::Tensor& x) const {
  Cache cache;
  return forward(x, cache);
}

nn::Tensor QNetwork::forward(const nn::Tensor& x, Cache& cache) const {
  if (x.rank() != 2 || x.dim(1) != input_size())
    throw ShapeMismatch("q-network input " + nn::shape_string(x.shape()) +
                        ", expected N x " + std::to_string(input_size()));
  const std::size_t n = x.dim(0);
  cache.acts.clear();
  cache.acts.push_back(x);
  if (!convs_.empty()) {
    cache.acts.back().reshape({n, 3, world::kRasterSize, world::kRasterSize});
    for (const auto& c : convs_) {
      nn::Tensor y = c.forward(cache.acts.back());
      nn::relu_inplace(y);
      cache.acts.push_back(std::move(y));
    }
    nn::Tensor flat = cache.acts.back();
    flat.reshape({n, flat.size() / n});
    cache.acts.push_back(std::move(flat));
  }
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    nn::Tensor y = dense_[i].forward(cache.acts.back());
    if (i + 1 < dense_.size()) nn::relu_inplace(y);
    cache.acts.push_back(std::move(y));
  }
  return cache.acts.back();
}

void QNetwork::backward(const Cache& cache, const nn::Tensor& dq) {
  const auto& acts = cache.acts;
  nn::Tensor dy = dq;
  std::size_t k = acts.size() - 1;  // index of the current layer's output
  for (std::size_t i = dense_.size(); i-- > 0;) {
    if (i + 1 < dense_.size()) nn::relu_backward_inplace(acts[k], dy);
    dy = dense_[i].backward(acts[k - 1], dy);
    --k;
  }
  if (convs_.empty()) return;
  --k;  // skip the flattened copy
  dy.reshape(acts[k].shape());
  for (std::size_t i = convs_.size(); i-- > 0;) {
    nn::relu_backward_inplace(acts[k], dy);
    if (i == 0) {
      convs_[i].backward(acts[k - 1], dy);
    } else {
      dy = convs_[i].backward(acts[k - 1], dy);
    }
    --k;
  }
}

std::vector<double> QNetwork::q_values(std::span<const double> state) const {
  nn::Tensor x({1, state.size()}, std::vector<double>(state.begin(), state.end()));
  return forward(x).storage();
}

std::vector<nn::Param*> QNetwork::params() {
  std::vector<nn::Param*> out;
  for (auto& c : convs_)
    for (auto* p : c.params()) out.push_back(p);
  for (auto& d : dense_)
    for (auto* p : d.params()) out.push_back(p);
  return out;
}

std::vector<const nn::Param*> QNetwork::params() const {
  auto ps = const_cast<QNetwork*>(this)->params();
  return {ps.begin(), ps.end()};
}

void QNetwork::copy_from(const QNetwork& other) {
  if (other.variant_ != variant_) throw ShapeMismatch("q-network variant mismatch");
  auto dst = params();
  auto src = other.params();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
}

// ---- DQN -----------------------------------------------------------------

void DQNConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("dqn: lr must be > 0");
  if (batch < 1) throw ConfigError("dqn: batch must be >= 1");
  for (double e : {epsilon_start, epsilon_floor})
    if (e < 0.0 || e > 1.0) throw ConfigError("dqn: epsilon values must lie in [0, 1]");
  if (epsilon_decay < 0.0) throw ConfigError("dqn: epsilon_decay must be >= 0");
  if (epsilon_decay_every < 1 || update_every < 1 || target_sync < 1 || eval_every < 1)
    throw ConfigError("dqn: step counts must be >= 1");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("dqn: gamma must lie in [0, 1]");
  if (replay_capacity < batch)
    throw ConfigError("dqn: replay_capacity must be >= batch");
}

void to_json(nlohmann::json& j, const DQNConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"batch", c.batch},
                     {"epsilon_start", c.epsilon_start},
                     {"epsilon_decay", c.epsilon_decay},
                     {"epsilon_decay_every", c.epsilon_decay_every},
                     {"epsilon_floor", c.epsilon_floor},
                     {"update_every", c.update_every},
                     {"gamma", c.gamma},
                     {"replay_capacity", c.replay_capacity},
                     {"warmup", c.warmup},
                     {"target_sync", c.target_sync},
                     {"use_target", c.use_target},
                     {"episodes", c.episodes},
                     {"eval_every", c.eval_every},
                     {"eval_episodes", c.eval_episodes},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DQNConfig& c) {
  check_keys(j,
             {"lr", "batch", "epsilon_start", "epsilon_decay", "epsilon_decay_every",
              "epsilon_floor", "update_every", "gamma", "replay_capacity", "warmup",
              "target_sync", "use_target", "episodes", "eval_every", "eval_episodes",
              "seed"},
             "dqn");
  read_opt(j, "lr", c.lr);
  read_opt(j, "batch", c.batch);
  read_opt(j, "epsilon_start", c.epsilon_start);
  read_opt(j, "epsilon_decay", c.epsilon_decay);
  read_opt(j, "epsilon_decay_every", c.epsilon_decay_every);
  read_opt(j, "epsilon_floor", c.epsilon_floor);
  read_opt(j, "update_every", c.update_every);
  read_opt(j, "gamma", c.gamma);
  read_opt(j, "replay_capacity", c.replay_capacity);
  read_opt(j, "warmup", c.warmup);
  read_opt(j, "target_sync", c.target_sync);
  read_opt(j, "use_target", c.use_target);
  read_opt(j, "episodes", c.episodes);
  read_opt(j, "eval_every", c.eval_every);
  read_opt(j, "eval_episodes", c.eval_episodes);
  read_opt(j, "seed", c.seed);
}

double epsilon_at(const DQNConfig& c, std::size_t selections) {
  const double steps = static_cast<double>(selections / c.epsilon_decay_every);
  return std::clamp(c.epsilon_start - c.epsilon_decay * steps, c.epsilon_floor, 1.0);
}

Action select_action(std::span<const double> q, double epsilon, Rng& rng) {
  if (q.size() != 4) throw ShapeMismatch("expected 4 Q values");
  if (epsilon > 0.0 && bernoulli(rng, epsilon))
    return world::kAllActions[uniform_index(rng, 4)];
  std::size_t best = 0;
  for (std::size_t i = 1; i < 4; ++i)
    if (q[i] > q[best]) best = i;
  return world::kAllActions[best];
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  return items_.at((head_ + i) % items_.size());
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw InsufficientData("replay buffer is empty");
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &items_[uniform_index(rng, items_.size())];
  return out;
}

namespace {

nn::Tensor batch_states(Variant v, std::span<const Transition* const> batch,
                        bool next) {
  const std::size_t in = v == Variant::Object ? kObjectStateSize : kRasterStateSize;
  nn::Tensor x({batch.size(), in});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = *batch[i];
    const auto s = encode_state(v, next ? t.next_state : t.state, t.subject_id,
                                t.object_id);
    std::copy(s.begin(), s.end(), x.row(i).begin());
  }
  return x;
}

}  // namespace

double td_loss(QNetwork& net, const QNetwork& target,
               std::span<const Transition* const> batch, double gamma) {
  if (batch.empty()) throw EmptySequence("empty TD batch");
  const std::size_t n = batch.size();
  QNetwork::Cache cache;
  const nn::Tensor q = net.forward(batch_states(net.variant(), batch, false), cache);
  const nn::Tensor q2 = target.forward(batch_states(target.variant(), batch, true));
  nn::Tensor dq({n, 4});
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = *batch[i];
    double y = t.reward;
    if (!t.terminal) {
      const auto row = q2.row(i);
      y += gamma * *std::max_element(row.begin(), row.end());
    }
    const auto a = static_cast<std::size_t>(t.action);
    const double delta = q.at(i, a) - y;
    loss += nn::huber(delta);
    dq.at(i, a) = nn::huber_grad(delta) / static_cast<double>(n);
  }
  net.backward(cache, dq);
  return loss / static_cast<double>(n);
}

// ---- rewards and episodes ------------------------------------------------

Goal oracle_goal(const Episode& episode, const EpisodeConfig& config) {
  const auto ends = satisfying_ends(episode, config);
  if (ends.empty()) throw NoGoal("no reachable placement satisfies the predicate");
  const auto& s = episode.scene.get(episode.subject_id);
  std::size_t best = 0;
  double best_d = std::hypot(ends[0].first - s.cx, ends[0].second - s.cy);
  for (std::size_t i = 1; i < ends.size(); ++i) {
    const double d = std::hypot(ends[i].first - s.cx, ends[i].second - s.cy);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return {ends[best].first, ends[best].second};
}

double goal_distance(const Scene& scene, int subject_id, const Goal& goal) {
  const auto& s = scene.get(subject_id);
  return std::hypot(s.cx - goal.cx, s.cy - goal.cy);
}

double reward_rule(RewardSource source, const Scene& scene_t, double prev_distance,
                   const Episode& episode, const std::optional<Goal>& goal,
                   bool terminal, const EpisodeConfig& config,
                   const detector::Scorer* scorer) {
  double r = 0.0;
  if (source != RewardSource::Binary) {
    if (!goal) throw NoGoal("shaped reward requested without a goal");
    const double d = goal_distance(scene_t, episode.subject_id, *goal);
    r = config.raw_distance ? -config.shaping_lambda * d
                            : config.shaping_lambda * (prev_distance - d);
  }
  if (!terminal) return r;
  bool success = false;
  if (source == RewardSource::Detector) {
    if (!scorer) throw MissingDetector("detector reward requested without a detector");
    success = scorer->reward(episode.utterance,
                             world::normalized_features(scene_t, episode.subject_id),
                             world::normalized_features(scene_t, episode.object_id));
  } else {
    success = world::predicate_holds(scene_t, episode.subject_id, episode.object_id,
                                     episode.relation);
  }
  return r + (success ? config.terminal_bonus : 0.0);
}

EpisodeResult run_episode(const EpisodeConfig& config, const Episode& episode,
                          const Chooser& chooser, RewardSource source,
                          const std::optional<Goal>& goal,
                          const detector::Scorer* scorer) {
  EpisodeResult res;
  Scene s = episode.scene;
  double d_prev = goal ? goal_distance(s, episode.subject_id, *goal) : 0.0;
  res.scenes.push_back(s);
  for (std::size_t t = 0; t < config.horizon; ++t) {
    const Action a = chooser(s, t);
    Scene n = world::apply_action(s, a, config.step);
    const bool terminal = t + 1 == config.horizon;
    const double r =
        reward_rule(source, n, d_prev, episode, goal, terminal, config, scorer);
    if (goal) d_prev = goal_distance(n, episode.subject_id, *goal);
    res.total_reward += r;
    res.transitions.push_back(
        {s, a, r, n, terminal, episode.subject_id, episode.object_id});
    res.scenes.push_back(n);
    s = std::move(n);
  }
  res.final_scene = world::release_object(s);
  res.success = world::predicate_holds(res.final_scene, episode.subject_id,
                                       episode.object_id, episode.relation);
  return res;
}

EpisodeResult run_episode(const EpisodeConfig& config, const Episode& episode,
                          const QNetwork& net, RewardSource source,
                          const std::optional<Goal>& goal, double epsilon, Rng& rng,
                          const detector::Scorer* scorer) {
  const Chooser chooser = [&](const Scene& s, std::size_t) {
    const auto q = net.q_values(
        encode_state(net.variant(), s, episode.subject_id, episode.object_id));
    return select_action(q, epsilon, rng);
  };
  return run_episode(config, episode, chooser, source, goal, scorer);
}

namespace {

bool can_reach(const Scene& s, int id, const Goal& g, std::size_t steps, double step) {
  const auto& o = s.get(id);
  const double d = std::abs(o.cx - g.cx) + std::abs(o.cy - g.cy);
  if (d > static_cast<double>(steps) * step + 1e-6) return false;
  if (steps == 0) return d < 1e-6;
  for (Action a : world::kAllActions)
    if (can_reach(world::apply_action(s, a, step), id, g, steps - 1, step)) return true;
  return false;
}

}  // namespace

Chooser oracle_chooser(const Episode& episode, const EpisodeConfig& config) {
  const Goal goal = oracle_goal(episode, config);
  const int id = episode.subject_id;
  const std::size_t horizon = config.horizon;
  const double step = config.step;
  return [goal, id, horizon, step](const Scene& s, std::size_t t) {
    const std::size_t left = horizon - t - 1;
    std::optional<Action> best;
    double best_d = 0.0;
    for (Action a : world::kAllActions) {
      const Scene n = world::apply_action(s, a, step);
      if (!can_reach(n, id, goal, left, step)) continue;
      const double d = goal_distance(n, id, goal);
      if (!best || d < best_d - 1e-9) {
        best = a;
        best_d = d;
      }
    }
    return best.value_or(Action::Forward);
  };
}

Chooser greedy_chooser(const QNetwork& net, const Episode& episode) {
  const int s_id = episode.subject_id;
  const int o_id = episode.object_id;
  return [&net, s_id, o_id](const Scene& s, std::size_t) {
    const auto q = net.q_values(encode_state(net.variant(), s, s_id, o_id));
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i)
      if (q[i] > q[best]) best = i;
    return world::kAllActions[best];
  };
}

std::optional<Goal> episode_goal(RewardSource source, const Episode& episode,
                                 const EpisodeConfig& config,
                                 const detector::Scorer* scorer,
                                 const synthesis::SynthesisConfig& synth, Rng& rng) {
  switch (source) {
    case RewardSource::Oracle:
      return oracle_goal(episode, config);
    case RewardSource::Detector: {
      if (!scorer) throw MissingDetector("detector reward requested without a detector");
      const auto g =
          synthesis::synthesize_goal(*scorer, episode.utterance, episode.scene, synth, rng);
      return Goal{g.cx, g.cy};
    }
    case RewardSource::Binary:
      return std::nullopt;
  }
  return std::nullopt;
}

// ---- training and evaluation ---------------------------------------------

TrainResult train_dqn(const EpisodeConfig& env, const DQNConfig& dqn,
                      RewardSource source, Variant variant,
                      const detector::Scorer* scorer,
                      const synthesis::SynthesisConfig& synth) {
  env.validate();
  dqn.validate();
  if (source == RewardSource::Detector && !scorer)
    throw MissingDetector("R_d training needs a detector checkpoint");

  TrainResult out{QNetwork(variant), {}, 0, 0};
  QNetwork& net = out.net;
  Rng init_rng = make_rng(dqn.seed, "policy.init");
  net.init(init_rng);
  QNetwork target(variant);
  target.copy_from(net);
  nn::Adam opt(net.params(), nn::AdamConfig{dqn.lr});
  ReplayBuffer replay(dqn.replay_capacity);

  Rng episode_rng = make_rng(dqn.seed, "policy.episodes");
  Rng action_rng = make_rng(dqn.seed, "policy.actions");
  Rng replay_rng = make_rng(dqn.seed, "policy.replay");
  Rng goal_rng = make_rng(dqn.seed, "policy.goals");
  Rng eval_rng = make_rng(dqn.seed, "policy.eval");
  std::vector<Episode> eval_set;
  for (std::size_t i = 0; i < dqn.eval_episodes; ++i)
    eval_set.push_back(sample_episode(env, false, eval_rng));

  double loss_sum = 0.0;
  std::size_t loss_n = 0;
  for (std::size_t ep = 1; ep <= dqn.episodes; ++ep) {
    const Episode e = sample_episode(env, false, episode_rng);
    const auto goal = episode_goal(source, e, env, scorer, synth, goal_rng);
    Scene s = e.scene;
    double d_prev = goal ? goal_distance(s, e.subject_id, *goal) : 0.0;
    for (std::size_t t = 0; t < env.horizon; ++t) {
      const auto q = net.q_values(encode_state(variant, s, e.subject_id, e.object_id));
      const Action a = select_action(q, epsilon_at(dqn, out.selections), action_rng);
      ++out.selections;
      Scene n = world::apply_action(s, a, env.step);
      const bool terminal = t + 1 == env.horizon;
      const double r = reward_rule(source, n, d_prev, e, goal, terminal, env, scorer);
      if (goal) d_prev = goal_distance(n, e.subject_id, *goal);
      replay.push({s, a, r, n, terminal, e.subject_id, e.object_id});
      s = std::move(n);

      if (out.selections % dqn.update_every == 0 &&
          replay.size() >= std::max(dqn.warmup, dqn.batch)) {
        const auto batch = replay.sample(dqn.batch, replay_rng);
        opt.zero_grad();
        loss_sum += td_loss(net, dqn.use_target ? target : net, batch, dqn.gamma);
        ++loss_n;
        opt.step();
        ++out.updates;
        if (dqn.use_target && out.updates % dqn.target_sync == 0) target.copy_from(net);
      }
    }

    if (ep % dqn.eval_every == 0 || ep == dqn.episodes) {
      std::size_t wins = 0;
      for (const auto& ev : eval_set)
        wins += run_episode(env, ev, greedy_chooser(net, ev), RewardSource::Binary,
                            std::nullopt)
                    .success;
      CurvePoint p;
      p.episode = ep;
      p.success_rate = eval_set.empty()
                           ? 0.0
                           : static_cast<double>(wins) / static_cast<double>(eval_set.size());
      p.epsilon = epsilon_at(dqn, out.selections);
      p.mean_td_loss = loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0;
      out.curve.push_back(p);
      loss_sum = 0.0;
      loss_n = 0;
      log_info("policy: episode " + std::to_string(ep) + " success " +
               std::to_string(p.success_rate) + " epsilon " + std::to_string(p.epsilon));
    }
  }
  return out;
}

double evaluate_chooser(const std::function<Chooser(const Episode&)>& make,
                        const EpisodeConfig& config, std::size_t n, bool unseen,
                        Rng& rng) {
  if (n < 1) throw ConfigError("evaluation needs at least one episode");
  std::size_t wins = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Episode e = sample_episode(config, unseen, rng);
    wins += run_episode(config, e, make(e), RewardSource::Binary, std::nullopt).success;
  }
  return static_cast<double>(wins) / static_cast<double>(n);
}

double evaluate_policy(const QNetwork& net, const EpisodeConfig& config, std::size_t n,
                       bool unseen, Rng& rng) {
  return evaluate_chooser([&net](const Episode& e) { return greedy_chooser(net, e); },
                          config, n, unseen, rng);
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "episode,success_rate,epsilon,mean_td_loss\n";
  char line[128];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.8f\n", p.episode, p.success_rate,
                  p.epsilon, p.mean_td_loss);
    out += line;
  }
  return out;
}

}  // namespace ngd::policy
