#include <doctest.h>

#include <array>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ngd/core/error.hpp"
#include "ngd/nn/grad_check.hpp"
#include "ngd/policy/policy.hpp"

using namespace ngd;
using namespace ngd::policy;
using world::Scene;

namespace {

world::ObjectInstance obj(int id, const char* cat, double cx, double cy, double w,
                          bool container = false) {
  world::ObjectInstance o;
  o.id = id;
  o.category = cat;
  o.cx = cx;
  o.cy = cy;
  o.w = o.h = w;
  o.is_container = container;
  return o;
}

// Subject (id 0, held) at (sx, sy); 5 cm bowl (id 1) at (ox, oy).
Episode manual_episode(double sx, double sy, double ox = 30, double oy = 30) {
  Episode e;
  e.scene.objects = {obj(0, "block", sx, sy, 4), obj(1, "bowl", ox, oy, 5, true)};
  e.scene.held = 0;
  e.utterance = "the block is in the bowl";
  return e;
}

Chooser sequence(std::vector<Action> actions) {
  return [actions](const Scene&, std::size_t t) { return actions.at(t); };
}

std::vector<Transition> random_batch(std::size_t n, Rng& rng) {
  std::vector<Transition> out;
  EpisodeConfig cfg;
  for (std::size_t i = 0; i < n; ++i) {
    const Episode e = sample_episode(cfg, false, rng);
    const Action a = world::kAllActions[uniform_index(rng, 4)];
    out.push_back({e.scene, a, uniform(rng, -1, 1), world::apply_action(e.scene, a),
                   i % 2 == 0, e.subject_id, e.object_id});
  }
  return out;
}

double td_grad_error(Variant v, std::size_t probes, double eps = 1e-5) {
  Rng rng = make_rng(1, "test.policy.td", static_cast<std::uint64_t>(v));
  QNetwork net(v), target(v);
  net.init(rng);
  target.init(rng);
  const auto batch = random_batch(4, rng);
  std::vector<const Transition*> ptrs;
  for (const auto& t : batch) ptrs.push_back(&t);
  const auto res = nn::grad_check(
      [&](bool) { return td_loss(net, target, ptrs, 0.95); }, net.params(), rng,
      {.probes = probes, .eps = eps});
  return res.max_rel_error;
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("names and config round trips") {
  CHECK(variant_from_name("object") == Variant::Object);
  CHECK(variant_from_name("rgb") == Variant::Raster);
  CHECK(reward_source_from_name("d") == RewardSource::Detector);
  CHECK_THROWS_AS(variant_from_name("pixels"), ConfigError);

  DQNConfig d;
  d.batch = 512;
  const nlohmann::json jd = d;
  CHECK(jd.get<DQNConfig>().batch == 512);
  nlohmann::json bad = jd;
  bad["gama"] = 0.9;
  CHECK_THROWS_AS(bad.get<DQNConfig>(), ConfigError);

  EpisodeConfig e;
  e.raw_distance = true;
  const nlohmann::json je = e;
  CHECK(je.get<EpisodeConfig>().raw_distance);
  e.horizon = 0;
  CHECK_THROWS_AS(e.validate(), ConfigError);
}

TEST_CASE("epsilon schedule") {
  DQNConfig c;
  CHECK(epsilon_at(c, 0) == doctest::Approx(0.8));
  CHECK(epsilon_at(c, 999) == doctest::Approx(0.8));
  CHECK(epsilon_at(c, 2500) == doctest::Approx(0.6));
  CHECK(epsilon_at(c, 7999) == doctest::Approx(0.1));
  CHECK(epsilon_at(c, 8000) == doctest::Approx(0.05));
  CHECK(epsilon_at(c, 1000000) == 0.05);
  for (std::size_t n = 0; n < 20000; n += 137) {
    const double expect =
        std::max(0.05, 0.8 - 0.1 * static_cast<double>(n / 1000));
    CHECK(epsilon_at(c, n) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("select_action") {
  Rng rng = make_rng(2, "test.policy.select");
  const std::array<double, 4> q{1, 3, 2, 0};
  CHECK(select_action(q, 0.0, rng) == Action::Backward);
  const std::array<double, 4> tie{2, 2, 1, 2};
  CHECK(select_action(tie, 0.0, rng) == Action::Forward);
  std::array<int, 4> counts{};
  for (int i = 0; i < 10000; ++i) ++counts[static_cast<std::size_t>(select_action(q, 1.0, rng))];
  for (int c : counts) CHECK(c / 10000.0 == doctest::Approx(0.25).epsilon(0.08));
}

TEST_CASE("replay buffer is a FIFO ring") {
  ReplayBuffer rb(3);
  for (int i = 0; i < 5; ++i) {
    Transition t;
    t.reward = i;
    rb.push(t);
    CHECK(rb.size() <= 3);
  }
  CHECK(rb.size() == 3);
  CHECK(rb.at(0).reward == 2.0);
  CHECK(rb.at(1).reward == 3.0);
  CHECK(rb.at(2).reward == 4.0);
  Rng rng = make_rng(3, "test.policy.replay");
  for (const auto* t : rb.sample(50, rng)) CHECK(t->reward >= 2.0);
}

TEST_CASE("Q networks") {
  QNetwork obj_net(Variant::Object);
  Rng rng = make_rng(4, "test.policy.q");
  obj_net.init(rng);
  obj_net.zero_output_layer();
  const auto q = obj_net.q_values(std::vector<double>(8, 0.3));
  CHECK(q.size() == 4);
  CHECK(q[0] == q[1]);
  CHECK(q[1] == q[2]);
  CHECK(q[2] == q[3]);
  CHECK_THROWS_AS(obj_net.q_values(std::vector<double>(7, 0.0)), ShapeMismatch);

  QNetwork raster(Variant::Raster);
  raster.init(rng);
  CHECK(raster.input_size() == 3 * 72 * 72);
  CHECK(raster.q_values(std::vector<double>(3 * 72 * 72, 0.5)).size() == 4);
  CHECK_THROWS_AS(raster.q_values(std::vector<double>(3 * 64 * 64, 0.5)), ShapeMismatch);

  QNetwork copy(Variant::Object);
  copy.copy_from(obj_net);
  CHECK(copy.q_values(std::vector<double>(8, 0.1)) == obj_net.q_values(std::vector<double>(8, 0.1)));
}

TEST_CASE("Huber TD loss gradient, object net") {
  CHECK(td_grad_error(Variant::Object, 64) < 1e-4);
}

TEST_CASE("Huber TD loss gradient, raster net") {
  // The raster is mostly flat background, so a conv bias moves thousands of
  // units with nearly equal pre-activations at once; at eps = 1e-5 the probe
  // straddles ReLU kinks. 1e-6 stays on one side.
  CHECK(td_grad_error(Variant::Raster, 6, 1e-6) < 1e-4);
}

TEST_CASE("object state order follows the expression") {
  Scene s;
  s.objects = {obj(0, "block", 10, 20, 4), obj(1, "bowl", 30, 40, 5, true)};
  const auto a = object_state(s, "the block is in the bowl");
  const auto b = object_state(s, "the bowl is behind the block");
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a[i] == b[4 + i]);
    CHECK(a[4 + i] == b[i]);
  }
  CHECK(a[0] == doctest::Approx(10.0 / 60.0));
  Rng rng = make_rng(5, "test.policy.order");
  QNetwork net(Variant::Object);
  net.init(rng);
  CHECK(net.q_values(encode_state(Variant::Object, s, 0, 1)) !=
        net.q_values(encode_state(Variant::Object, s, 1, 0)));
}

TEST_CASE("episode sampling") {
  EpisodeConfig cfg;
  Rng rng = make_rng(6, "test.policy.sample");
  for (int i = 0; i < 300; ++i) {
    const Episode e = sample_episode(cfg, i % 2 == 1, rng);
    const auto& s = e.scene.get(e.subject_id);
    const auto& o = e.scene.get(e.object_id);
    CHECK(e.scene.held == e.subject_id);
    CHECK(o.is_container);
    CHECK(o.cx >= 10.0);
    CHECK(o.cx <= 50.0);
    CHECK(o.cy >= 20.0);
    CHECK(o.cy <= 35.0);
    CHECK(std::abs(s.cx - o.cx) <= 25.0);
    CHECK(std::abs(s.cy - o.cy) <= 25.0);
    CHECK_FALSE(world::predicate_holds(e.scene, e.subject_id, e.object_id, e.relation));
    CHECK(solvable(e, cfg));
    const auto p = lang::parse_text(e.utterance);
    CHECK(p.subject == s.category);
    CHECK(p.object == o.category);
  }
}

TEST_CASE("reachable ends") {
  const Episode e = manual_episode(30, 30);
  CHECK(reachable_ends(e.scene, 1, 5.0).size() == 4);
  CHECK(reachable_ends(e.scene, 2, 5.0).size() == 9);  // parity: 1 + 4 + 4
}

TEST_CASE("moves that cancel keep the subject in the container") {
  EpisodeConfig cfg;
  cfg.horizon = 4;
  Episode e = manual_episode(30, 30);
  const auto r = run_episode(cfg, e, sequence({Action::Forward, Action::Right, Action::Backward, Action::Left}),
                             RewardSource::Binary, std::nullopt);
  CHECK(r.transitions.size() == 4);
  CHECK(r.success);
  CHECK_FALSE(r.final_scene.held.has_value());
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.transitions[i].terminal == (i == 3));
}

TEST_CASE("reward rule examples") {
  EpisodeConfig cfg;
  const Episode e = manual_episode(20, 30);
  const Goal goal{30, 30};
  const Scene moved = world::apply_action(e.scene, Action::Right);
  CHECK(reward_rule(RewardSource::Oracle, moved, 10.0, e, goal, false, cfg) == doctest::Approx(0.5));
  const Scene away = world::apply_action(e.scene, Action::Left);
  CHECK(reward_rule(RewardSource::Oracle, away, 10.0, e, goal, false, cfg) == doctest::Approx(-0.5));

  const Scene in = world::apply_action(moved, Action::Right);
  CHECK(reward_rule(RewardSource::Oracle, in, 5.0, e, goal, true, cfg) == doctest::Approx(1.5));
  CHECK(reward_rule(RewardSource::Binary, in, 5.0, e, std::nullopt, true, cfg) == 1.0);
  CHECK(reward_rule(RewardSource::Binary, moved, 10.0, e, std::nullopt, false, cfg) == 0.0);
  CHECK(reward_rule(RewardSource::Binary, moved, 10.0, e, std::nullopt, true, cfg) == 0.0);
  CHECK_THROWS_AS(reward_rule(RewardSource::Oracle, moved, 10.0, e, std::nullopt, false, cfg), NoGoal);
  CHECK_THROWS_AS(reward_rule(RewardSource::Detector, in, 5.0, e, goal, true, cfg), MissingDetector);

  const detector::ConstantScorer yes(1.0), no(-1.0);
  CHECK(reward_rule(RewardSource::Detector, moved, 10.0, e, goal, true, cfg, &yes) == doctest::Approx(1.5));
  CHECK(reward_rule(RewardSource::Detector, in, 5.0, e, goal, true, cfg, &no) == doctest::Approx(0.5));

  EpisodeConfig raw = cfg;
  raw.raw_distance = true;
  CHECK(reward_rule(RewardSource::Oracle, moved, 10.0, e, goal, false, raw) == doctest::Approx(-0.5));
}

TEST_CASE("binary episodes pay only at the end") {
  EpisodeConfig cfg;
  Rng rng = make_rng(7, "test.policy.binary");
  for (int i = 0; i < 50; ++i) {
    const Episode e = sample_episode(cfg, false, rng);
    const auto r = run_episode(cfg, e, oracle_chooser(e, cfg), RewardSource::Binary, std::nullopt);
    for (std::size_t t = 0; t + 1 < r.transitions.size(); ++t) CHECK(r.transitions[t].reward == 0.0);
    CHECK(r.transitions.back().reward == 1.0);
  }
}

TEST_CASE("shaping telescopes") {
  EpisodeConfig cfg;
  Rng rng = make_rng(8, "test.policy.telescope");
  for (int i = 0; i < 100; ++i) {
    const Episode e = sample_episode(cfg, false, rng);
    const Goal goal{uniform(rng, 5, 55), uniform(rng, 5, 55)};
    const auto r = run_episode(
        cfg, e, [&](const Scene&, std::size_t) { return world::kAllActions[uniform_index(rng, 4)]; },
        RewardSource::Oracle, goal);
    double shaping = r.total_reward - (r.success ? 1.0 : 0.0);
    const double d0 = goal_distance(r.scenes.front(), e.subject_id, goal);
    const double dT = goal_distance(r.scenes.back(), e.subject_id, goal);
    CHECK(shaping == doctest::Approx(0.1 * (d0 - dT)).epsilon(1e-9));
  }
}

TEST_CASE("oracle goal and chooser") {
  EpisodeConfig cfg;
  Rng rng = make_rng(9, "test.policy.oracle");
  for (int i = 0; i < 100; ++i) {
    const Episode e = sample_episode(cfg, i % 2 == 0, rng);
    const Goal g = oracle_goal(e, cfg);
    auto s = e.scene.get(e.subject_id);
    s.cx = g.cx;
    s.cy = g.cy;
    CHECK(world::relation_holds(s, e.scene.get(e.object_id), e.relation));
  }
  Rng eval = make_rng(10, "test.policy.oracle.eval");
  CHECK(evaluate_chooser([&](const Episode& e) { return oracle_chooser(e, cfg); }, cfg, 200, false, eval) == 1.0);
  CHECK(evaluate_chooser([&](const Episode& e) { return oracle_chooser(e, cfg); }, cfg, 200, true, eval) == 1.0);

  Episode stuck = manual_episode(5, 5, 50, 50);
  CHECK_THROWS_AS(oracle_goal(stuck, cfg), NoGoal);
}

TEST_CASE("random policy rarely succeeds") {
  EpisodeConfig cfg;
  Rng eval = make_rng(11, "test.policy.random");
  Rng act = make_rng(12, "test.policy.random.act");
  const double rate = evaluate_chooser(
      [&](const Episode&) {
        return Chooser([&](const Scene&, std::size_t) { return world::kAllActions[uniform_index(act, 4)]; });
      },
      cfg, 1000, false, eval);
  MESSAGE("random success ", rate);
  CHECK(rate < 0.2);
}

TEST_CASE("training needs a detector for R_d") {
  DQNConfig d;
  d.episodes = 1;
  CHECK_THROWS_AS(train_dqn({}, d, RewardSource::Detector, Variant::Object), MissingDetector);
}

TEST_CASE("short training run is deterministic and logs a curve") {
  DQNConfig d;
  d.episodes = 60;
  d.eval_every = 20;
  d.eval_episodes = 10;
  d.warmup = 50;
  d.batch = 16;
  const auto a = train_dqn({}, d, RewardSource::Oracle, Variant::Object);
  const auto b = train_dqn({}, d, RewardSource::Oracle, Variant::Object);
  REQUIRE(a.curve.size() == 3);
  CHECK(a.selections == 300);
  CHECK(a.updates == 60 - 9);  // updates start once 50 transitions are stored
  const auto csv = curve_csv(a.curve);
  CHECK(csv == curve_csv(b.curve));
  CHECK(csv.rfind("episode,success_rate,epsilon,mean_td_loss\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto pa = a.net.params();
  const auto pb = b.net.params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  for (const auto& p : a.curve) {
    CHECK(p.success_rate >= 0.0);
    CHECK(p.success_rate <= 1.0);
    CHECK(p.epsilon == doctest::Approx(0.8));
  }
}

}  // TEST_SUITE
