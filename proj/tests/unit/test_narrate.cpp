#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "ngd/core/error.hpp"
#include "ngd/core/log.hpp"
#include "ngd/narrate/narrate.hpp"

using namespace ngd;
using namespace ngd::narrate;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ngd-unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

const Dataset& default_dataset() {
  static const Dataset ds = generate_dataset({});
  return ds;
}

Frame frame(const std::string& u) {
  Frame f;
  f.utterance = u;
  return f;
}

// Subject and object ids of a frame, resolved the way the detector does.
std::pair<int, int> roles(const Frame& f) {
  const auto p = lang::parse_text(f.utterance);
  return {world::find_category(f.scene, p.subject).id,
          world::find_category(f.scene, p.object).id};
}

}  // namespace

TEST_SUITE("narrate") {

TEST_CASE("single In task") {
  GeneratorConfig cfg;
  cfg.n_videos = 1;
  cfg.tasks_min = cfg.tasks_max = 1;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    cfg.seed = seed;
    const auto ds = generate_dataset(cfg);
    const auto& frames = ds.videos[0].frames;
    REQUIRE(frames.size() == cfg.frames_per_task);
    const auto p = lang::parse_text(frames[0].utterance);
    const auto [s, o] = roles(frames[0]);
    CHECK_FALSE(world::predicate_holds(frames.front().scene, s, o, p.relation));
    CHECK(world::predicate_holds(frames.back().scene, s, o, p.relation));
    CHECK(frames.front().phase == "start");
    CHECK(frames.back().phase == "end");
  }
}

TEST_CASE("config validation") {
  GeneratorConfig c;
  c.frames_per_task = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.tasks_min = 10;
  c.tasks_max = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.p_reuse = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("default dataset shape") {
  const auto& ds = default_dataset();
  CHECK(ds.videos.size() == 4);
  const auto segs = segment_dataset(ds);
  CHECK(segs.size() >= 56);
  CHECK(segs.size() <= 120);
}

TEST_CASE("segmentation recovers task boundaries and the generator contract") {
  const auto& ds = default_dataset();
  for (std::size_t v = 0; v < ds.videos.size(); ++v) {
    const auto& frames = ds.videos[v].frames;
    const auto segs = segment_by_utterance(ds.videos[v], 3, v);
    std::size_t tasks = frames.back().task_idx + 1;
    REQUIRE(segs.size() == tasks);
    for (std::size_t k = 0; k < segs.size(); ++k) {
      const auto& s = segs[k];
      CHECK(s.begin == k * 12);
      CHECK(s.end == k * 12 + 11);
      CHECK(frames[s.begin].task_idx == k);
      REQUIRE(s.parsed);
      const auto [sid, oid] = roles(frames[s.begin]);
      CHECK_FALSE(world::predicate_holds(frames[s.begin].scene, sid, oid, s.parsed->relation));
      CHECK(world::predicate_holds(frames[s.end].scene, sid, oid, s.parsed->relation));
      for (auto i : s.x_plus)
        CHECK(world::predicate_holds(frames[i].scene, sid, oid, s.parsed->relation));
      for (auto i : s.x_minus)
        CHECK_FALSE(world::predicate_holds(frames[i].scene, sid, oid, s.parsed->relation));
    }
  }
}

TEST_CASE("per-frame jitter is bounded") {
  GeneratorConfig cfg;
  cfg.n_videos = 1;
  const auto ds = generate_dataset(cfg);
  const auto& frames = ds.videos[0].frames;
  for (std::size_t t = 0; t * 12 < frames.size(); ++t) {
    const auto [sid, oid] = roles(frames[t * 12]);
    const auto& a = frames[t * 12 + 3].scene.get(sid);
    const auto& b = frames[t * 12 + 8].scene.get(sid);
    // Interior frames stay within twice the jitter of the box spanned by the
    // last start frame and the first end frame.
    for (std::size_t i = 4; i < 8; ++i) {
      const auto& m = frames[t * 12 + i].scene.get(sid);
      CHECK(m.cx >= std::min(a.cx, b.cx) - 1.0 - 1e-9);
      CHECK(m.cx <= std::max(a.cx, b.cx) + 1.0 + 1e-9);
      CHECK(m.cy >= std::min(a.cy, b.cy) - 1.0 - 1e-9);
      CHECK(m.cy <= std::max(a.cy, b.cy) + 1.0 + 1e-9);
    }
  }
}

TEST_CASE("p_reuse = 1 keeps the object pair") {
  GeneratorConfig cfg;
  cfg.n_videos = 2;
  cfg.p_reuse = 1.0;
  const auto ds = generate_dataset(cfg);
  std::size_t adjacent = 0, same = 0;
  for (const auto& v : ds.videos) {
    for (std::size_t i = 12; i < v.frames.size(); i += 12) {
      const auto a = lang::parse_text(v.frames[i - 12].utterance);
      const auto b = lang::parse_text(v.frames[i].utterance);
      ++adjacent;
      same += a.subject == b.subject && a.object == b.object;
    }
  }
  // A pair whose other relations all already hold cannot be reused.
  CHECK(static_cast<double>(same) / static_cast<double>(adjacent) > 0.9);
}

TEST_CASE("segment_by_utterance examples") {
  set_log_level(LogLevel::Quiet);
  Demonstration d;
  for (const char* u : {"A", "A", "A", "B", "B"}) d.frames.push_back(frame(u));
  auto segs = segment_by_utterance(d, 1);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].begin == 0);
  CHECK(segs[0].end == 2);
  CHECK(segs[1].begin == 3);
  CHECK(segs[1].end == 4);
  CHECK_FALSE(segs[0].parsed);

  Demonstration one;
  for (int i = 0; i < 7; ++i) one.frames.push_back(frame("the cup is in the bowl"));
  segs = segment_by_utterance(one, 3);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].begin == 0);
  CHECK(segs[0].end == 6);
  CHECK(segs[0].x_minus == std::vector<std::size_t>{0, 1, 2});
  CHECK(segs[0].x_plus == std::vector<std::size_t>{4, 5, 6});

  Demonstration shortrun;
  for (int i = 0; i < 5; ++i) shortrun.frames.push_back(frame("A"));
  CHECK(segment_by_utterance(shortrun, 3).empty());

  // Overlapping narration never joins a segment.
  Demonstration amb;
  for (const char* u : {"A", "A", "A | B", "A", "A", ""})
    amb.frames.push_back(frame(u));
  segs = segment_by_utterance(amb, 1);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].end == 1);
  CHECK(segs[1].begin == 3);
  set_log_level(LogLevel::Warn);
}

TEST_CASE("mine_hard_pairs") {
  Segment s;
  s.x_minus = {0, 1, 2};
  s.x_plus = {9, 10, 11};
  const auto pairs = mine_hard_pairs(s);
  CHECK(pairs.size() == 9);
  for (auto [p, m] : pairs) CHECK(p != m);
}

TEST_CASE("random negatives") {
  const auto segs = segment_dataset(default_dataset());
  Rng rng = make_rng(1, "test.narrate.neg");
  const auto nine = sample_random_negatives(segs, 4, 9, rng);
  CHECK(nine.size() == 9);
  for (const auto& f : nine) {
    CHECK(f.segment != 4);
    CHECK(f.frame >= segs[f.segment].begin);
    CHECK(f.frame <= segs[f.segment].end);
  }
  CHECK_THROWS_AS(sample_random_negatives({segs[0]}, 0, 1, rng), InsufficientData);

  // Chi-square against uniform over the other segments.
  std::vector<Segment> few(segs.begin(), segs.begin() + 8);
  std::map<std::size_t, double> counts;
  const int N = 10000;
  for (const auto& f : sample_random_negatives(few, 0, N, rng)) counts[f.segment] += 1;
  CHECK(counts.count(0) == 0);
  double chi2 = 0.0;
  const double expect = N / 7.0;
  for (std::size_t k = 1; k < 8; ++k) chi2 += std::pow(counts[k] - expect, 2) / expect;
  CHECK(chi2 < 22.46);  // p = 0.001 at 6 degrees of freedom
}

TEST_CASE("dataset persistence") {
  GeneratorConfig cfg;
  cfg.n_videos = 2;
  const auto ds = generate_dataset(cfg);
  const auto path = temp_path("ds.jsonl");
  save_dataset(path, ds);
  const auto back = load_dataset(path);
  CHECK(back.videos == ds.videos);
  CHECK(back.config.n_videos == 2);

  std::ifstream in(path);
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == ds.frame_count() + 1);

  {
    std::ifstream src(path);
    std::string all((std::istreambuf_iterator<char>(src)), {});
    std::ofstream(temp_path("trunc.jsonl")) << all.substr(0, all.size() / 2);
    std::ofstream(temp_path("trunc_line.jsonl")) << all.substr(0, all.rfind('\n', all.size() - 2) + 1);
    std::string v999 = all;
    const auto pos = v999.find("\"version\":1");
    REQUIRE(pos != std::string::npos);
    v999.replace(pos, 11, "\"version\":999");
    std::ofstream(temp_path("v999.jsonl")) << v999;
  }
  CHECK_THROWS_AS(load_dataset(temp_path("trunc.jsonl")), FormatError);
  CHECK_THROWS_AS(load_dataset(temp_path("trunc_line.jsonl")), FormatError);
  try {
    load_dataset(temp_path("v999.jsonl"));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("999") != std::string::npos);
  }
  CHECK_THROWS_AS(load_dataset(temp_path("missing.jsonl")), IoError);
}

TEST_CASE("generation is deterministic") {
  GeneratorConfig cfg;
  cfg.n_videos = 1;
  cfg.seed = 7;
  CHECK(generate_dataset(cfg).videos == generate_dataset(cfg).videos);
}

}  // TEST_SUITE
