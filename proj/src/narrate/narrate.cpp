#include "ngd/narrate/narrate.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "ngd/core/error.hpp"
#include "ngd/core/json_util.hpp"
#include "ngd/core/log.hpp"

namespace ngd::narrate {

using world::ObjectInstance;
using world::Scene;

const std::vector<Template>& templates() {
  static const std::vector<Template> t = {
      {"the {s} is {r} the {o}"},
      {"i am placing the {s} {r} the {o}"},
      {"i am putting the {s} {r} the {o}"},
      {"the {s} should be {r} the {o}"},
      {"put the {s} {r} the {o}"},
      {"now the {s} goes {r} the {o}", true},
  };
  return t;
}

std::string render(const Template& t, const std::string& subject,
                   const std::string& relation_phrase,
                   const std::string& object) {
  std::string out;
  const std::string& p = t.pattern;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == '{' && i + 2 < p.size() && p[i + 2] == '}') {
      const char key = p[i + 1];
      out += key == 's' ? subject : key == 'r' ? relation_phrase : object;
      i += 2;
    } else {
      out += p[i];
    }
  }
  return out;
}

std::optional<std::pair<double, double>> sample_subject_position(
    const ObjectInstance& subject, const ObjectInstance& object,
    Relation relation, bool satisfy, Rng& rng, double window,
    int max_attempts) {
  ObjectInstance s = subject;
  double x_lo = std::max(object.cx - window, s.w / 2);
  double x_hi = std::min(object.cx + window, world::kTableWidth - s.w / 2);
  double y_lo = std::max(object.cy - window, s.h / 2);
  double y_hi = std::min(object.cy + window, world::kTableDepth - s.h / 2);
  if (relation == Relation::In && satisfy) {
    x_lo = std::max(x_lo, object.cx - object.w / 2);
    x_hi = std::min(x_hi, object.cx + object.w / 2);
    y_lo = std::max(y_lo, object.cy - object.h / 2);
    y_hi = std::min(y_hi, object.cy + object.h / 2);
  }
  if (x_lo > x_hi || y_lo > y_hi) return std::nullopt;
  for (int a = 0; a < max_attempts; ++a) {
    s.cx = uniform(rng, x_lo, x_hi);
    s.cy = uniform(rng, y_lo, y_hi);
    if (world::relation_holds(s, object, relation) == satisfy)
      return std::make_pair(s.cx, s.cy);
  }
  return std::nullopt;
}

std::optional<std::pair<double, double>> sample_end_position(
    const ObjectInstance& subject, const ObjectInstance& object,
    Relation relation, Rng& rng) {
  if (relation != Relation::In)
    return sample_subject_position(subject, object, relation, true, rng);
  if (!object.is_container || subject.w > object.w || subject.h > object.h)
    return std::nullopt;
  const double rx = (object.w - subject.w) / 2;
  const double ry = (object.h - subject.h) / 2;
  return std::make_pair(object.cx + uniform(rng, -rx, rx),
                        object.cy + uniform(rng, -ry, ry));
}

// ---- config --------------------------------------------------------------

void GeneratorConfig::validate() const {
  if (n_videos < 1) throw ConfigError("generator: n_videos must be >= 1");
  if (tasks_min < 1 || tasks_min > tasks_max)
    throw ConfigError("generator: need 1 <= tasks_min <= tasks_max");
  if (n_frames_per_side < 1)
    throw ConfigError("generator: n_frames_per_side must be >= 1");
  if (frames_per_task < 2 * n_frames_per_side)
    throw ConfigError("generator: frames_per_task must be >= 2*n_frames_per_side");
  if (p_reuse < 0.0 || p_reuse > 1.0)
    throw ConfigError("generator: p_reuse must lie in [0, 1]");
  if (frame_jitter_cm < 0.0)
    throw ConfigError("generator: frame_jitter_cm must be >= 0");
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = nlohmann::json{{"n_videos", c.n_videos},
                     {"tasks_min", c.tasks_min},
                     {"tasks_max", c.tasks_max},
                     {"frames_per_task", c.frames_per_task},
                     {"n_frames_per_side", c.n_frames_per_side},
                     {"p_reuse", c.p_reuse},
                     {"frame_jitter_cm", c.frame_jitter_cm},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  check_keys(j,
             {"n_videos", "tasks_min", "tasks_max", "frames_per_task",
              "n_frames_per_side", "p_reuse", "frame_jitter_cm", "seed"},
             "generator");
  read_opt(j, "n_videos", c.n_videos);
  read_opt(j, "tasks_min", c.tasks_min);
  read_opt(j, "tasks_max", c.tasks_max);
  read_opt(j, "frames_per_task", c.frames_per_task);
  read_opt(j, "n_frames_per_side", c.n_frames_per_side);
  read_opt(j, "p_reuse", c.p_reuse);
  read_opt(j, "frame_jitter_cm", c.frame_jitter_cm);
  read_opt(j, "seed", c.seed);
}

std::size_t Dataset::frame_count() const {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.frames.size();
  return n;
}

// ---- generation ----------------------------------------------------------

namespace {

struct TaskState {
  Scene scene;  // subject at its end position
  int subject_id = -1;
  int object_id = -1;
  Relation relation = Relation::In;
  std::string utterance;
};

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

// Fresh scene: object, subject (position set later) and 1-2 distractors.
Scene fresh_scene(const CategorySpec& subject, const CategorySpec& object,
                  Rng& rng, int& subject_id, int& object_id) {
  const auto& lib = ObjectLibrary::standard();
  Scene scene;
  object_id = 0;
  subject_id = 1;
  scene.objects.push_back(make_instance(object, object_id, uniform(rng, 12, 48),
                                        uniform(rng, 12, 48), rng));
  scene.objects.push_back(make_instance(subject, subject_id, 0, 0, rng));

  const std::size_t n_distractors = 1 + uniform_index(rng, 2);
  std::vector<const CategorySpec*> pool;
  for (const auto& c : lib.seen)
    if (c.name != subject.name && c.name != object.name) pool.push_back(&c);
  for (std::size_t d = 0; d < n_distractors; ++d) {
    const std::size_t k = uniform_index(rng, pool.size());
    const CategorySpec* spec = pool[k];
    pool.erase(pool.begin() + static_cast<long>(k));
    ObjectInstance inst = make_instance(*spec, scene.next_id(), 0, 0, rng);
    for (int a = 0; a < 200; ++a) {
      inst.cx = uniform(rng, inst.w / 2 + 1, world::kTableWidth - inst.w / 2 - 1);
      inst.cy = uniform(rng, inst.h / 2 + 1, world::kTableDepth - inst.h / 2 - 1);
      bool clear = true;
      for (const auto& o : scene.objects) {
        if (o.id == subject_id) continue;
        clear = clear && (std::abs(o.cx - inst.cx) > (o.w + inst.w) / 2 + 2 ||
                          std::abs(o.cy - inst.cy) > (o.h + inst.h) / 2 + 2);
      }
      if (clear) break;
    }
    scene.objects.push_back(inst);
  }
  return scene;
}

std::string pick_utterance(const std::string& subject, Relation relation,
                           const std::string& object, const std::string& avoid,
                           Rng& rng) {
  std::vector<const Template*> usable;
  for (const auto& t : templates())
    if (!t.held_out) usable.push_back(&t);
  const auto phrases = lang::SynonymTable::builtin().phrases(relation);
  std::string text;
  for (int a = 0; a < 64; ++a) {
    text = render(*pick(usable, rng), subject, pick(phrases, rng), object);
    if (text != avoid) break;
  }
  return text;
}

// Fills `frames_per_task` frames moving the subject from start to end.
bool realise_task(const Scene& base, int subject_id, int object_id,
                  Relation relation, std::pair<double, double> start,
                  std::pair<double, double> end, const GeneratorConfig& cfg,
                  Rng& rng, std::vector<Scene>& out) {
  const std::size_t F = cfg.frames_per_task;
  const std::size_t n = cfg.n_frames_per_side;
  out.clear();
  for (std::size_t i = 0; i < F; ++i) {
    double alpha = 0.0;
    if (i >= F - n) {
      alpha = 1.0;
    } else if (i >= n) {
      alpha = static_cast<double>(i - n + 1) / static_cast<double>(F - 2 * n + 1);
    }
    Scene s = base;
    ObjectInstance& subj = s.get(subject_id);
    const double j = cfg.frame_jitter_cm;
    subj.cx = start.first + alpha * (end.first - start.first) +
              (j > 0 ? uniform(rng, -j, j) : 0.0);
    subj.cy = start.second + alpha * (end.second - start.second) +
              (j > 0 ? uniform(rng, -j, j) : 0.0);
    subj.cx = std::clamp(subj.cx, subj.w / 2, s.width - subj.w / 2);
    subj.cy = std::clamp(subj.cy, subj.h / 2, s.depth - subj.h / 2);
    const bool holds = world::predicate_holds(s, subject_id, object_id, relation);
    if (i < n && holds) return false;
    if (i >= F - n && !holds) return false;
    out.push_back(std::move(s));
  }
  return true;
}

Demonstration generate_video(const GeneratorConfig& cfg, std::size_t v) {
  Rng rng = make_rng(cfg.seed, "narrate.video", v);
  const auto& lib = ObjectLibrary::standard();
  const auto subjects = non_containers(lib.seen);
  const auto conts = containers(lib.seen);

  Demonstration demo;
  demo.video_id = "video_" + std::to_string(v);
  const std::size_t n_tasks =
      cfg.tasks_min + uniform_index(rng, cfg.tasks_max - cfg.tasks_min + 1);

  std::optional<TaskState> prev;
  for (std::size_t task = 0; task < n_tasks; ++task) {
    TaskState cur;
    std::optional<std::pair<double, double>> fixed_start;

    if (prev && bernoulli(rng, cfg.p_reuse)) {
      const ObjectInstance& s = prev->scene.get(prev->subject_id);
      const ObjectInstance& o = prev->scene.get(prev->object_id);
      std::vector<Relation> options;
      for (Relation r : lang::kAllRelations) {
        if (r == prev->relation) continue;
        if (r == Relation::In && !o.is_container) continue;
        if (!world::relation_holds(s, o, r)) options.push_back(r);
      }
      if (!options.empty()) {
        cur.scene = prev->scene;
        cur.subject_id = prev->subject_id;
        cur.object_id = prev->object_id;
        cur.relation = pick(options, rng);
        fixed_start = std::make_pair(s.cx, s.cy);
      }
    }
    if (cur.subject_id < 0) {
      for (int a = 0; a < 64; ++a) {
        cur.relation = lang::kAllRelations[uniform_index(rng, 4)];
        const CategorySpec* subj = pick(subjects, rng);
        std::vector<const CategorySpec*> objects;
        if (cur.relation == Relation::In) {
          objects = conts;
        } else {
          for (const auto& c : lib.seen)
            if (c.name != subj->name) objects.push_back(&c);
        }
        const CategorySpec* obj = pick(objects, rng);
        if (prev && prev->scene.get(prev->subject_id).category == subj->name &&
            prev->scene.get(prev->object_id).category == obj->name)
          continue;
        cur.scene = fresh_scene(*subj, *obj, rng, cur.subject_id, cur.object_id);
        break;
      }
    }

    const ObjectInstance subject = cur.scene.get(cur.subject_id);
    const ObjectInstance object = cur.scene.get(cur.object_id);
    std::vector<Scene> frames;
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      // A reused start that keeps failing under jitter falls back to a
      // freshly sampled start.
      std::optional<std::pair<double, double>> start =
          fixed_start && attempt < 100
              ? fixed_start
              : sample_subject_position(subject, object, cur.relation, false, rng);
      const auto end =
          sample_end_position(subject, object, cur.relation, rng);
      if (!start || !end) continue;
      ok = realise_task(cur.scene, cur.subject_id, cur.object_id, cur.relation,
                        *start, *end, cfg, rng, frames);
    }
    if (!ok)
      throw GenerationFailure("cannot realise task " + std::to_string(task) +
                              " of " + demo.video_id + " (" +
                              std::string(lang::relation_label(cur.relation)) +
                              ")");

    cur.utterance = pick_utterance(subject.category, cur.relation,
                                   object.category,
                                   prev ? prev->utterance : std::string(), rng);
    const std::size_t F = cfg.frames_per_task;
    const std::size_t n = cfg.n_frames_per_side;
    for (std::size_t i = 0; i < F; ++i) {
      Frame f;
      f.scene = frames[i];
      f.utterance = cur.utterance;
      f.task_idx = task;
      f.phase = i < n ? "start" : i >= F - n ? "end" : "mid";
      demo.frames.push_back(std::move(f));
    }
    cur.scene = frames.back();
    prev = std::move(cur);
  }
  return demo;
}

}  // namespace

Dataset generate_dataset(const GeneratorConfig& config) {
  config.validate();
  Dataset ds;
  ds.config = config;
  for (std::size_t v = 0; v < config.n_videos; ++v)
    ds.videos.push_back(generate_video(config, v));
  return ds;
}

// ---- segmentation --------------------------------------------------------

bool ambiguous_utterance(const std::string& utterance) {
  return lang::tokenize(utterance).empty() ||
         utterance.find('|') != std::string::npos;
}

std::vector<Segment> segment_by_utterance(const Demonstration& demo,
                                          std::size_t n_per_side,
                                          std::size_t video_index,
                                          const lang::SynonymTable& table) {
  std::vector<Segment> out;
  const auto& frames = demo.frames;
  std::size_t i = 0;
  while (i < frames.size()) {
    if (ambiguous_utterance(frames[i].utterance)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < frames.size() && frames[j + 1].utterance == frames[i].utterance)
      ++j;
    const std::size_t len = j - i + 1;
    if (len < 2 * n_per_side) {
      log_warn(demo.video_id + ": dropping " + std::to_string(len) +
               "-frame segment '" + frames[i].utterance + "'");
    } else {
      Segment s;
      s.video = video_index;
      s.utterance = frames[i].utterance;
      try {
        s.parsed = lang::parse_expression(lang::tokenize(s.utterance), table);
      } catch (const ParseError&) {
        s.parsed.reset();
      }
      s.begin = i;
      s.end = j;
      for (std::size_t k = 0; k < n_per_side; ++k) {
        s.x_minus.push_back(i + k);
        s.x_plus.push_back(j + 1 - n_per_side + k);
      }
      out.push_back(std::move(s));
    }
    i = j + 1;
  }
  return out;
}

std::vector<Segment> segment_dataset(const Dataset& dataset,
                                     const lang::SynonymTable& table) {
  std::vector<Segment> all;
  for (std::size_t v = 0; v < dataset.videos.size(); ++v) {
    auto segs = segment_by_utterance(dataset.videos[v],
                                     dataset.config.n_frames_per_side, v, table);
    all.insert(all.end(), segs.begin(), segs.end());
  }
  return all;
}

std::vector<std::pair<std::size_t, std::size_t>> mine_hard_pairs(
    const Segment& segment) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(segment.x_plus.size() * segment.x_minus.size());
  for (std::size_t p : segment.x_plus)
    for (std::size_t m : segment.x_minus) pairs.emplace_back(p, m);
  return pairs;
}

std::vector<FrameRef> sample_random_negatives(const std::vector<Segment>& segments,
                                              std::size_t query, std::size_t count,
                                              Rng& rng) {
  if (segments.size() < 2)
    throw InsufficientData("random negatives need at least two segments");
  std::vector<FrameRef> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t s = uniform_index(rng, segments.size() - 1);
    if (s >= query) ++s;
    const Segment& seg = segments[s];
    const std::size_t f = seg.begin + uniform_index(rng, seg.end - seg.begin + 1);
    out.push_back({s, seg.video, f});
  }
  return out;
}

// ---- persistence ---------------------------------------------------------

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset " + path.string());
  nlohmann::json header{{"format", kDatasetFormat},
                        {"version", kDatasetVersion},
                        {"config", dataset.config},
                        {"frames", dataset.frame_count()}};
  out << header.dump() << '\n';
  for (const auto& demo : dataset.videos) {
    for (std::size_t i = 0; i < demo.frames.size(); ++i) {
      const Frame& f = demo.frames[i];
      nlohmann::json line{{"video_id", demo.video_id},
                          {"task_idx", f.task_idx},
                          {"frame_idx", i},
                          {"utterance", f.utterance},
                          {"scene", f.scene},
                          {"phase", f.phase}};
      out << line.dump() << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset: missing header line");

  Dataset ds;
  std::size_t expected = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", std::string()) != kDatasetFormat)
      throw FormatError("dataset: bad magic, expected format '" +
                        std::string(kDatasetFormat) + "'");
    const int version = header.at("version").get<int>();
    if (version != kDatasetVersion)
      throw FormatError("dataset: unsupported version " + std::to_string(version));
    header.at("config").get_to(ds.config);
    expected = header.at("frames").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  }

  std::map<std::string, std::size_t> video_index;
  std::size_t lineno = 1;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto vid = j.at("video_id").get<std::string>();
      auto [it, inserted] = video_index.emplace(vid, ds.videos.size());
      if (inserted) ds.videos.push_back(Demonstration{vid, {}});
      Demonstration& demo = ds.videos[it->second];
      if (j.at("frame_idx").get<std::size_t>() != demo.frames.size())
        throw FormatError("dataset line " + std::to_string(lineno) +
                          ": frame_idx out of sequence");
      Frame f;
      j.at("task_idx").get_to(f.task_idx);
      j.at("utterance").get_to(f.utterance);
      j.at("phase").get_to(f.phase);
      j.at("scene").get_to(f.scene);
      demo.frames.push_back(std::move(f));
      ++count;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  if (count != expected)
    throw FormatError("dataset: header announces " + std::to_string(expected) +
                      " frames, file holds " + std::to_string(count) +
                      " (truncated?)");
  return ds;
}

}  // namespace ngd::narrate
