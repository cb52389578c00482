#include "ngd/detector/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "ngd/core/error.hpp"
#include "ngd/narrate/narrate.hpp"

namespace ngd::detector {

using world::ObjectInstance;

namespace {

std::size_t relation_slot(Relation r) {
  for (std::size_t i = 0; i < lang::kAllRelations.size(); ++i)
    if (lang::kAllRelations[i] == r) return i;
  return 0;
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

// Subject/object pair for a relation, with the object placed centrally.
std::pair<ObjectInstance, ObjectInstance> sample_pair(Relation relation, Rng& rng) {
  const auto& lib = narrate::ObjectLibrary::standard();
  const auto subjects = narrate::non_containers(lib.seen);
  const narrate::CategorySpec* subj = pick(subjects, rng);
  std::vector<const narrate::CategorySpec*> objects;
  if (relation == Relation::In) {
    objects = narrate::containers(lib.seen);
  } else {
    for (const auto& c : lib.seen)
      if (c.name != subj->name) objects.push_back(&c);
  }
  const narrate::CategorySpec* obj = pick(objects, rng);
  ObjectInstance o = narrate::make_instance(*obj, 1, uniform(rng, 15, 45),
                                            uniform(rng, 15, 45), rng);
  ObjectInstance s = narrate::make_instance(*subj, 0, 0, 0, rng);
  return {s, o};
}

std::string benchmark_utterance(const std::string& subject, Relation relation,
                                const std::string& object, Rng& rng) {
  std::vector<const narrate::Template*> usable;
  for (const auto& t : narrate::templates())
    if (!t.held_out) usable.push_back(&t);
  const auto phrases = lang::SynonymTable::builtin().phrases(relation);
  return narrate::render(*pick(usable, rng), subject, pick(phrases, rng), object);
}

// Subject placed so that the predicate fails by at most 2*margin.
std::optional<std::pair<double, double>> near_miss_position(
    const ObjectInstance& s, const ObjectInstance& o, Relation relation, Rng& rng) {
  constexpr double d = world::kPredicateMargin;
  for (int a = 0; a < 1000; ++a) {
    const double u = uniform(rng, 1e-3, 2 * d);
    double x = 0, y = 0;
    switch (relation) {
      case Relation::LeftOf:
        x = o.cx - o.w / 2 - s.w / 2 - d + u;
        y = o.cy + uniform(rng, -10, 10);
        break;
      case Relation::RightOf:
        x = o.cx + o.w / 2 + s.w / 2 + d - u;
        y = o.cy + uniform(rng, -10, 10);
        break;
      case Relation::Behind:
        x = o.cx + uniform(rng, -10, 10);
        y = o.cy + o.h / 2 + s.h / 2 + d - u;
        break;
      case Relation::In: {
        const double sign = bernoulli(rng, 0.5) ? 1.0 : -1.0;
        const double inside = uniform(rng, -0.5, 0.5);
        if (bernoulli(rng, 0.5)) {
          x = o.cx + sign * (o.w / 2 + u);
          y = o.cy + inside * o.h;
        } else {
          x = o.cx + inside * o.w;
          y = o.cy + sign * (o.h / 2 + u);
        }
        break;
      }
    }
    if (x < s.w / 2 || x > world::kTableWidth - s.w / 2) continue;
    if (y < s.h / 2 || y > world::kTableDepth - s.h / 2) continue;
    ObjectInstance t = s;
    t.cx = x;
    t.cy = y;
    if (!world::relation_holds(t, o, relation)) return std::make_pair(x, y);
  }
  return std::nullopt;
}

BenchmarkItem make_item(ObjectInstance s, ObjectInstance o, std::pair<double, double> pos,
                        Relation relation, std::string utterance, bool near_miss) {
  s.cx = pos.first;
  s.cy = pos.second;
  BenchmarkItem item;
  item.scene.objects = {s, o};
  item.subject_id = s.id;
  item.object_id = o.id;
  item.utterance = std::move(utterance);
  item.relation = relation;
  item.label = world::predicate_holds(item.scene, s.id, o.id, relation);
  item.near_miss = near_miss;
  return item;
}

}  // namespace

SpatialFeatures BenchmarkItem::subject_features() const {
  return world::normalized_features(scene, subject_id);
}

SpatialFeatures BenchmarkItem::object_features() const {
  return world::normalized_features(scene, object_id);
}

Benchmark gen_benchmark(Relation relation, std::size_t n, Rng& rng) {
  if (n % 2 != 0) throw ConfigError("benchmark size must be even");
  const std::size_t half = n / 2;
  const std::size_t near = (half + 4) / 5;  // ceil(20%)
  Benchmark out;
  while (out.size() < n) {
    const std::size_t k = out.size();
    const bool positive = k < half;
    const bool near_miss = !positive && k - half < near;
    auto [s, o] = sample_pair(relation, rng);
    std::optional<std::pair<double, double>> pos =
        near_miss ? near_miss_position(s, o, relation, rng)
                  : narrate::sample_subject_position(s, o, relation, positive, rng);
    if (!pos) continue;
    out.push_back(make_item(s, o, *pos, relation,
                            benchmark_utterance(s.category, relation, o.category, rng),
                            near_miss));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::map<Relation, Benchmark> gen_benchmarks(std::size_t n, std::uint64_t seed) {
  std::map<Relation, Benchmark> out;
  for (Relation r : lang::kAllRelations) {
    Rng rng = make_rng(seed, "benchmark", relation_slot(r));
    out[r] = gen_benchmark(r, n, rng);
  }
  return out;
}

void save_benchmark(const std::filesystem::path& path, const Benchmark& b) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& item : b)
    arr.push_back({{"scene", item.scene},
                   {"subject", item.subject_id},
                   {"object", item.object_id},
                   {"utterance", item.utterance},
                   {"relation", lang::relation_label(item.relation)},
                   {"label", item.label},
                   {"near_miss", item.near_miss}});
  std::ofstream out(path);
  if (!out) throw IoError("cannot write benchmark " + path.string());
  out << arr.dump() << '\n';
}

Benchmark load_benchmark(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read benchmark " + path.string());
  Benchmark b;
  try {
    const auto arr = nlohmann::json::parse(in);
    for (const auto& j : arr) {
      BenchmarkItem item;
      j.at("scene").get_to(item.scene);
      j.at("subject").get_to(item.subject_id);
      j.at("object").get_to(item.object_id);
      j.at("utterance").get_to(item.utterance);
      const auto rel = lang::relation_from_label(j.at("relation").get<std::string>());
      if (!rel) throw FormatError("benchmark: unknown relation");
      item.relation = *rel;
      j.at("label").get_to(item.label);
      j.at("near_miss").get_to(item.near_miss);
      b.push_back(std::move(item));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("benchmark: ") + e.what());
  }
  return b;
}

// ---- classification ------------------------------------------------------

double EvalReport::accuracy_for(Relation r) const {
  return accuracy[relation_slot(r)];
}

double benchmark_accuracy(const Scorer& scorer, const Benchmark& benchmark) {
  if (benchmark.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& item : benchmark) {
    const bool r = scorer.reward(item.utterance, item.subject_features(),
                                 item.object_features());
    correct += r == item.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(benchmark.size());
}

EvalReport eval_classification(const Scorer& scorer,
                               const std::map<Relation, Benchmark>& benchmarks) {
  EvalReport report;
  double sum = 0.0;
  for (Relation r : lang::kAllRelations) {
    const auto it = benchmarks.find(r);
    const double acc = it == benchmarks.end() ? 0.0 : benchmark_accuracy(scorer, it->second);
    report.accuracy[relation_slot(r)] = acc;
    sum += acc;
  }
  report.average = sum / 4.0;
  return report;
}

nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json acc;
  for (Relation r : lang::kAllRelations)
    acc[std::string(lang::relation_short(r))] = report.accuracy_for(r);
  nlohmann::json j{{"accuracy", acc}, {"average", report.average}};
  if (report.precision_at_5) {
    nlohmann::json p;
    for (std::size_t i = 0; i < 4; ++i)
      p[std::string(lang::relation_short(lang::kAllRelations[i]))] =
          (*report.precision_at_5)[i];
    j["precision_at_5"] = p;
  }
  if (!report.attention.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.attention) {
      nlohmann::json w = nlohmann::json::array();
      for (const auto& [tok, weight] : row.weights) w.push_back({tok, weight});
      rows.push_back({{"utterance", row.utterance}, {"weights", w}});
    }
    j["attention"] = rows;
  }
  return j;
}

std::string report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::size_t width = 8;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::ostringstream out;
  char buf[128];
  out << std::string(width, ' ');
  for (const char* h : {"in", "behind", "left", "right", "avg."}) {
    std::snprintf(buf, sizeof buf, "  %7s", h);
    out << buf;
  }
  out << '\n';
  for (const auto& [name, r] : rows) {
    out << name << std::string(width - name.size(), ' ');
    for (std::size_t i = 0; i < 4; ++i) {
      std::snprintf(buf, sizeof buf, "  %7.2f", r.accuracy[i]);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "  %7.2f", r.average);
    out << buf << '\n';
  }
  return out.str();
}

// ---- retrieval -----------------------------------------------------------

Benchmark gen_pool(Relation relation, std::size_t n, std::size_t positives, Rng& rng) {
  if (positives > n) throw ConfigError("pool: more positives than scenes");
  auto [s, o] = sample_pair(relation, rng);
  const std::string utterance =
      benchmark_utterance(s.category, relation, o.category, rng);
  Benchmark pool;
  std::size_t pos_count = 0;
  while (pool.size() < n) {
    const bool want = pos_count < positives;
    ObjectInstance obj = o;
    obj.cx = uniform(rng, 15, 45);
    obj.cy = uniform(rng, 15, 45);
    const auto p = narrate::sample_subject_position(s, obj, relation, want, rng, 20.0);
    if (!p) continue;
    pool.push_back(make_item(s, obj, *p, relation, utterance, false));
    pos_count += want ? 1 : 0;
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  return pool;
}

Ranking rank_pool(const Scorer& scorer, const std::string& utterance,
                  const Benchmark& pool) {
  Ranking r;
  r.scores.reserve(pool.size());
  for (const auto& item : pool)
    r.scores.push_back(
        scorer.score(utterance, item.subject_features(), item.object_features()));
  r.order.resize(pool.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    return r.scores[a] > r.scores[b];
  });
  const std::size_t top = std::min<std::size_t>(5, pool.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top; ++i) hits += pool[r.order[i]].label ? 1 : 0;
  r.precision_at_5 = top ? static_cast<double>(hits) / static_cast<double>(top) : 0.0;
  return r;
}

// ---- attention -----------------------------------------------------------

std::vector<AttentionRow> attention_report(const DetectorModel& model,
                                           const std::vector<std::string>& utterances) {
  std::vector<AttentionRow> rows;
  for (const auto& u : utterances) {
    const auto tokens = lang::tokenize(u);
    const auto trace = model.embed(u);
    AttentionRow row{u, {}};
    for (std::size_t t = 0; t < tokens.size(); ++t)
      row.weights.emplace_back(tokens[t], trace.weights[t]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ngd::detector
