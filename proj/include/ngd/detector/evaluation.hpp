#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ngd/core/rng.hpp"
#include "ngd/detector/detector.hpp"
#include "ngd/world/world.hpp"

namespace ngd::detector {

using lang::Relation;

struct BenchmarkItem {
  world::Scene scene;
  int subject_id = 0;
  int object_id = 1;
  std::string utterance;
  Relation relation = Relation::In;
  bool label = false;
  bool near_miss = false;

  SpatialFeatures subject_features() const;
  SpatialFeatures object_features() const;
};

using Benchmark = std::vector<BenchmarkItem>;

// n/2 satisfying and n/2 violating scenes (at least 20% of the violating
// ones are near misses within 2*margin of the predicate boundary), in
// shuffled order. n must be even.
Benchmark gen_benchmark(Relation relation, std::size_t n, Rng& rng);
// One benchmark per relation, seeded from named sub-streams.
std::map<Relation, Benchmark> gen_benchmarks(std::size_t n, std::uint64_t seed);

void save_benchmark(const std::filesystem::path& path, const Benchmark& b);
Benchmark load_benchmark(const std::filesystem::path& path);

struct AttentionRow {
  std::string utterance;
  std::vector<std::pair<std::string, double>> weights;
};

struct EvalReport {
  std::array<double, 4> accuracy{};  // in, behind, left, right
  double average = 0.0;
  std::optional<std::array<double, 4>> precision_at_5;
  std::vector<AttentionRow> attention;

  double accuracy_for(Relation r) const;
};

EvalReport eval_classification(const Scorer& scorer,
                               const std::map<Relation, Benchmark>& benchmarks);
double benchmark_accuracy(const Scorer& scorer, const Benchmark& benchmark);

nlohmann::json report_json(const EvalReport& report);
// Aligned plain-text table: in, behind, left, right, avg.
std::string report_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

// ---- retrieval -----------------------------------------------------------

// Same object pair in `n` configurations, exactly `positives` of which
// satisfy the relation.
Benchmark gen_pool(Relation relation, std::size_t n, std::size_t positives, Rng& rng);

struct Ranking {
  std::vector<std::size_t> order;  // pool indices, best first
  std::vector<double> scores;      // per pool index
  double precision_at_5 = 0.0;
};

// Descending by score, ties by pool index.
Ranking rank_pool(const Scorer& scorer, const std::string& utterance,
                  const Benchmark& pool);

// ---- attention -----------------------------------------------------------

// Throws ParseError for an unparseable utterance.
std::vector<AttentionRow> attention_report(const DetectorModel& model,
                                           const std::vector<std::string>& utterances);

}  // namespace ngd::detector
