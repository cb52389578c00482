#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ngd/core/rng.hpp"
#include "ngd/lang/language.hpp"
#include "ngd/narrate/objects.hpp"
#include "ngd/world/world.hpp"

namespace ngd::narrate {

using lang::Relation;

// ---- utterance templates -------------------------------------------------

struct Template {
  std::string pattern;  // "{s}", "{r}", "{o}" placeholders
  bool held_out = false;  // never used by the generator
};

const std::vector<Template>& templates();
std::string render(const Template& t, const std::string& subject,
                   const std::string& relation_phrase, const std::string& object);

// ---- placement sampling --------------------------------------------------

// Half-width (cm) of the square around the object in which demonstrated
// placements are drawn.
inline constexpr double kPlacementWindow = 18.0;

// Samples a subject center near `object` (within +-window cm, box kept on
// the table) for which relation_holds(subject, object, relation) equals
// `satisfy`. nullopt after max_attempts rejections.
std::optional<std::pair<double, double>> sample_subject_position(
    const world::ObjectInstance& subject, const world::ObjectInstance& object,
    Relation relation, bool satisfy, Rng& rng, double window = kPlacementWindow,
    int max_attempts = 1000);

// Where a demonstrator leaves the subject at the end of a task. Same as
// sample_subject_position(..., true, ...) except that for In the whole
// subject box comes to rest inside the container.
std::optional<std::pair<double, double>> sample_end_position(
    const world::ObjectInstance& subject, const world::ObjectInstance& object,
    Relation relation, Rng& rng);

// ---- generator -----------------------------------------------------------

struct GeneratorConfig {
  std::size_t n_videos = 4;
  std::size_t tasks_min = 14;
  std::size_t tasks_max = 30;
  std::size_t frames_per_task = 12;
  std::size_t n_frames_per_side = 3;
  double p_reuse = 0.7;
  double frame_jitter_cm = 0.5;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

struct Frame {
  world::Scene scene;
  std::string utterance;
  std::size_t task_idx = 0;
  std::string phase;  // "start" | "mid" | "end"

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct Demonstration {
  std::string video_id;
  std::vector<Frame> frames;

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

struct Dataset {
  GeneratorConfig config;
  std::vector<Demonstration> videos;

  std::size_t frame_count() const;
};

// Throws GenerationFailure if a task cannot be realised in 1000 attempts.
Dataset generate_dataset(const GeneratorConfig& config);

// ---- segmentation and mining ---------------------------------------------

struct Segment {
  std::size_t video = 0;
  std::string utterance;
  std::optional<lang::ParsedExpression> parsed;  // nullopt: unparseable
  std::size_t begin = 0;  // inclusive frame range
  std::size_t end = 0;
  std::vector<std::size_t> x_minus;
  std::vector<std::size_t> x_plus;
};

// A frame whose utterance is empty or lists several overlapping
// utterances ('|'-separated) is ambiguous and never joins a segment.
bool ambiguous_utterance(const std::string& utterance);

// Maximal runs of identical utterances. Runs shorter than 2*n_per_side
// frames are dropped with a warning.
std::vector<Segment> segment_by_utterance(
    const Demonstration& demo, std::size_t n_per_side, std::size_t video_index = 0,
    const lang::SynonymTable& table = lang::SynonymTable::builtin());
std::vector<Segment> segment_dataset(
    const Dataset& dataset,
    const lang::SynonymTable& table = lang::SynonymTable::builtin());

// X+ x X- (positive frame, negative frame).
std::vector<std::pair<std::size_t, std::size_t>> mine_hard_pairs(
    const Segment& segment);

struct FrameRef {
  std::size_t segment = 0;
  std::size_t video = 0;
  std::size_t frame = 0;
};

// Frames drawn uniformly from segments other than `query` (segment chosen
// uniformly, then a frame uniformly within it). Throws InsufficientData
// with fewer than two segments.
std::vector<FrameRef> sample_random_negatives(const std::vector<Segment>& segments,
                                              std::size_t query, std::size_t count,
                                              Rng& rng);

// ---- persistence ---------------------------------------------------------

inline constexpr const char* kDatasetFormat = "nvd-synth";
inline constexpr int kDatasetVersion = 1;

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace ngd::narrate
