#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ngd/core/rng.hpp"
#include "ngd/encoder/encoder.hpp"
#include "ngd/lang/language.hpp"
#include "ngd/narrate/narrate.hpp"
#include "ngd/nn/layers.hpp"
#include "ngd/world/world.hpp"

namespace ngd::detector {

using world::SpatialFeatures;

inline constexpr std::size_t kRelationInput = encoder::kRelationDim + 8;
inline constexpr std::size_t kRelationHidden = 64;
inline constexpr double kFeatureScale = 10.0;
inline constexpr std::size_t kThresholdHidden = 32;
inline constexpr const char* kDetectorVersion = "detector-v1";

// Relation MLP (v_s ++ f_s ++ f_o -> 64 -> 64 -> 1) plus the threshold
// branch (v_s -> 32 -> 1) on top of the utterance encoder.
class DetectorModel {
 public:
  struct RelationTrace {
    nn::Tensor input;   // N x 72
    nn::Tensor hidden1; // post-relu
    nn::Tensor hidden2; // post-relu
    std::vector<double> scores;
  };
  struct ThresholdTrace {
    std::vector<double> hidden;  // post-relu
    double tau = 0.0;
  };

  DetectorModel() = default;
  explicit DetectorModel(lang::Vocabulary vocab);

  void init(Rng& rng);

  const lang::Vocabulary& vocab() const { return vocab_; }
  std::vector<std::size_t> encode(const lang::Tokens& tokens) const;

  // Parses (throws ParseError) and runs the encoder.
  encoder::Encoder::Trace embed(const std::string& utterance) const;
  std::vector<double> relation_embedding(const std::string& utterance) const;

  RelationTrace relation_forward(std::span<const double> embedding,
                                 std::span<const SpatialFeatures> subjects,
                                 std::span<const SpatialFeatures> objects) const;
  // Accumulates relation-MLP gradients; returns dLoss/dv_s summed over rows.
  std::vector<double> relation_backward(const RelationTrace& trace,
                                        std::span<const double> dscores);

  ThresholdTrace threshold_forward(std::span<const double> embedding) const;
  void threshold_backward(const ThresholdTrace& trace,
                          std::span<const double> embedding, double dtau);

  double score(std::span<const double> embedding, const SpatialFeatures& fs,
               const SpatialFeatures& fo) const;
  double threshold(std::span<const double> embedding) const;

  std::vector<nn::Param*> encoder_params() { return encoder.params(); }
  std::vector<nn::Param*> relation_params();
  std::vector<nn::Param*> threshold_params();
  std::vector<nn::Param*> params();

  encoder::Encoder encoder;
  nn::Dense rel1, rel2, rel3;
  nn::Dense thr1, thr2;
  std::string version = kDetectorVersion;

 private:
  lang::Vocabulary vocab_;
};

// Score S for an utterance and a (subject, object) feature pair.
double score_relation(const DetectorModel& model, const std::string& utterance,
                      const SpatialFeatures& fs, const SpatialFeatures& fo);
// R = 1 iff S > tau(v_s).
bool binary_reward(const DetectorModel& model, const std::string& utterance,
                   const SpatialFeatures& fs, const SpatialFeatures& fo);

// ---- scorer interface ----------------------------------------------------

// Anything that produces an unthresholded score and a threshold for an
// utterance. Evaluation, retrieval and goal synthesis run against this.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const std::string& utterance, const SpatialFeatures& fs,
                       const SpatialFeatures& fo) const = 0;
  virtual double threshold(const std::string& utterance) const = 0;
  bool reward(const std::string& utterance, const SpatialFeatures& fs,
              const SpatialFeatures& fo) const {
    return score(utterance, fs, fo) > threshold(utterance);
  }
};

// Wraps a trained model; caches relation embeddings per utterance.
class DetectorScorer : public Scorer {
 public:
  explicit DetectorScorer(const DetectorModel& model) : model_(model) {}
  double score(const std::string& utterance, const SpatialFeatures& fs,
               const SpatialFeatures& fo) const override;
  double threshold(const std::string& utterance) const override;
  std::vector<double> embedding(const std::string& utterance) const;

 private:
  const DetectorModel& model_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

// Ground-truth predicate as the score (1/0), threshold 0.5. The object
// is treated as a container for "in" utterances.
class OracleScorer : public Scorer {
 public:
  double score(const std::string& utterance, const SpatialFeatures& fs,
               const SpatialFeatures& fo) const override;
  double threshold(const std::string&) const override { return 0.5; }
};

class ConstantScorer : public Scorer {
 public:
  explicit ConstantScorer(double value, double tau = 0.0) : value_(value), tau_(tau) {}
  double score(const std::string&, const SpatialFeatures&,
               const SpatialFeatures&) const override { return value_; }
  double threshold(const std::string&) const override { return tau_; }

 private:
  double value_;
  double tau_;
};

// ---- training ------------------------------------------------------------

enum class NegativeMode { Hard, Random };

struct TrainConfig {
  double margin = 1.0;
  std::size_t epochs = 50;
  double lr = 0.001;
  NegativeMode negative_mode = NegativeMode::Hard;
  std::uint64_t seed = 1;
  std::size_t threshold_epochs = 10;
  double threshold_lr = 0.01;
  double kappa = 4.0;
  bool freeze_encoder = false;
  double augment_cm = 0.5;
  // Random common translation of both boxes per training frame.
  bool augment_translate = true;
  // Re-spells each training utterance with random corpus nouns and a
  // random synonym of its relation phrase.
  bool augment_language = true;
  // Uses the unmargined max(0, S_pos - S_neg) as printed in the original
  // write-up; only for demonstrating that it diverges.
  bool printed_loss = false;
  world::DetectionNoise detection;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct FramePair {
  SpatialFeatures subject;
  SpatialFeatures object;
};

// One parseable segment with detected features for every frame.
struct TrainingSegment {
  narrate::Segment source;
  lang::ParsedExpression parsed;
  std::vector<std::size_t> tokens;  // vocabulary indices
  // Token ranges [first, second) of the three phrases inside `tokens`.
  std::pair<std::size_t, std::size_t> subject_span, relation_span, object_span;
  std::vector<FramePair> positives;  // X+ frames that were detected
  std::vector<FramePair> negatives;  // X- frames that were detected
  // Indexed by frame - source.begin; nullopt where a detection was missed.
  std::vector<std::optional<FramePair>> frames;
  std::vector<world::Scene> scenes;  // same indexing as `frames`

  const std::string& utterance() const { return source.utterance; }
};

struct TrainingSet {
  lang::Vocabulary vocab;
  std::vector<TrainingSegment> segments;
  std::vector<narrate::Segment> sources;  // parallel to `segments`
  // Distinct noun phrases and in-vocabulary relation phrases of the corpus.
  std::vector<std::vector<std::size_t>> nouns;
  std::array<std::vector<std::vector<std::size_t>>, 4> relation_phrases;
};

// Token sequence of `segment` with nouns and relation phrase re-drawn,
// set into the words of a random corpus segment.
std::vector<std::size_t> respell(const TrainingSet& set,
                                 const TrainingSegment& segment, Rng& rng);

// Segments, parses and detects. Frames where either object is missed are
// discarded; segments left without positives or negatives are dropped.
// Throws NoParseableSegments when nothing usable remains.
TrainingSet build_training_set(const narrate::Dataset& dataset,
                               const TrainConfig& config,
                               const lang::SynonymTable& table = lang::SynonymTable::builtin());

// sum_{k in P} sum_{m in N} max(0, margin + S_m - S_k); fills dscores
// (positives first, then negatives). Throws EmptyPairSet.
double contrastive_loss(std::span<const double> pos_scores,
                        std::span<const double> neg_scores, double margin,
                        std::vector<double>* dscores = nullptr,
                        bool printed = false);

// Loss of one segment against explicit negatives, with full backward pass
// into the model when `with_grad` is set.
double segment_loss(DetectorModel& model, const TrainingSegment& segment,
                    std::span<const FramePair> negatives, const TrainConfig& config,
                    bool with_grad);

struct TrainResult {
  DetectorModel model;
  std::vector<double> loss_history;       // mean contrastive loss per epoch
  std::vector<double> threshold_history;  // mean cross-entropy per epoch
};

// Contrastive phase followed by the threshold phase.
TrainResult train_detector(const narrate::Dataset& dataset, const TrainConfig& config);
TrainResult train_detector(const TrainingSet& set, const TrainConfig& config);

// Contrastive phase only, on an existing model.
std::vector<double> train_relation(DetectorModel& model, const TrainingSet& set,
                                   const TrainConfig& config);
// Threshold phase; only threshold parameters change. Returns per-epoch
// mean cross-entropy.
std::vector<double> train_threshold(DetectorModel& model, const TrainingSet& set,
                                    const TrainConfig& config);
// Cross-entropy of one segment's labeled frames for the threshold branch.
double threshold_loss(DetectorModel& model, std::span<const double> embedding,
                      std::span<const FramePair> positives,
                      std::span<const FramePair> negatives, double kappa,
                      bool with_grad);

// Negatives for one segment under the configured mode. Random negatives are
// frames of other segments in which the query's subject and object are
// detected; frames where either is missing are discarded and redrawn.
std::vector<FramePair> draw_negatives(const TrainingSet& set, std::size_t index,
                                      NegativeMode mode,
                                      const world::DetectionNoise& noise, Rng& rng);

}  // namespace ngd::detector
