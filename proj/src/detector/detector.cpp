#include "ngd/detector/detector.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "ngd/core/error.hpp"
#include "ngd/core/json_util.hpp"
#include "ngd/nn/adam.hpp"
#include "ngd/nn/kernels.hpp"

namespace ngd::detector {

// ---- model ---------------------------------------------------------------

namespace {

// Box features enter the relation MLP centred and scaled so that
// centimetre-level offsets are not swamped by the 64 embedding inputs.
double feature_input(double f) { return (f - 0.5) * kFeatureScale; }

}  // namespace

DetectorModel::DetectorModel(lang::Vocabulary vocab)
    : encoder(vocab.size()),
      rel1("relation.fc1", kRelationInput, kRelationHidden),
      rel2("relation.fc2", kRelationHidden, kRelationHidden),
      rel3("relation.fc3", kRelationHidden, 1),
      thr1("threshold.fc1", encoder::kRelationDim, kThresholdHidden),
      thr2("threshold.fc2", kThresholdHidden, 1),
      vocab_(std::move(vocab)) {}

void DetectorModel::init(Rng& rng) {
  encoder.init(rng);
  rel1.init(rng);
  rel2.init(rng);
  rel3.init(rng);
  thr1.init(rng);
  thr2.init(rng);
}

std::vector<std::size_t> DetectorModel::encode(const lang::Tokens& tokens) const {
  return lang::encode_tokens(tokens, vocab_);
}

encoder::Encoder::Trace DetectorModel::embed(const std::string& utterance) const {
  const auto tokens = lang::tokenize(utterance);
  lang::parse_expression(tokens);  // throws ParseError
  return encoder.forward(encode(tokens));
}

std::vector<double> DetectorModel::relation_embedding(
    const std::string& utterance) const {
  return embed(utterance).embedding;
}

DetectorModel::RelationTrace DetectorModel::relation_forward(
    std::span<const double> embedding, std::span<const SpatialFeatures> subjects,
    std::span<const SpatialFeatures> objects) const {
  const std::size_t D = encoder::kRelationDim;
  if (embedding.size() != D || subjects.size() != objects.size())
    throw ShapeMismatch("relation forward: input sizes");
  const std::size_t n = subjects.size();
  RelationTrace tr;
  tr.input = nn::Tensor({n, kRelationInput});
  for (std::size_t r = 0; r < n; ++r) {
    auto row = tr.input.row(r);
    std::copy(embedding.begin(), embedding.end(), row.begin());
    for (std::size_t i = 0; i < 4; ++i) {
      row[D + i] = feature_input(subjects[r].v[i]);
      row[D + 4 + i] = feature_input(objects[r].v[i]);
    }
  }
  tr.hidden1 = rel1.forward(tr.input);
  nn::relu_inplace(tr.hidden1);
  tr.hidden2 = rel2.forward(tr.hidden1);
  nn::relu_inplace(tr.hidden2);
  const nn::Tensor out = rel3.forward(tr.hidden2);
  tr.scores.assign(out.storage().begin(), out.storage().end());
  return tr;
}

std::vector<double> DetectorModel::relation_backward(
    const RelationTrace& tr, std::span<const double> dscores) {
  const std::size_t n = tr.scores.size();
  if (dscores.size() != n) throw ShapeMismatch("relation backward: dscores");
  nn::Tensor dout({n, 1}, std::vector<double>(dscores.begin(), dscores.end()));
  nn::Tensor d2 = rel3.backward(tr.hidden2, dout);
  nn::relu_backward_inplace(tr.hidden2, d2);
  nn::Tensor d1 = rel2.backward(tr.hidden1, d2);
  nn::relu_backward_inplace(tr.hidden1, d1);
  const nn::Tensor dx = rel1.backward(tr.input, d1);
  std::vector<double> dv(encoder::kRelationDim, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    nn::kernels::axpy(1.0, dx.row(r).data(), dv.data(), dv.size());
  return dv;
}

DetectorModel::ThresholdTrace DetectorModel::threshold_forward(
    std::span<const double> embedding) const {
  ThresholdTrace tr;
  tr.hidden = thr1.forward(embedding);
  for (double& h : tr.hidden) h = h > 0.0 ? h : 0.0;
  tr.tau = thr2.forward(tr.hidden)[0];
  return tr;
}

void DetectorModel::threshold_backward(const ThresholdTrace& tr,
                                       std::span<const double> embedding,
                                       double dtau) {
  const double g[1] = {dtau};
  auto dh = thr2.backward(tr.hidden, g);
  for (std::size_t i = 0; i < dh.size(); ++i)
    if (!(tr.hidden[i] > 0.0)) dh[i] = 0.0;
  thr1.backward(embedding, dh);
}

double DetectorModel::score(std::span<const double> embedding,
                            const SpatialFeatures& fs,
                            const SpatialFeatures& fo) const {
  return relation_forward(embedding, std::span(&fs, 1), std::span(&fo, 1))
      .scores[0];
}

double DetectorModel::threshold(std::span<const double> embedding) const {
  return threshold_forward(embedding).tau;
}

std::vector<nn::Param*> DetectorModel::relation_params() {
  std::vector<nn::Param*> ps;
  for (auto* d : {&rel1, &rel2, &rel3})
    for (auto* p : d->params()) ps.push_back(p);
  return ps;
}

std::vector<nn::Param*> DetectorModel::threshold_params() {
  std::vector<nn::Param*> ps;
  for (auto* d : {&thr1, &thr2})
    for (auto* p : d->params()) ps.push_back(p);
  return ps;
}

std::vector<nn::Param*> DetectorModel::params() {
  auto ps = encoder_params();
  for (auto* p : relation_params()) ps.push_back(p);
  for (auto* p : threshold_params()) ps.push_back(p);
  return ps;
}

double score_relation(const DetectorModel& model, const std::string& utterance,
                      const SpatialFeatures& fs, const SpatialFeatures& fo) {
  return model.score(model.relation_embedding(utterance), fs, fo);
}

bool binary_reward(const DetectorModel& model, const std::string& utterance,
                   const SpatialFeatures& fs, const SpatialFeatures& fo) {
  const auto v = model.relation_embedding(utterance);
  return model.score(v, fs, fo) > model.threshold(v);
}

// ---- scorers -------------------------------------------------------------

std::vector<double> DetectorScorer::embedding(const std::string& utterance) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(utterance); it != cache_.end()) return it->second;
  }
  auto v = model_.relation_embedding(utterance);
  std::lock_guard lock(mutex_);
  return cache_.emplace(utterance, std::move(v)).first->second;
}

double DetectorScorer::score(const std::string& utterance,
                             const SpatialFeatures& fs,
                             const SpatialFeatures& fo) const {
  return model_.score(embedding(utterance), fs, fo);
}

double DetectorScorer::threshold(const std::string& utterance) const {
  return model_.threshold(embedding(utterance));
}

double OracleScorer::score(const std::string& utterance,
                           const SpatialFeatures& fs,
                           const SpatialFeatures& fo) const {
  const auto parsed = lang::parse_text(utterance);
  const auto s = world::denormalize(fs);
  const auto o = world::denormalize(fo);
  world::ObjectInstance subj{0, parsed.subject, s[0], s[1], s[2], s[3]};
  world::ObjectInstance obj{1, parsed.object, o[0], o[1], o[2], o[3]};
  obj.is_container = parsed.relation == lang::Relation::In;
  return world::relation_holds(subj, obj, parsed.relation) ? 1.0 : 0.0;
}

// ---- config --------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(margin > 0.0)) throw ConfigError("detector: margin must be > 0");
  if (!(kappa > 0.0)) throw ConfigError("detector: kappa must be > 0");
  if (!(lr > 0.0) || !(threshold_lr > 0.0))
    throw ConfigError("detector: learning rates must be > 0");
  if (detection.jitter_cm < 0.0 || detection.p_miss < 0.0 ||
      detection.p_miss >= 1.0)
    throw ConfigError("detector: detection noise needs sigma >= 0, 0 <= p_miss < 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"margin", c.margin},
      {"epochs", c.epochs},
      {"lr", c.lr},
      {"negative_mode", c.negative_mode == NegativeMode::Hard ? "hard" : "random"},
      {"seed", c.seed},
      {"threshold_epochs", c.threshold_epochs},
      {"threshold_lr", c.threshold_lr},
      {"kappa", c.kappa},
      {"freeze_encoder", c.freeze_encoder},
      {"augment_cm", c.augment_cm},
      {"augment_translate", c.augment_translate},
      {"augment_language", c.augment_language},
      {"printed_loss", c.printed_loss},
      {"detection_jitter_cm", c.detection.jitter_cm},
      {"detection_p_miss", c.detection.p_miss}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  check_keys(j,
             {"margin", "epochs", "lr", "negative_mode", "seed",
              "threshold_epochs", "threshold_lr", "kappa", "freeze_encoder", "augment_cm",
              "augment_translate", "augment_language",
              "printed_loss", "detection_jitter_cm", "detection_p_miss"},
             "detector_train");
  read_opt(j, "margin", c.margin);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "lr", c.lr);
  if (j.contains("negative_mode")) {
    const auto m = j.at("negative_mode").get<std::string>();
    if (m == "hard") c.negative_mode = NegativeMode::Hard;
    else if (m == "random") c.negative_mode = NegativeMode::Random;
    else throw ConfigError("detector_train: negative_mode must be hard|random");
  }
  read_opt(j, "seed", c.seed);
  read_opt(j, "threshold_epochs", c.threshold_epochs);
  read_opt(j, "threshold_lr", c.threshold_lr);
  read_opt(j, "kappa", c.kappa);
  read_opt(j, "freeze_encoder", c.freeze_encoder);
  read_opt(j, "augment_cm", c.augment_cm);
  read_opt(j, "augment_translate", c.augment_translate);
  read_opt(j, "augment_language", c.augment_language);
  read_opt(j, "printed_loss", c.printed_loss);
  read_opt(j, "detection_jitter_cm", c.detection.jitter_cm);
  read_opt(j, "detection_p_miss", c.detection.p_miss);
}

// ---- training data -------------------------------------------------------

namespace {

std::size_t find_run(const lang::Tokens& words, const lang::Tokens& run,
                     std::size_t from, std::size_t to, bool last) {
  std::size_t found = to;
  for (std::size_t i = from; i + run.size() <= to; ++i)
    if (std::equal(run.begin(), run.end(), words.begin() + i)) {
      found = i;
      if (!last) break;
    }
  return found;
}

void locate_phrases(const lang::Tokens& words, TrainingSegment& ts) {
  const std::size_t rb = ts.parsed.relation_begin;
  const std::size_t re = rb + ts.parsed.relation_tokens.size();
  const auto subject = lang::tokenize(ts.parsed.subject);
  const auto object = lang::tokenize(ts.parsed.object);
  const std::size_t sb = find_run(words, subject, 0, rb, true);
  const std::size_t ob = find_run(words, object, re, words.size(), false);
  if (sb == rb || ob == words.size())
    throw ParseError("cannot locate noun phrases in: " + lang::join(words));
  ts.subject_span = {sb, sb + subject.size()};
  ts.relation_span = {rb, re};
  ts.object_span = {ob, ob + object.size()};
}

}  // namespace

TrainingSet build_training_set(const narrate::Dataset& dataset,
                               const TrainConfig& config,
                               const lang::SynonymTable& table) {
  config.validate();
  Rng rng = make_rng(config.seed, "detector.detect");
  const auto segments = narrate::segment_dataset(dataset, table);

  std::vector<lang::Utterance> corpus;
  for (const auto& s : segments)
    if (s.parsed) corpus.push_back(lang::make_utterance(s.utterance));
  if (corpus.empty())
    throw NoParseableSegments("dataset has no parseable segments");

  TrainingSet set;
  set.vocab = lang::build_vocabulary(corpus);
  for (const auto& e : table.entries()) {
    bool known = true;
    for (const auto& t : e.phrase) known = known && set.vocab.contains(t);
    if (known)
      set.relation_phrases[static_cast<std::size_t>(e.relation)].push_back(
          lang::encode_tokens(e.phrase, set.vocab));
  }
  for (const auto& seg : segments) {
    if (!seg.parsed) continue;
    TrainingSegment ts;
    ts.source = seg;
    ts.parsed = *seg.parsed;
    const auto words = lang::tokenize(seg.utterance);
    ts.tokens = lang::encode_tokens(words, set.vocab);
    locate_phrases(words, ts);
    for (const auto& span : {ts.subject_span, ts.object_span}) {
      std::vector<std::size_t> noun(ts.tokens.begin() + span.first,
                                    ts.tokens.begin() + span.second);
      if (std::find(set.nouns.begin(), set.nouns.end(), noun) == set.nouns.end())
        set.nouns.push_back(std::move(noun));
    }
    const auto& frames = dataset.videos[seg.video].frames;
    for (std::size_t f = seg.begin; f <= seg.end; ++f) {
      const auto& scene = frames[f].scene;
      std::optional<FramePair> pair;
      try {
        auto fs = world::oracle_detect(scene, ts.parsed.subject, config.detection, rng);
        auto fo = world::oracle_detect(scene, ts.parsed.object, config.detection, rng);
        if (fs && fo) pair = FramePair{*fs, *fo};
      } catch (const UnknownCategory&) {
      }
      ts.frames.push_back(pair);
      ts.scenes.push_back(scene);
    }
    for (std::size_t f : seg.x_plus)
      if (const auto& p = ts.frames[f - seg.begin]) ts.positives.push_back(*p);
    for (std::size_t f : seg.x_minus)
      if (const auto& p = ts.frames[f - seg.begin]) ts.negatives.push_back(*p);
    if (ts.positives.empty() || ts.negatives.empty()) continue;
    set.sources.push_back(seg);
    set.segments.push_back(std::move(ts));
  }
  if (set.segments.empty())
    throw NoParseableSegments("no segment survived detection");
  return set;
}

std::vector<std::size_t> respell(const TrainingSet& set,
                                 const TrainingSegment& segment, Rng& rng) {
  const auto& t = segment.tokens;
  const auto& phrases =
      set.relation_phrases[static_cast<std::size_t>(segment.parsed.relation)];
  auto pick = [&](const std::vector<std::vector<std::size_t>>& from,
                  std::pair<std::size_t, std::size_t> span) {
    if (from.empty())
      return std::vector<std::size_t>(t.begin() + span.first, t.begin() + span.second);
    return from[uniform_index(rng, from.size())];
  };
  const auto subject = pick(set.nouns, segment.subject_span);
  const auto relation = pick(phrases, segment.relation_span);
  auto object = pick(set.nouns, segment.object_span);
  for (int a = 0; a < 8 && object == subject; ++a) object = pick(set.nouns, segment.object_span);

  // The words around the three phrases come from a random corpus segment.
  const TrainingSegment& frame = set.segments[uniform_index(rng, set.segments.size())];
  const auto& f = frame.tokens;
  std::vector<std::size_t> out(f.begin(), f.begin() + frame.subject_span.first);
  auto append = [&](const std::vector<std::size_t>& p) {
    out.insert(out.end(), p.begin(), p.end());
  };
  append(subject);
  out.insert(out.end(), f.begin() + frame.subject_span.second,
             f.begin() + frame.relation_span.first);
  append(relation);
  out.insert(out.end(), f.begin() + frame.relation_span.second,
             f.begin() + frame.object_span.first);
  append(object);
  out.insert(out.end(), f.begin() + frame.object_span.second, f.end());
  return out;
}

std::vector<FramePair> draw_negatives(const TrainingSet& set, std::size_t index,
                                      NegativeMode mode,
                                      const world::DetectionNoise& noise, Rng& rng) {
  const TrainingSegment& seg = set.segments[index];
  if (mode == NegativeMode::Hard) return seg.negatives;
  const std::size_t want = seg.source.x_minus.size();
  std::vector<FramePair> out;
  for (int round = 0; round < 64 && out.size() < want; ++round) {
    for (const auto& ref :
         narrate::sample_random_negatives(set.sources, index, want - out.size(), rng)) {
      const auto& src = set.segments[ref.segment];
      const auto& scene = src.scenes[ref.frame - src.source.begin];
      try {
        const auto fs = world::oracle_detect(scene, seg.parsed.subject, noise, rng);
        const auto fo = world::oracle_detect(scene, seg.parsed.object, noise, rng);
        if (fs && fo) out.push_back({*fs, *fo});
      } catch (const UnknownCategory&) {
      }
    }
  }
  return out;
}

// ---- losses --------------------------------------------------------------

double contrastive_loss(std::span<const double> pos, std::span<const double> neg,
                        double margin, std::vector<double>* dscores,
                        bool printed) {
  if (pos.empty() || neg.empty())
    throw EmptyPairSet("contrastive loss needs positives and negatives");
  if (dscores) dscores->assign(pos.size() + neg.size(), 0.0);
  double loss = 0.0;
  for (std::size_t k = 0; k < pos.size(); ++k)
    for (std::size_t m = 0; m < neg.size(); ++m) {
      const double term = printed ? pos[k] - neg[m] : margin + neg[m] - pos[k];
      if (term <= 0.0) continue;
      loss += term;
      if (dscores) {
        (*dscores)[k] += printed ? 1.0 : -1.0;
        (*dscores)[pos.size() + m] += printed ? -1.0 : 1.0;
      }
    }
  return loss;
}

namespace {

// Shifts both boxes of a frame by one common offset that keeps them on
// the table; every spatial predicate is invariant under this.
void translate_pair(FramePair& f, Rng& rng) {
  const auto& s = f.subject.v;
  const auto& o = f.object.v;
  const double x_lo = std::max(s[2], o[2]) / 2 - std::min(s[0], o[0]);
  const double x_hi = 1.0 - std::max(s[2], o[2]) / 2 - std::max(s[0], o[0]);
  const double y_lo = std::max(s[3], o[3]) / 2 - std::min(s[1], o[1]);
  const double y_hi = 1.0 - std::max(s[3], o[3]) / 2 - std::max(s[1], o[1]);
  if (x_lo >= x_hi || y_lo >= y_hi) return;
  const double dx = uniform(rng, x_lo, x_hi);
  const double dy = uniform(rng, y_lo, y_hi);
  f.subject.v[0] += dx;
  f.object.v[0] += dx;
  f.subject.v[1] += dy;
  f.object.v[1] += dy;
}

std::vector<FramePair> augment(std::span<const FramePair> frames,
                               const TrainConfig& config, Rng* rng) {
  std::vector<FramePair> out(frames.begin(), frames.end());
  if (!rng) return out;
  const double cm = config.augment_cm;
  const double dx = cm / world::kTableWidth;
  const double dy = cm / world::kTableDepth;
  for (auto& f : out) {
    if (config.augment_translate) translate_pair(f, *rng);
    if (cm <= 0.0) continue;
    for (auto* s : {&f.subject, &f.object}) {
      s->v[0] += uniform(*rng, -dx, dx);
      s->v[1] += uniform(*rng, -dy, dy);
      s->v[2] = std::max(1e-3, s->v[2] + uniform(*rng, -dx, dx));
      s->v[3] = std::max(1e-3, s->v[3] + uniform(*rng, -dy, dy));
    }
  }
  return out;
}

double segment_loss_impl(DetectorModel& model, std::span<const std::size_t> tokens,
                         std::span<const FramePair> positives,
                         std::span<const FramePair> negatives,
                         const TrainConfig& config, bool with_grad) {
  const auto trace = model.encoder.forward(tokens);
  std::vector<SpatialFeatures> subj, obj;
  for (auto frames : {positives, negatives})
    for (const auto& f : frames) {
      subj.push_back(f.subject);
      obj.push_back(f.object);
    }
  const auto rt = model.relation_forward(trace.embedding, subj, obj);
  const std::span<const double> scores(rt.scores);
  std::vector<double> dscores;
  const double loss = contrastive_loss(
      scores.first(positives.size()), scores.subspan(positives.size()),
      config.margin, with_grad ? &dscores : nullptr, config.printed_loss);
  if (with_grad) {
    const auto dv = model.relation_backward(rt, dscores);
    if (!config.freeze_encoder) model.encoder.backward(trace, dv);
  }
  return loss;
}

}  // namespace

double segment_loss(DetectorModel& model, const TrainingSegment& segment,
                    std::span<const FramePair> negatives, const TrainConfig& config,
                    bool with_grad) {
  return segment_loss_impl(model, segment.tokens, segment.positives, negatives, config,
                           with_grad);
}

double threshold_loss(DetectorModel& model, std::span<const double> embedding,
                      std::span<const FramePair> positives,
                      std::span<const FramePair> negatives, double kappa,
                      bool with_grad) {
  std::vector<SpatialFeatures> subj, obj;
  for (auto frames : {positives, negatives})
    for (const auto& f : frames) {
      subj.push_back(f.subject);
      obj.push_back(f.object);
    }
  const std::size_t n = subj.size();
  if (n == 0) throw EmptyPairSet("threshold loss needs labeled frames");
  const auto rt = model.relation_forward(embedding, subj, obj);
  const auto tt = model.threshold_forward(embedding);
  double loss = 0.0, dtau = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double label = i < positives.size() ? 1.0 : 0.0;
    const double z = kappa * (rt.scores[i] - tt.tau);
    loss += nn::bce_with_logit(z, label);
    dtau += -kappa * nn::bce_with_logit_grad(z, label);
  }
  loss /= static_cast<double>(n);
  if (with_grad) model.threshold_backward(tt, embedding, dtau / static_cast<double>(n));
  return loss;
}

// ---- training loops ------------------------------------------------------

std::vector<double> train_relation(DetectorModel& model, const TrainingSet& set,
                                   const TrainConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed, "detector.contrastive");
  std::vector<nn::Param*> params = model.relation_params();
  if (!config.freeze_encoder)
    for (auto* p : model.encoder_params()) params.push_back(p);
  nn::Adam adam(params, {config.lr});

  std::vector<std::size_t> order(set.segments.size());
  std::vector<double> history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      const auto& seg = set.segments[idx];
      const auto negatives = draw_negatives(set, idx, config.negative_mode, config.detection, rng);
      if (negatives.empty()) continue;
      const auto pos = augment(seg.positives, config, &rng);
      const auto neg = augment(negatives, config, &rng);
      const auto tokens =
          config.augment_language ? respell(set, seg, rng) : seg.tokens;
      adam.zero_grad();
      total += segment_loss_impl(model, tokens, pos, neg, config, true);
      adam.step();
    }
    history.push_back(total / static_cast<double>(order.size()));
  }
  return history;
}

namespace {

// Midpoint between the mean positive and mean negative training score;
// starting the threshold there avoids a long drift of the output bias.
double mean_midpoint(const DetectorModel& model, const TrainingSet& set) {
  double pos = 0.0, neg = 0.0;
  std::size_t np = 0, nn = 0;
  for (const auto& seg : set.segments) {
    const auto v = model.encoder.forward(seg.tokens).embedding;
    for (const auto& f : seg.positives) pos += model.score(v, f.subject, f.object);
    for (const auto& f : seg.negatives) neg += model.score(v, f.subject, f.object);
    np += seg.positives.size();
    nn += seg.negatives.size();
  }
  return 0.5 * (pos / static_cast<double>(np) + neg / static_cast<double>(nn));
}

}  // namespace

std::vector<double> train_threshold(DetectorModel& model, const TrainingSet& set,
                                    const TrainConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed, "detector.threshold");
  model.thr2.bias.value[0] = mean_midpoint(model, set);
  nn::Adam adam(model.threshold_params(), {config.threshold_lr});

  std::vector<std::size_t> order(set.segments.size());
  std::vector<double> history;
  for (std::size_t epoch = 0; epoch < config.threshold_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      const auto& seg = set.segments[idx];
      const auto negatives = draw_negatives(set, idx, config.negative_mode, config.detection, rng);
      if (negatives.empty()) continue;
      const auto tokens =
          config.augment_language ? respell(set, seg, rng) : seg.tokens;
      const auto embedding = model.encoder.forward(tokens).embedding;
      adam.zero_grad();
      total += threshold_loss(model, embedding, seg.positives, negatives,
                              config.kappa, true);
      adam.step();
    }
    history.push_back(total / static_cast<double>(order.size()));
  }
  return history;
}

TrainResult train_detector(const TrainingSet& set, const TrainConfig& config) {
  config.validate();
  TrainResult result{DetectorModel(set.vocab), {}, {}};
  Rng init = make_rng(config.seed, "detector.init");
  result.model.init(init);
  result.loss_history = train_relation(result.model, set, config);
  result.threshold_history = train_threshold(result.model, set, config);
  return result;
}

TrainResult train_detector(const narrate::Dataset& dataset,
                           const TrainConfig& config) {
  return train_detector(build_training_set(dataset, config), config);
}

}  // namespace ngd::detector
