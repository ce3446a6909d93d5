#include "antq/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "antq/checkpoint.hpp"
#include "antq/errors.hpp"
#include "antq/evaluation.hpp"

namespace antq {

namespace {

void check_finite(double loss, std::size_t step, const char* stage) {
  if (!std::isfinite(loss)) {
    throw NumericalError(std::string(stage) + ": non-finite loss " + std::to_string(loss) +
                         " at step " + std::to_string(step));
  }
}

}  // namespace

void Stage1Config::validate() const {
  if (steps == 0 || batch_size == 0) throw ConfigError("stage-1 steps and batch size must be >= 1");
  if (!(optimizer.lr > 0.0)) throw ConfigError("stage-1 learning rate must be > 0");
}

void Stage2Config::validate() const {
  if (steps == 0 || batch_size == 0) throw ConfigError("stage-2 steps and batch size must be >= 1");
  if (!(optimizer.lr > 0.0)) throw ConfigError("stage-2 learning rate must be > 0");
  if (!(observe_min > 0.0 && observe_min <= observe_max && observe_max < 1.0)) {
    throw ConfigError("observation fractions must satisfy 0 < min <= max < 1");
  }
  if (!(anticipate_min > 0.0 && anticipate_min <= anticipate_max && anticipate_max <= 1.0)) {
    throw ConfigError("anticipation fractions must satisfy 0 < min <= max <= 1");
  }
  for (double f : observe_choices) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("observation choices must lie in (0, 1)");
  }
  for (double f : anticipate_choices) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("anticipation choices must lie in (0, 1]");
  }
  loss.validate();
}

std::vector<Stage1Example> stage1_dataset(std::span<const VideoSample> videos, const ModelConfig& model,
                                          const Stage1Config& config) {
  std::vector<Stage1Example> out;
  for (const auto& v : videos) {
    auto examples = config.sliding_window
                        ? sliding_window_examples(v, model.window_k, model.num_classes,
                                                  config.include_empty_future)
                        : stage1_examples(v, model.num_classes, config.include_empty_future);
    out.insert(out.end(), examples.begin(), examples.end());
  }
  return out;
}

namespace {

const VideoSample& find_video(std::span<const VideoSample> videos, const std::string& id) {
  for (const auto& v : videos) {
    if (v.id == id) return v;
  }
  throw UsageError("unknown video " + id);
}

Tensor segment_features(const VideoSample& video, const Segment& segment) {
  return segment_rows(video.feature_tensor(), segment);
}

}  // namespace

std::vector<StepLog> train_stage1(AnticipatrModel& model, std::span<const VideoSample> videos,
                                  const Stage1Config& config, const StepCallback& on_step) {
  config.validate();
  const auto examples = stage1_dataset(videos, model.config(), config);
  if (examples.empty()) throw UsageError("no stage-1 examples in the training set");
  std::vector<Tensor> segments;
  for (const auto& ex : examples) {
    segments.push_back(segment_features(find_video(videos, ex.segment.video_id), ex.segment));
  }

  auto& encoder = model.segment_encoder();
  const auto params = encoder.parameters();
  set_requires_grad(params, true);
  AdamW optimizer(params, config.optimizer);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, examples.size() - 1);
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);

  std::vector<StepLog> log;
  for (std::size_t step = 0; step < config.steps; ++step) {
    optimizer.zero_grad();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const std::size_t i = pick(rng);
      ad::Tape tape;
      ad::TapeScope scope(tape);
      const Dropout dropout(model.config().dropout_p, rng);
      const Tensor probs = encoder.future_probs(encoder.encode(segments[i], dropout));
      const Tensor loss = ad::scale(bce_multilabel(probs, examples[i].target), inv_batch);
      loss_sum += loss.item();
      tape.backward(loss);
    }
    check_finite(loss_sum, step, "stage 1");
    optimizer.step();
    StepLog entry{step, loss_sum, loss_sum, 0.0, 0.0, optimizer.last_grad_norm()};
    log.push_back(entry);
    if (on_step) on_step(entry);
  }
  round_to_storage_precision(params);
  return log;
}

Stage1Metrics evaluate_stage1(const AnticipatrModel& model, std::span<const VideoSample> videos,
                              const Stage1Config& config) {
  ad::NoGradScope no_grad;
  const auto examples = stage1_dataset(videos, model.config(), config);
  const std::size_t num_classes = model.config().num_classes;
  Stage1Metrics m;
  m.examples = examples.size();
  if (examples.empty()) throw UsageError("no stage-1 examples in the evaluation set");
  std::vector<std::vector<double>> scores(num_classes);
  std::vector<std::vector<char>> truth(num_classes);
  std::size_t exact = 0;
  for (const auto& ex : examples) {
    const auto& encoder = model.segment_encoder();
    const Tensor probs =
        encoder.future_probs(encoder.encode(segment_features(find_video(videos, ex.segment.video_id), ex.segment)));
    m.loss += bce_multilabel(probs.data(), ex.target);
    bool all_right = true;
    for (std::size_t c = 0; c < num_classes; ++c) {
      scores[c].push_back(probs[c]);
      truth[c].push_back(ex.target[c] > 0.5 ? 1 : 0);
      if ((probs[c] >= 0.5) != (ex.target[c] > 0.5)) all_right = false;
    }
    if (all_right) ++exact;
  }
  m.loss /= static_cast<double>(examples.size());
  m.exact_match = static_cast<double>(exact) / static_cast<double>(examples.size());
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::unique_ptr<bool[]> pos(new bool[truth[c].size()]);
    for (std::size_t i = 0; i < truth[c].size(); ++i) pos[i] = truth[c][i] != 0;
    const double ap = average_precision(scores[c], std::span<const bool>(pos.get(), truth[c].size()));
    m.per_class_ap.push_back(ap);
    if (!std::isnan(ap)) {
      sum += ap;
      ++counted;
    }
  }
  m.mean_ap = counted == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(counted);
  return m;
}

namespace {

double draw_fraction(const std::vector<double>& choices, double lo, double hi, std::mt19937_64& rng) {
  if (!choices.empty()) {
    return choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
  }
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

Stage2Example draw_stage2_example(std::span<const VideoSample> videos, const Stage2Config& config,
                                  std::mt19937_64& rng) {
  if (videos.empty()) throw UsageError("no stage-2 training videos");
  Stage2Example ex;
  ex.video = std::uniform_int_distribution<std::size_t>(0, videos.size() - 1)(rng);
  const int length = videos[ex.video].length;
  if (length < 2) throw UsageError("stage-2 videos need at least two frames");
  const double beta_o = draw_fraction(config.observe_choices, config.observe_min, config.observe_max, rng);
  const double beta_a =
      draw_fraction(config.anticipate_choices, config.anticipate_min, config.anticipate_max, rng);
  ex.observed = std::clamp(static_cast<int>(std::lround(beta_o * length)), 1, length - 1);
  const int remaining = length - ex.observed;
  ex.anticipation = std::clamp(static_cast<int>(std::lround(beta_a * remaining)), 1, remaining);
  return ex;
}

PaddedGroundtruth normalized_groundtruth(const VideoSample& video, int observed, int anticipation,
                                         std::size_t num_slots, std::size_t num_classes) {
  std::vector<LabeledSpan> spans;
  const double t_o = observed;
  const double t_a = anticipation;
  for (const auto& inst : target_set(video, observed, anticipation)) {
    const Span s = inst.span();
    spans.push_back({inst.label, Span{(s.start - t_o) / t_a, (s.end - t_o) / t_a}});
  }
  return PaddedGroundtruth::pad(spans, num_slots, num_classes);
}

namespace {

Tensor sample_loss(const AnticipatrModel& model, const VideoSample& video, int observed,
                   int anticipation, const Stage2Config& config, const Dropout& dropout,
                   const Dropout& segment_dropout, LossBreakdown* breakdown) {
  const auto& mc = model.config();
  const auto obs = model.encode(video.observed(static_cast<std::size_t>(observed)), dropout, segment_dropout);
  const HeadOutput heads = model.anticipate(obs, static_cast<double>(anticipation), dropout);
  const auto gt = normalized_groundtruth(video, observed, anticipation, mc.num_queries, mc.num_classes);
  const PredictionSet unit = model.to_prediction_set(heads, 0.0, 1.0);
  const Correspondence gamma = match(config.matcher, gt, unit, config.loss);
  return anticipation_loss(gt, heads.log_probs, heads.unit_spans, gamma, config.loss, breakdown);
}

}  // namespace

double stage2_learning_rate(const Stage2Config& config, std::size_t step) {
  double lr = config.optimizer.lr;
  if (step < config.warmup_steps) {
    lr *= static_cast<double>(step + 1) / static_cast<double>(config.warmup_steps);
  }
  if (config.lr_decay_step > 0 && step >= config.lr_decay_step) lr *= 0.1;
  return lr;
}

std::vector<StepLog> train_stage2(AnticipatrModel& model, std::span<const VideoSample> videos,
                                  const Stage2Config& config, const StepCallback& on_step) {
  config.validate();
  const auto segment_params = model.segment_encoder().encoder_parameters();
  set_requires_grad(segment_params, config.finetune_segment_encoder);
  const auto params = model.stage2_parameters(config.finetune_segment_encoder);
  set_requires_grad(params, true);
  AdamW optimizer(params, config.optimizer);
  std::mt19937_64 rng(config.seed);
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
  const double p = model.config().dropout_p;

  std::vector<StepLog> log;
  for (std::size_t step = 0; step < config.steps; ++step) {
    optimizer.set_lr(stage2_learning_rate(config, step));
    optimizer.zero_grad();
    StepLog entry;
    entry.step = step;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const auto ex = draw_stage2_example(videos, config, rng);
      ad::Tape tape;
      ad::TapeScope scope(tape);
      const Dropout dropout(p, rng);
      const Dropout segment_dropout = config.finetune_segment_encoder ? Dropout(p, rng) : Dropout();
      LossBreakdown parts;
      const Tensor loss = ad::scale(sample_loss(model, videos[ex.video], ex.observed, ex.anticipation,
                                                config, dropout, segment_dropout, &parts),
                                    inv_batch);
      entry.loss += loss.item();
      entry.classification += parts.classification * inv_batch;
      entry.l1 += parts.l1 * inv_batch;
      entry.iou += parts.iou * inv_batch;
      tape.backward(loss);
    }
    check_finite(entry.loss, step, "stage 2");
    optimizer.step();
    entry.grad_norm = optimizer.last_grad_norm();
    log.push_back(entry);
    if (on_step) on_step(entry);
  }
  set_requires_grad(segment_params, true);
  round_to_storage_precision(params);
  return log;
}

LossBreakdown stage2_loss(const AnticipatrModel& model, const VideoSample& video, int observed,
                          int anticipation, const Stage2Config& config) {
  ad::NoGradScope no_grad;
  LossBreakdown parts;
  sample_loss(model, video, observed, anticipation, config, Dropout(), Dropout(), &parts);
  return parts;
}

void save_model(const std::filesystem::path& path, const AnticipatrModel& model) {
  save_checkpoint(path, model.parameters());
}

void load_model(const std::filesystem::path& path, const AnticipatrModel& model) {
  try {
    load_into(read_checkpoint(path), model.parameters());
  } catch (const ParseError& e) {
    throw UsageError(std::string("incompatible checkpoint: ") + e.what());
  }
}

void load_segment_encoder(const std::filesystem::path& path, const AnticipatrModel& model) {
  try {
    load_into(read_checkpoint(path), model.segment_encoder().parameters());
  } catch (const ParseError& e) {
    throw UsageError(std::string("incompatible checkpoint: ") + e.what());
  }
}

}  // namespace antq
