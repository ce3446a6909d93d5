#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "antq/data.hpp"
#include "antq/losses.hpp"
#include "antq/matching.hpp"
#include "antq/model.hpp"
#include "antq/optim.hpp"

namespace antq {

struct StepLog {
  std::size_t step = 0;
  double loss = 0.0;
  double classification = 0.0;
  double l1 = 0.0;
  double iou = 0.0;
  double grad_norm = 0.0;
};

using StepCallback = std::function<void(const StepLog&)>;

struct Stage1Config {
  std::size_t steps = 600;
  std::size_t batch_size = 8;
  AdamWConfig optimizer{.lr = 1e-3, .weight_decay = 1e-4, .max_grad_norm = 1.0};
  /// Draw segments from fixed windows of length k instead of annotations.
  bool sliding_window = false;
  bool include_empty_future = false;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Stage1Metrics {
  double loss = 0.0;
  std::vector<double> per_class_ap;  // NaN for classes never positive
  double mean_ap = 0.0;
  /// Fraction of examples whose thresholded (0.5) label vector is exact.
  double exact_match = 0.0;
  std::size_t examples = 0;
};

std::vector<Stage1Example> stage1_dataset(std::span<const VideoSample> videos, const ModelConfig& model,
                                          const Stage1Config& config);

/// Trains the segment encoder and its future-label head with BCE. Trained
/// weights end rounded to checkpoint (f32) precision, as in train_stage2.
std::vector<StepLog> train_stage1(AnticipatrModel& model, std::span<const VideoSample> videos,
                                  const Stage1Config& config, const StepCallback& on_step = {});

/// Evaluation-mode loss and metrics of the stage-1 head.
Stage1Metrics evaluate_stage1(const AnticipatrModel& model, std::span<const VideoSample> videos,
                              const Stage1Config& config);

struct Stage2Config {
  std::size_t steps = 1500;
  std::size_t batch_size = 4;
  AdamWConfig optimizer{.lr = 5e-4, .weight_decay = 1e-4, .max_grad_norm = 1.0};
  /// Learning rate is multiplied by 0.1 from this step on; 0 disables.
  std::size_t lr_decay_step = 0;
  /// Linear ramp from lr / warmup_steps up to lr over the first steps.
  std::size_t warmup_steps = 0;
  /// Observation fraction of T drawn uniformly from [min, max].
  double observe_min = 0.1;
  double observe_max = 0.6;
  /// Anticipation fraction of the remaining duration drawn from [min, max].
  double anticipate_min = 0.1;
  double anticipate_max = 1.0;
  /// When non-empty, fractions are drawn uniformly from these lists instead
  /// of the [min, max] ranges.
  std::vector<double> observe_choices;
  std::vector<double> anticipate_choices;
  LossConfig loss;
  MatcherKind matcher = MatcherKind::Greedy;
  bool finetune_segment_encoder = false;
  std::uint64_t seed = 2;

  void validate() const;
};

/// One stage-2 training sample.
struct Stage2Example {
  std::size_t video = 0;
  int observed = 0;
  int anticipation = 0;
};

Stage2Example draw_stage2_example(std::span<const VideoSample> videos, const Stage2Config& config,
                                  std::mt19937_64& rng);

/// Groundtruth of the window (T_o, T_o + T_a] in units of T_a measured from T_o.
PaddedGroundtruth normalized_groundtruth(const VideoSample& video, int observed, int anticipation,
                                         std::size_t num_slots, std::size_t num_classes);

double stage2_learning_rate(const Stage2Config& config, std::size_t step);

/// Trains the video encoder, queries, decoder and heads with the set loss.
/// The segment encoder stays frozen (in evaluation mode, excluded from the
/// optimizer) unless fine-tuning is requested.
std::vector<StepLog> train_stage2(AnticipatrModel& model, std::span<const VideoSample> videos,
                                  const Stage2Config& config, const StepCallback& on_step = {});

/// Evaluation-mode set loss of one (video, T_o, T_a) sample.
LossBreakdown stage2_loss(const AnticipatrModel& model, const VideoSample& video, int observed,
                          int anticipation, const Stage2Config& config);

void save_model(const std::filesystem::path& path, const AnticipatrModel& model);
/// Fills every model parameter from the file (UsageError when missing).
void load_model(const std::filesystem::path& path, const AnticipatrModel& model);
/// Fills only the segment encoder and its head.
void load_segment_encoder(const std::filesystem::path& path, const AnticipatrModel& model);

}  // namespace antq
