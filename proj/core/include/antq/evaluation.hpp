#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "antq/data.hpp"
#include "antq/model.hpp"
#include "antq/types.hpp"

namespace antq {

inline constexpr int kNoLabel = -1;

/// Entry t holds the label of frame T_o + 1 + t, or kNoLabel.
using Timeline = std::vector<int>;

/// Paints each prediction over its frames; where predictions overlap the
/// higher score wins, then the earlier start, then the lower class.
/// Throws UsageError for a span outside (T_o, T_o + T_a].
Timeline build_timeline(std::span<const ScoredInstance> preds, int observed, int anticipation);

/// Timeline of annotated instances intersecting the window.
Timeline groundtruth_timeline(std::span<const ActionInstance> instances, int observed,
                              int anticipation);

enum class MocPooling {
  Global,    // pool timesteps of all videos per class
  PerVideo,  // MoC per video, then mean over videos
};

/// Mean over groundtruth classes of per-class timestep accuracy. Throws
/// UsageError on length mismatch or when no groundtruth timestep exists.
double moc_accuracy(std::span<const Timeline> predicted, std::span<const Timeline> groundtruth,
                    std::size_t num_classes, MocPooling pooling = MocPooling::Global);

/// Class -> highest score among instances predicting it.
using LabelScores = std::map<int, double>;

LabelScores future_label_set(std::span<const ScoredInstance> preds);
/// Argmax classes of non-null queries with their probabilities.
LabelScores future_label_set(const PredictionSet& preds);

/// Mean of precision at the rank of each positive. Among equal scores,
/// negatives are ranked first. NaN when there are no positives.
double average_precision(std::span<const double> scores, std::span<const bool> positive);

struct MapResult {
  double all = 0.0;
  double freq = 0.0;  // classes with > 100 training instances
  double rare = 0.0;  // classes with < 10 training instances
  std::vector<double> per_class;  // NaN for classes without positives
};

/// Per-class AP over videos (a class missing from a video's label set
/// scores 0), averaged over ALL / FREQ / RARE subsets. Classes without
/// positives are excluded; an empty subset yields NaN.
MapResult mean_average_precision(std::span<const LabelScores> scores,
                                 std::span<const std::set<int>> groundtruth,
                                 std::size_t num_classes,
                                 std::span<const std::size_t> train_counts);

inline constexpr std::size_t kFrequentThreshold = 100;
inline constexpr std::size_t kRareThreshold = 10;

/// Predictions for one video observed for `observed` frames, one list per
/// requested horizon (frames).
using Predictor = std::function<std::vector<std::vector<ScoredInstance>>(
    const VideoSample& video, int observed, std::span<const int> horizons)>;

/// Encodes the observation once and issues one decoder pass per horizon.
Predictor model_predictor(const AnticipatrModel& model, double threshold = 0.0);
/// Returns the annotated future instances with score 1.
Predictor oracle_predictor();

struct ProtocolConfig {
  std::vector<double> beta_o = {20, 30};
  std::vector<double> beta_a = {10, 20, 30, 50};
  std::vector<double> alpha_o = {25, 50, 75};
  MocPooling pooling = MocPooling::Global;
  std::size_t threads = 1;

  void validate() const;
};

struct MocCell {
  double beta_o = 0.0;
  double beta_a = 0.0;
  double moc = 0.0;
};

struct MapCell {
  double alpha_o = 0.0;
  MapResult result;
};

struct EvaluationReport {
  std::vector<MocCell> moc;  // row-major over beta_o x beta_a
  std::vector<MapCell> map;
  std::size_t num_videos = 0;

  double moc_at(double beta_o, double beta_a) const;
  double mean_moc() const;
  /// Mean over alpha_o cells of mAP over all classes.
  double mean_map() const;
};

EvaluationReport evaluate(std::span<const VideoSample> videos, const Predictor& predictor,
                          std::size_t num_classes, std::span<const std::size_t> train_counts,
                          const ProtocolConfig& config);

/// Rows beta_o, columns beta_a.
std::string moc_csv(const EvaluationReport& report);
/// Rows alpha_o plus a mean row; columns all, freq, rare.
std::string map_csv(const EvaluationReport& report);
/// Stable-ordered JSON summary; NaN is written as null.
std::string report_json(const EvaluationReport& report);

}  // namespace antq
