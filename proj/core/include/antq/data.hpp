#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "antq/model.hpp"
#include "antq/tensor.hpp"
#include "antq/types.hpp"

namespace antq {

/// Markov activity grammar over a subset of the global class set. All
/// per-class tables are indexed by position in `classes`.
struct ActivityGrammar {
  std::string name;
  std::vector<int> classes;
  std::vector<double> initial;                   // start distribution
  std::vector<std::vector<double>> transitions;  // row-stochastic
  std::vector<std::pair<int, int>> durations;    // [d_min, d_max] timesteps
  std::vector<std::vector<double>> prototypes;   // feature mean per class
  double noise_sigma = 0.0;

  void validate() const;
  std::size_t feature_dim() const { return prototypes.empty() ? 0 : prototypes.front().size(); }
  int min_duration() const;
};

struct VideoSample {
  std::string id;
  std::string activity;
  int length = 0;  // T
  std::size_t feature_dim = 0;
  std::vector<float> features;  // [T x d] row-major
  std::vector<ActionInstance> instances;

  Tensor feature_tensor() const;
  /// First `frames` rows as a [frames x d] tensor.
  Tensor observed(std::size_t frames) const;
  /// Label of frame t (1-based).
  int label_at(int frame) const;
  bool operator==(const VideoSample&) const = default;
};

struct Stage1Example {
  Segment segment;
  std::vector<double> target;  // |C| bits: class occurs after segment end
};

/// Markov walk emitting instances until `length_budget` frames are filled
/// (the last instance is truncated to fit); features are prototype plus
/// Gaussian noise, stored as f32. Deterministic in `seed`.
VideoSample sample_video(const ActivityGrammar& grammar, std::uint64_t seed, int length_budget);

/// One example per annotated instance; targets mark classes in frames
/// (end, T]. Instances with an empty future are skipped unless
/// `include_empty_future`.
std::vector<Stage1Example> stage1_examples(const VideoSample& video, std::size_t num_classes,
                                           bool include_empty_future = false);

/// Non-overlapping windows of length k as stage-1 segments (annotation-free
/// variant), with the same future-label targets.
std::vector<Stage1Example> sliding_window_examples(const VideoSample& video, std::size_t k,
                                                   std::size_t num_classes,
                                                   bool include_empty_future = false);

struct ObservationSplit {
  int observed = 0;   // T_o
  int remaining = 0;  // T - T_o

  /// round(beta_a / 100 * remaining), at least 1.
  int anticipation(double beta_a) const;
};

/// T_o = max(1, round(beta_o / 100 * T)); T_o == T is rejected.
ObservationSplit split_observed(int length, double beta_o);

/// Instances intersecting frames (T_o, T_o + T_a], clipped to that window.
std::vector<ActionInstance> target_set(const VideoSample& video, int observed, int anticipation);

/// Per-class instance counts.
std::vector<std::size_t> class_counts(const std::vector<VideoSample>& videos, std::size_t num_classes);

// JSON Lines dataset: one video object per line with fields id, activity,
// T, d, features (T arrays of d numbers), instances ([{c, ts, te}]).
std::string video_to_json_line(const VideoSample& video);
VideoSample video_from_json_line(const std::string& line);
void save_dataset(const std::filesystem::path& path, const std::vector<VideoSample>& videos);
/// Throws ParseError naming the offending line; never returns a partial set.
std::vector<VideoSample> load_dataset(const std::filesystem::path& path);
void save_class_names(const std::filesystem::path& path, const std::vector<std::string>& names);
std::vector<std::string> load_class_names(const std::filesystem::path& path);

struct ToyGrammarOptions {
  std::size_t num_activities = 4;
  std::size_t num_classes = 8;
  std::size_t feature_dim = 16;
  /// Probability of following the activity's canonical next action.
  double chain_fidelity = 0.98;
  /// Shared classes in each activity's cycle.
  std::size_t shared_per_activity = 2;
  int min_duration = 9;
  int max_duration = 11;
  double noise_sigma = 0.1;
  std::uint64_t seed = 7;
};

/// Activity a starts with its own class a and then cycles through
/// shared_per_activity shared classes (a rotation of the shared pool, so
/// neighbouring activities overlap); prototypes are shared.
std::vector<ActivityGrammar> make_toy_grammars(const ToyGrammarOptions& options);

struct DatasetSpec {
  std::size_t count = 0;
  int min_length = 50;
  int max_length = 70;
  std::uint64_t seed = 0;
  std::string prefix = "video";
};

/// Video i uses seed derived from (spec.seed, i); activity drawn uniformly.
std::vector<VideoSample> generate_dataset(const std::vector<ActivityGrammar>& grammars,
                                          const DatasetSpec& spec);

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace antq
