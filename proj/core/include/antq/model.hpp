#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "antq/transformer.hpp"
#include "antq/types.hpp"

namespace antq {

struct ModelConfig {
  std::size_t num_classes = 8;
  std::size_t feature_dim = 16;
  std::size_t model_dim = 64;
  std::size_t segment_layers = 2;
  std::size_t video_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 0;  // 0 means 4 * model_dim
  std::size_t num_queries = 10;
  std::size_t window_k = 8;
  /// Normalization horizon for the anticipation-duration input (timesteps).
  double horizon_max = 100.0;
  double dropout_p = 0.1;
  /// Video-encoder positions count back from the last observed frame, so
  /// the most recent frame always sits at position 0.
  bool positions_from_end = true;
  /// false drops the segment path entirely (decoder skips segment attention).
  bool use_segment_encoder = true;

  void validate() const;
  BlockConfig block() const;

  /// Width/depth/head settings of the published Breakfast configuration.
  static ModelConfig breakfast_scale();
};

/// Contiguous frame range of one video, 1-based inclusive.
struct Segment {
  std::string video_id;
  int start = 1;
  int end = 1;

  std::size_t length() const { return static_cast<std::size_t>(end - start + 1); }
};

/// Rows [start-1, end) of a [T x d_in] feature matrix.
Tensor segment_rows(const Tensor& features, const Segment& segment);

/// Input projection plus a stack of encoder blocks, with positional
/// encodings indexed from the start of the segment, and the stage-1
/// future-label head.
class SegmentEncoder {
 public:
  SegmentEncoder() = default;
  SegmentEncoder(const ModelConfig& config, std::mt19937_64& rng);

  /// [L x d_in] -> [L x d]
  Tensor encode(const Tensor& segment, const Dropout& dropout = {}) const;
  /// Time-average, linear head F, sigmoid: [L x d] -> [|C|] probabilities.
  Tensor future_probs(const Tensor& embedding) const;

  ParameterList encoder_parameters() const;
  ParameterList head_parameters() const;
  ParameterList parameters() const;

  Linear& head() { return head_; }

 private:
  Linear input_;
  std::vector<EncoderBlock> blocks_;
  Linear head_;
};

/// Encoder outputs for one observed video, reusable across horizons.
struct EncodedObservation {
  Tensor video_memory;              // h_v, [T_o x d]
  std::optional<Tensor> segment_memory;  // h_s, [T_o x d]; empty without segment encoder
  std::size_t observed_length = 0;
};

struct HeadOutput {
  Tensor logits;      // [N_a x (|C|+1)]
  Tensor log_probs;   // log-softmax of logits
  Tensor unit_spans;  // [N_a x 2] (u_s <= u_e), fractions of the anticipation window
};

class AnticipatrModel {
 public:
  AnticipatrModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  SegmentEncoder& segment_encoder() { return segment_; }
  const SegmentEncoder& segment_encoder() const { return segment_; }

  Tensor video_encode(const Tensor& observed, const Dropout& dropout = {}) const;
  /// Non-overlapping windows of length k (last one shortened), each encoded
  /// by the segment encoder, concatenated in time order.
  Tensor window_segments(const Tensor& observed, const Dropout& dropout = {}) const;
  Tensor condition_queries(double anticipation) const;
  Tensor decode(const Tensor& queries, const Tensor& video_memory, const Tensor* segment_memory,
                const Dropout& dropout = {}) const;
  HeadOutput output_heads(const Tensor& latent) const;

  EncodedObservation encode(const Tensor& observed, const Dropout& dropout = {},
                            const Dropout& segment_dropout = {}) const;
  HeadOutput anticipate(const EncodedObservation& obs, double anticipation,
                        const Dropout& dropout = {}) const;

  /// Maps head outputs to absolute times t = T_o + u * T_a.
  PredictionSet to_prediction_set(const HeadOutput& heads, double observed, double anticipation) const;
  /// Evaluation-mode forward pass.
  PredictionSet predict(const Tensor& observed, double anticipation) const;
  PredictionSet predict(const EncodedObservation& obs, double anticipation) const;
  /// Non-null predictions whose class probability is >= threshold, mapped to
  /// frames T_o+1 .. T_o+T_a.
  std::vector<ScoredInstance> predict_set(const Tensor& observed, int anticipation,
                                          double threshold = 0.0) const;

  ParameterList parameters() const;
  /// Everything trained in stage 2; includes the segment encoder only when
  /// it is being fine-tuned.
  ParameterList stage2_parameters(bool finetune_segment_encoder) const;

  std::size_t decoder_calls() const { return decoder_calls_->load(); }

  Tensor& queries() { return queries_; }
  Linear& conditioning() { return conditioning_; }
  std::vector<DecoderBlock>& decoder_blocks() { return decoder_; }

 private:
  ModelConfig config_;
  SegmentEncoder segment_;
  Linear video_input_;
  std::vector<EncoderBlock> video_blocks_;
  Tensor queries_;  // q_0, [N_a x d]
  Linear conditioning_;  // [d+1 -> d], shared across queries
  std::vector<DecoderBlock> decoder_;
  Linear class_head_;
  Linear time_hidden_;
  Linear time_out_;
  std::unique_ptr<std::atomic<std::size_t>> decoder_calls_;
};

/// Frame mapping used when reporting predictions: start = round(t_s) + 1,
/// end = max(start, round(t_e)), both clamped into [T_o + 1, T_o + T_a].
ScoredInstance to_frames(int label, double score, const Span& span, int observed, int anticipation);

}  // namespace antq
