#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "antq/ops.hpp"
#include "antq/parameters.hpp"

namespace antq {

using ad::Tensor;

struct BlockConfig {
  std::size_t model_dim = 64;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 256;
  double dropout_p = 0.1;

  void validate() const;
  std::size_t head_dim() const { return model_dim / num_heads; }
};

/// Source of train-time dropout masks. A default-constructed context is
/// evaluation mode and never touches a random generator.
class Dropout {
 public:
  Dropout() = default;
  Dropout(double p, std::mt19937_64& rng) : p_(p), rng_(&rng) {}

  Tensor operator()(const Tensor& x) const;
  bool training() const { return rng_ != nullptr; }

 private:
  double p_ = 0.0;
  std::mt19937_64* rng_ = nullptr;
};

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Linear create(std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  static constexpr double kEps = 1e-5;

  static LayerNorm create(std::size_t dim);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct AttentionParams {
  std::size_t num_heads = 1;
  Linear query, key, value, output;

  static AttentionParams create(const BlockConfig& cfg, std::mt19937_64& rng);
  void collect(const std::string& prefix, ParameterList& out) const;
};

/// Scaled dot-product attention over `num_heads` slices of the projected
/// inputs, heads concatenated and output-projected. When `weights_out` is
/// given, receives one [L_q x L_k] attention matrix per head.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionParams& params,
                            std::vector<Tensor>* weights_out = nullptr);

struct FeedForward {
  Linear expand, contract;

  static FeedForward create(const BlockConfig& cfg, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const { return contract(ad::relu(expand(x))); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

/// Post-norm transformer encoder block: self-attention, then FFN, each
/// followed by residual addition and layernorm.
struct EncoderBlock {
  AttentionParams attention;
  LayerNorm norm1, norm2;
  FeedForward ffn;

  static EncoderBlock create(const BlockConfig& cfg, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const Dropout& dropout = {}) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

/// Anticipation decoder block. Sublayers run in a fixed cascade:
/// query self-attention, cross-attention over the segment-level memory,
/// cross-attention over the video-level memory, FFN.
struct DecoderBlock {
  AttentionParams self_attention;
  AttentionParams segment_attention;
  AttentionParams video_attention;
  LayerNorm norm_self, norm_segment, norm_video, norm_ffn;
  FeedForward ffn;

  static DecoderBlock create(const BlockConfig& cfg, std::mt19937_64& rng);
  /// `segment_memory` may be null, which removes the segment cross-attention
  /// sublayer (model variant without a segment encoder).
  Tensor forward(const Tensor& queries, const Tensor* segment_memory, const Tensor& video_memory,
                 const Dropout& dropout = {}) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

/// Sinusoidal encodings: pe[t, 2i] = sin(t / 10000^(2i/d)),
/// pe[t, 2i+1] = cos(t / 10000^(2i/d)) for t in [0, length). With
/// `from_end`, row r carries position length - 1 - r instead.
Tensor sinusoidal_pe(std::size_t length, std::size_t dim, bool from_end = false);

}  // namespace antq
