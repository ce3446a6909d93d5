#include "antq/transformer.hpp"

#include <cmath>

namespace antq {

void BlockConfig::validate() const {
  if (model_dim == 0 || num_heads == 0 || ffn_dim == 0) {
    throw ConfigError("block dimensions must be positive");
  }
  if (model_dim % num_heads != 0) {
    throw ConfigError("model_dim " + std::to_string(model_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("dropout_p must be in [0, 1)");
}

Tensor Dropout::operator()(const Tensor& x) const {
  if (rng_ == nullptr || p_ <= 0.0) return x;
  return ad::dropout(x, p_, *rng_);
}

Linear Linear::create(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return Linear{xavier_uniform(in, out, rng), Tensor::zeros({out}, true)};
}

Tensor Linear::operator()(const Tensor& x) const {
  return ad::add_bias(ad::matmul(x, weight), bias);
}

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm LayerNorm::create(std::size_t dim) {
  return LayerNorm{Tensor(ad::Shape{dim}, std::vector<double>(dim, 1.0), true),
                   Tensor::zeros({dim}, true)};
}

Tensor LayerNorm::operator()(const Tensor& x) const { return ad::layernorm(x, gain, bias, kEps); }

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

AttentionParams AttentionParams::create(const BlockConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const auto d = cfg.model_dim;
  AttentionParams p;
  p.num_heads = cfg.num_heads;
  p.query = Linear::create(d, d, rng);
  p.key = Linear::create(d, d, rng);
  p.value = Linear::create(d, d, rng);
  p.output = Linear::create(d, d, rng);
  return p;
}

void AttentionParams::collect(const std::string& prefix, ParameterList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionParams& params, std::vector<Tensor>* weights_out) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw DimensionError("attention inputs must be rank-2 sequences");
  }
  if (k.dim(0) == 0 || v.dim(0) == 0) throw UsageError("attention over an empty key/value sequence");
  if (k.dim(0) != v.dim(0)) throw DimensionError("attention key/value lengths differ");
  const std::size_t d = params.query.in_features();
  if (q.dim(1) != d || k.dim(1) != d || v.dim(1) != d) {
    throw DimensionError("attention input width does not match model_dim " + std::to_string(d));
  }
  const std::size_t heads = params.num_heads;
  const std::size_t hd = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  const Tensor Q = params.query(q);
  const Tensor K = params.key(k);
  const Tensor V = params.value(v);
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  if (weights_out) weights_out->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = ad::slice(Q, 1, h * hd, (h + 1) * hd);
    const Tensor kh = ad::slice(K, 1, h * hd, (h + 1) * hd);
    const Tensor vh = ad::slice(V, 1, h * hd, (h + 1) * hd);
    const Tensor weights = ad::softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), scale), 1);
    if (weights_out) weights_out->push_back(weights);
    head_outputs.push_back(ad::matmul(weights, vh));
  }
  const Tensor joined = heads == 1 ? head_outputs.front() : ad::concat(head_outputs, 1);
  return params.output(joined);
}

FeedForward FeedForward::create(const BlockConfig& cfg, std::mt19937_64& rng) {
  return FeedForward{Linear::create(cfg.model_dim, cfg.ffn_dim, rng),
                     Linear::create(cfg.ffn_dim, cfg.model_dim, rng)};
}

void FeedForward::collect(const std::string& prefix, ParameterList& out) const {
  expand.collect(prefix + ".expand", out);
  contract.collect(prefix + ".contract", out);
}

EncoderBlock EncoderBlock::create(const BlockConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  return EncoderBlock{AttentionParams::create(cfg, rng), LayerNorm::create(cfg.model_dim),
                      LayerNorm::create(cfg.model_dim), FeedForward::create(cfg, rng)};
}

Tensor EncoderBlock::forward(const Tensor& x, const Dropout& dropout) const {
  Tensor h = norm1(ad::add(x, dropout(multi_head_attention(x, x, x, attention))));
  return norm2(ad::add(h, dropout(ffn(h))));
}

void EncoderBlock::collect(const std::string& prefix, ParameterList& out) const {
  attention.collect(prefix + ".attn", out);
  norm1.collect(prefix + ".norm1", out);
  norm2.collect(prefix + ".norm2", out);
  ffn.collect(prefix + ".ffn", out);
}

DecoderBlock DecoderBlock::create(const BlockConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const auto d = cfg.model_dim;
  DecoderBlock b{AttentionParams::create(cfg, rng),
                 AttentionParams::create(cfg, rng),
                 AttentionParams::create(cfg, rng),
                 LayerNorm::create(d),
                 LayerNorm::create(d),
                 LayerNorm::create(d),
                 LayerNorm::create(d),
                 FeedForward::create(cfg, rng)};
  return b;
}

Tensor DecoderBlock::forward(const Tensor& queries, const Tensor* segment_memory,
                             const Tensor& video_memory, const Dropout& dropout) const {
  if (video_memory.rank() != 2 || video_memory.dim(0) == 0) {
    throw UsageError("decoder needs a non-empty video memory");
  }
  if (segment_memory && segment_memory->dim(0) != video_memory.dim(0)) {
    throw DimensionError("segment and video memories must have equal length");
  }
  Tensor x = norm_self(
      ad::add(queries, dropout(multi_head_attention(queries, queries, queries, self_attention))));
  if (segment_memory) {
    x = norm_segment(ad::add(
        x, dropout(multi_head_attention(x, *segment_memory, *segment_memory, segment_attention))));
  }
  x = norm_video(
      ad::add(x, dropout(multi_head_attention(x, video_memory, video_memory, video_attention))));
  return norm_ffn(ad::add(x, dropout(ffn(x))));
}

void DecoderBlock::collect(const std::string& prefix, ParameterList& out) const {
  self_attention.collect(prefix + ".self_attn", out);
  segment_attention.collect(prefix + ".segment_attn", out);
  video_attention.collect(prefix + ".video_attn", out);
  norm_self.collect(prefix + ".norm_self", out);
  norm_segment.collect(prefix + ".norm_segment", out);
  norm_video.collect(prefix + ".norm_video", out);
  norm_ffn.collect(prefix + ".norm_ffn", out);
  ffn.collect(prefix + ".ffn", out);
}

Tensor sinusoidal_pe(std::size_t length, std::size_t dim, bool from_end) {
  if (dim == 0 || dim % 2 != 0) {
    throw ConfigError("sinusoidal positional encoding needs an even width, got " +
                      std::to_string(dim));
  }
  std::vector<double> pe(length * dim);
  for (std::size_t t = 0; t < length; ++t) {
    const double position = static_cast<double>(from_end ? length - 1 - t : t);
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double freq = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      const double angle = position / freq;
      pe[t * dim + 2 * i] = std::sin(angle);
      pe[t * dim + 2 * i + 1] = std::cos(angle);
    }
  }
  return Tensor({length, dim}, std::move(pe));
}

}  // namespace antq
