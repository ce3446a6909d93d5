#include "antq/model.hpp"

#include <algorithm>
#include <cmath>

namespace antq {

void ModelConfig::validate() const {
  if (num_classes == 0) throw ConfigError("num_classes must be positive");
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (num_queries == 0) throw ConfigError("num_queries (N_a) must be >= 1");
  if (window_k == 0) throw ConfigError("window_k must be >= 1");
  if (!(horizon_max >= 1.0)) throw ConfigError("horizon_max must be >= 1");
  if (segment_layers == 0 || video_layers == 0 || decoder_layers == 0) {
    throw ConfigError("layer counts must be positive");
  }
  if (model_dim % 2 != 0) throw ConfigError("model_dim must be even for sinusoidal encodings");
  block().validate();
}

BlockConfig ModelConfig::block() const {
  return BlockConfig{model_dim, num_heads, ffn_dim == 0 ? 4 * model_dim : ffn_dim, dropout_p};
}

ModelConfig ModelConfig::breakfast_scale() {
  ModelConfig c;
  c.num_classes = 48;
  c.feature_dim = 2048;
  c.model_dim = 2048;
  c.segment_layers = 3;
  c.video_layers = 3;
  c.decoder_layers = 3;
  c.num_heads = 8;
  c.num_queries = 150;
  c.window_k = 16;
  c.dropout_p = 0.1;
  return c;
}

Tensor segment_rows(const Tensor& features, const Segment& segment) {
  if (segment.end < segment.start) throw UsageError("empty segment " + segment.video_id);
  if (segment.start < 1 || static_cast<std::size_t>(segment.end) > features.dim(0)) {
    throw UsageError("segment [" + std::to_string(segment.start) + ", " +
                     std::to_string(segment.end) + "] outside video of length " +
                     std::to_string(features.dim(0)));
  }
  return ad::slice(features, 0, static_cast<std::size_t>(segment.start - 1),
                   static_cast<std::size_t>(segment.end));
}

SegmentEncoder::SegmentEncoder(const ModelConfig& config, std::mt19937_64& rng) {
  const auto block = config.block();
  input_ = Linear::create(config.feature_dim, config.model_dim, rng);
  for (std::size_t i = 0; i < config.segment_layers; ++i) {
    blocks_.push_back(EncoderBlock::create(block, rng));
  }
  head_ = Linear::create(config.model_dim, config.num_classes, rng);
}

Tensor SegmentEncoder::encode(const Tensor& segment, const Dropout& dropout) const {
  if (segment.rank() != 2 || segment.dim(0) == 0) throw UsageError("segment_encode on an empty segment");
  const std::size_t length = segment.dim(0);
  Tensor x = ad::add(input_(segment), sinusoidal_pe(length, input_.out_features()));
  x = dropout(x);
  for (const auto& b : blocks_) x = b.forward(x, dropout);
  return x;
}

Tensor SegmentEncoder::future_probs(const Tensor& embedding) const {
  if (embedding.rank() != 2 || embedding.dim(0) == 0) throw UsageError("stage-1 head on empty input");
  return ad::reshape(ad::sigmoid(head_(ad::mean(embedding, 0, true))), {head_.out_features()});
}

ParameterList SegmentEncoder::encoder_parameters() const {
  ParameterList out;
  input_.collect("segment.input", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect("segment.block" + std::to_string(i), out);
  }
  return out;
}

ParameterList SegmentEncoder::head_parameters() const {
  ParameterList out;
  head_.collect("segment.head", out);
  return out;
}

ParameterList SegmentEncoder::parameters() const {
  auto out = encoder_parameters();
  auto head = head_parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

AnticipatrModel::AnticipatrModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), decoder_calls_(std::make_unique<std::atomic<std::size_t>>(0)) {
  config_.validate();
  const auto block = config_.block();
  const auto d = config_.model_dim;
  // Independent streams so the segment encoder does not depend on the
  // stage-2 layer counts (and vice versa).
  std::mt19937_64 seg_rng(seed);
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  segment_ = SegmentEncoder(config_, seg_rng);
  video_input_ = Linear::create(config_.feature_dim, d, rng);
  for (std::size_t i = 0; i < config_.video_layers; ++i) {
    video_blocks_.push_back(EncoderBlock::create(block, rng));
  }
  queries_ = xavier_uniform(config_.num_queries, d, rng);
  conditioning_ = Linear::create(d + 1, d, rng);
  for (std::size_t i = 0; i < config_.decoder_layers; ++i) {
    decoder_.push_back(DecoderBlock::create(block, rng));
  }
  class_head_ = Linear::create(d, config_.num_classes + 1, rng);
  time_hidden_ = Linear::create(d, d, rng);
  time_out_ = Linear::create(d, 2, rng);
}

Tensor AnticipatrModel::video_encode(const Tensor& observed, const Dropout& dropout) const {
  if (observed.rank() != 2 || observed.dim(0) == 0) throw UsageError("video_encode on an empty video");
  if (observed.dim(1) != config_.feature_dim) {
    throw DimensionError("observed features have width " + std::to_string(observed.dim(1)) +
                         ", expected " + std::to_string(config_.feature_dim));
  }
  Tensor x = ad::add(video_input_(observed), sinusoidal_pe(observed.dim(0), config_.model_dim, config_.positions_from_end));
  x = dropout(x);
  for (const auto& b : video_blocks_) x = b.forward(x, dropout);
  return x;
}

Tensor AnticipatrModel::window_segments(const Tensor& observed, const Dropout& dropout) const {
  if (observed.rank() != 2 || observed.dim(0) == 0) throw UsageError("window_segments on an empty video");
  const std::size_t length = observed.dim(0);
  const std::size_t k = config_.window_k;
  std::vector<Tensor> parts;
  for (std::size_t start = 0; start < length; start += k) {
    const std::size_t end = std::min(length, start + k);
    parts.push_back(segment_.encode(ad::slice(observed, 0, start, end), dropout));
  }
  return parts.size() == 1 ? parts.front() : ad::concat(parts, 0);
}

Tensor AnticipatrModel::condition_queries(double anticipation) const {
  if (!(anticipation > 0.0)) throw UsageError("anticipation duration must be positive");
  const std::size_t n = config_.num_queries;
  const Tensor duration = Tensor::full({n, 1}, anticipation / config_.horizon_max);
  const Tensor parts[] = {queries_, duration};
  return conditioning_(ad::concat(parts, 1));
}

Tensor AnticipatrModel::decode(const Tensor& queries, const Tensor& video_memory,
                               const Tensor* segment_memory, const Dropout& dropout) const {
  decoder_calls_->fetch_add(1, std::memory_order_relaxed);
  Tensor y = queries;
  for (const auto& b : decoder_) y = b.forward(y, segment_memory, video_memory, dropout);
  return y;
}

HeadOutput AnticipatrModel::output_heads(const Tensor& latent) const {
  HeadOutput out;
  out.logits = class_head_(latent);
  out.log_probs = ad::log_softmax(out.logits, 1);
  const Tensor raw = ad::sigmoid(time_out_(ad::relu(time_hidden_(latent))));
  const Tensor a = ad::slice(raw, 1, 0, 1);
  const Tensor b = ad::slice(raw, 1, 1, 2);
  const Tensor ordered[] = {ad::minimum(a, b), ad::maximum(a, b)};
  out.unit_spans = ad::concat(ordered, 1);
  return out;
}

EncodedObservation AnticipatrModel::encode(const Tensor& observed, const Dropout& dropout,
                                           const Dropout& segment_dropout) const {
  EncodedObservation obs;
  obs.observed_length = observed.dim(0);
  obs.video_memory = video_encode(observed, dropout);
  if (config_.use_segment_encoder) obs.segment_memory = window_segments(observed, segment_dropout);
  return obs;
}

HeadOutput AnticipatrModel::anticipate(const EncodedObservation& obs, double anticipation,
                                       const Dropout& dropout) const {
  const Tensor q = condition_queries(anticipation);
  const Tensor* seg = obs.segment_memory ? &*obs.segment_memory : nullptr;
  return output_heads(decode(q, obs.video_memory, seg, dropout));
}

PredictionSet AnticipatrModel::to_prediction_set(const HeadOutput& heads, double observed,
                                                 double anticipation) const {
  PredictionSet set;
  set.num_classes = config_.num_classes;
  const std::size_t n = heads.logits.dim(0);
  const std::size_t width = config_.num_classes + 1;
  set.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& e = set.entries[i];
    e.class_probs.resize(width);
    double z = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      e.class_probs[c] = std::exp(heads.log_probs.at(i, c));
      z += e.class_probs[c];
    }
    for (auto& p : e.class_probs) p /= z;
    e.span.start = observed + heads.unit_spans.at(i, 0) * anticipation;
    e.span.end = observed + heads.unit_spans.at(i, 1) * anticipation;
  }
  return set;
}

PredictionSet AnticipatrModel::predict(const Tensor& observed, double anticipation) const {
  ad::NoGradScope no_grad;
  return predict(encode(observed), anticipation);
}

PredictionSet AnticipatrModel::predict(const EncodedObservation& obs, double anticipation) const {
  ad::NoGradScope no_grad;
  return to_prediction_set(anticipate(obs, anticipation), static_cast<double>(obs.observed_length),
                           anticipation);
}

std::vector<ScoredInstance> AnticipatrModel::predict_set(const Tensor& observed, int anticipation,
                                                         double threshold) const {
  const auto set = predict(observed, static_cast<double>(anticipation));
  const int t_o = static_cast<int>(observed.dim(0));
  std::vector<ScoredInstance> out;
  for (const auto& e : set.entries) {
    const std::size_t c = e.argmax();
    if (c == set.null_class() || e.class_probs[c] < threshold) continue;
    out.push_back(to_frames(static_cast<int>(c), e.class_probs[c], e.span, t_o, anticipation));
  }
  return out;
}

ParameterList AnticipatrModel::parameters() const {
  auto out = segment_.parameters();
  auto rest = stage2_parameters(false);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

ParameterList AnticipatrModel::stage2_parameters(bool finetune_segment_encoder) const {
  ParameterList out;
  if (finetune_segment_encoder) out = segment_.encoder_parameters();
  video_input_.collect("video.input", out);
  for (std::size_t i = 0; i < video_blocks_.size(); ++i) {
    video_blocks_[i].collect("video.block" + std::to_string(i), out);
  }
  out.push_back({"queries", queries_});
  conditioning_.collect("conditioning", out);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    decoder_[i].collect("decoder.block" + std::to_string(i), out);
  }
  class_head_.collect("class_head", out);
  time_hidden_.collect("time_head.hidden", out);
  time_out_.collect("time_head.out", out);
  return out;
}

ScoredInstance to_frames(int label, double score, const Span& span, int observed, int anticipation) {
  const int lo = observed + 1;
  const int hi = observed + anticipation;
  const int start = std::clamp(static_cast<int>(std::lround(span.start)) + 1, lo, hi);
  const int end = std::clamp(static_cast<int>(std::lround(span.end)), start, hi);
  return ScoredInstance{label, score, start, end};
}

}  // namespace antq
