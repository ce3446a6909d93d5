#include "antq/losses.hpp"

#include <algorithm>
#include <cmath>

namespace antq {

namespace {
constexpr double kBceClamp = 1e-7;
constexpr double kMinProb = 1e-300;
}  // namespace

void LossConfig::validate() const {
  for (double v : {lambda_l1, lambda_iou, null_weight}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and >= 0");
  }
}

PaddedGroundtruth PaddedGroundtruth::pad(std::span<const LabeledSpan> instances,
                                         std::size_t num_slots, std::size_t num_classes) {
  if (instances.size() > num_slots) {
    throw ConfigError("groundtruth set of size " + std::to_string(instances.size()) +
                      " exceeds the query count " + std::to_string(num_slots));
  }
  PaddedGroundtruth gt;
  gt.num_classes = num_classes;
  gt.num_real = instances.size();
  gt.labels.assign(num_slots, static_cast<int>(num_classes));
  gt.spans.assign(num_slots, Span{});
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (inst.label < 0 || static_cast<std::size_t>(inst.label) >= num_classes) {
      throw UsageError("groundtruth label out of range");
    }
    if (inst.span.end < inst.span.start) throw UsageError("groundtruth span with end < start");
    gt.labels[i] = inst.label;
    gt.spans[i] = inst.span;
  }
  return gt;
}

bool Correspondence::is_bijection() const {
  std::vector<bool> seen(gt_to_pred.size(), false);
  for (auto j : gt_to_pred) {
    if (j >= seen.size() || seen[j]) return false;
    seen[j] = true;
  }
  return true;
}

Tensor bce_multilabel(const Tensor& probs, std::span<const double> target) {
  if (probs.size() != target.size()) {
    throw DimensionError("bce: " + std::to_string(probs.size()) + " predictions vs " +
                         std::to_string(target.size()) + " targets");
  }
  const std::size_t n = probs.size();
  const Tensor p = ad::reshape(ad::clamp(probs, kBceClamp, 1.0 - kBceClamp), {n});
  const Tensor t = Tensor::vector(std::vector<double>(target.begin(), target.end()));
  std::vector<double> one_minus(n);
  for (std::size_t i = 0; i < n; ++i) one_minus[i] = 1.0 - target[i];
  const Tensor tc = Tensor::vector(std::move(one_minus));
  // log(1 - p) = log(-(p - 1))
  const Tensor log_q = ad::log(ad::add_scalar(ad::scale(p, -1.0), 1.0));
  const Tensor per_class = ad::add(ad::mul(t, ad::log(p)), ad::mul(tc, log_q));
  return ad::scale(ad::sum(per_class), -1.0 / static_cast<double>(n));
}

double bce_multilabel(std::span<const double> probs, std::span<const double> target) {
  ad::NoGradScope no_grad;
  return bce_multilabel(Tensor::vector(std::vector<double>(probs.begin(), probs.end())), target)
      .item();
}

double iou_loss(const Span& a, const Span& b) {
  if (a.end < a.start || b.end < b.start) throw UsageError("iou_loss: span with end < start");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  if (!(uni > 0.0)) return a == b ? 0.0 : 1.0;
  return 1.0 - inter / uni;
}

Tensor anticipation_loss(const PaddedGroundtruth& gt, const Tensor& log_probs, const Tensor& spans,
                         const Correspondence& gamma, const LossConfig& config,
                         LossBreakdown* breakdown) {
  const std::size_t slots = gt.size();
  const std::size_t width = gt.num_classes + 1;
  if (gamma.size() != slots || !gamma.is_bijection()) {
    throw UsageError("correspondence is not a bijection over the padded groundtruth");
  }
  if (log_probs.rank() != 2 || log_probs.dim(0) != slots || log_probs.dim(1) != width) {
    throw DimensionError("log_probs must be [N_a x (|C|+1)], got " + ad::to_string(log_probs.shape()));
  }
  if (spans.rank() != 2 || spans.dim(0) != slots || spans.dim(1) != 2) {
    throw DimensionError("spans must be [N_a x 2], got " + ad::to_string(spans.shape()));
  }

  std::vector<std::size_t> picks(slots);
  std::vector<double> weights(slots);
  for (std::size_t i = 0; i < slots; ++i) {
    picks[i] = gamma.gt_to_pred[i] * width + static_cast<std::size_t>(gt.labels[i]);
    weights[i] = gt.is_null(i) ? -config.null_weight : -1.0;
  }
  const Tensor ce = ad::sum(ad::mul(ad::gather(log_probs, picks), Tensor::vector(weights)));
  Tensor total = ce;

  double l1_value = 0.0, iou_value = 0.0;
  const std::size_t real = gt.num_real;
  if (real > 0) {
    std::vector<std::size_t> span_picks;
    std::vector<double> target;
    for (std::size_t i = 0; i < real; ++i) {
      const std::size_t j = gamma.gt_to_pred[i];
      span_picks.push_back(2 * j);
      span_picks.push_back(2 * j + 1);
      target.push_back(gt.spans[i].start);
      target.push_back(gt.spans[i].end);
    }
    const Tensor matched = ad::reshape(ad::gather(spans, span_picks), {real, 2});
    const Tensor truth = Tensor::matrix(real, 2, std::move(target));
    const Tensor l1 = ad::sum(ad::abs(ad::sub(matched, truth)));
    // sum_i (1 - iou_i) = real - sum_i iou_i
    const Tensor iou = ad::add_scalar(ad::scale(ad::sum(ad::interval_iou(truth, matched)), -1.0),
                                      static_cast<double>(real));
    l1_value = l1.item();
    iou_value = iou.item();
    if (config.lambda_l1 != 0.0) total = ad::add(total, ad::scale(l1, config.lambda_l1));
    if (config.lambda_iou != 0.0) total = ad::add(total, ad::scale(iou, config.lambda_iou));
  }
  if (breakdown) {
    breakdown->classification = ce.item();
    breakdown->l1 = l1_value;
    breakdown->iou = iou_value;
    breakdown->total = total.item();
  }
  return total;
}

double anticipation_loss(const PaddedGroundtruth& gt, const PredictionSet& pred,
                         const Correspondence& gamma, const LossConfig& config,
                         LossBreakdown* breakdown) {
  ad::NoGradScope no_grad;
  const std::size_t n = pred.size();
  const std::size_t width = pred.num_classes + 1;
  std::vector<double> logp(n * width), spans(n * 2);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& e = pred.entries[j];
    if (e.class_probs.size() != width) throw DimensionError("prediction class count mismatch");
    for (std::size_t c = 0; c < width; ++c) logp[j * width + c] = std::log(std::max(e.class_probs[c], kMinProb));
    spans[2 * j] = e.span.start;
    spans[2 * j + 1] = e.span.end;
  }
  return anticipation_loss(gt, Tensor::matrix(n, width, std::move(logp)),
                           Tensor::matrix(n, 2, std::move(spans)), gamma, config, breakdown)
      .item();
}

}  // namespace antq
