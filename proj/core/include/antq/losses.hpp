#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "antq/ops.hpp"
#include "antq/types.hpp"

namespace antq {

using ad::Tensor;

struct LossConfig {
  double lambda_l1 = 3.0;
  double lambda_iou = 5.0;
  /// Weight of the classification term for no-action slots.
  double null_weight = 1.0;

  void validate() const;
};

/// Groundtruth set padded to the query count: the first `num_real` slots
/// hold real instances, the rest carry the no-action label.
struct PaddedGroundtruth {
  std::size_t num_classes = 0;
  std::size_t num_real = 0;
  std::vector<int> labels;   // size N_a; num_classes marks no-action
  std::vector<Span> spans;   // size N_a; unused for no-action slots

  static PaddedGroundtruth pad(std::span<const LabeledSpan> instances, std::size_t num_slots,
                               std::size_t num_classes);
  std::size_t size() const { return labels.size(); }
  bool is_null(std::size_t slot) const { return slot >= num_real; }
};

/// gt_to_pred[i] is the prediction assigned to padded groundtruth slot i.
struct Correspondence {
  std::vector<std::size_t> gt_to_pred;

  bool is_bijection() const;
  std::size_t size() const { return gt_to_pred.size(); }
};

struct LossBreakdown {
  double classification = 0.0;
  double l1 = 0.0;   // unweighted sum over real slots
  double iou = 0.0;  // unweighted sum over real slots
  double total = 0.0;
};

/// Mean over classes of -[t log p + (1 - t) log(1 - p)], p clamped to
/// [1e-7, 1 - 1e-7].
Tensor bce_multilabel(const Tensor& probs, std::span<const double> target);
double bce_multilabel(std::span<const double> probs, std::span<const double> target);

/// 1 - |a ∩ b| / |a ∪ b| with |.| the interval length.
double iou_loss(const Span& a, const Span& b);

/// Set anticipation loss over matched pairs:
///   sum_i  -w_i log p_{γ(i)}(c_i)
///        + [c_i real] (λ_L1 |s_i - ŝ_{γ(i)}|_1 + λ_iou L_iou(s_i, ŝ_{γ(i)}))
/// `log_probs` is [N_a x (|C|+1)], `spans` is [N_a x 2] in the same time
/// units as the groundtruth spans.
Tensor anticipation_loss(const PaddedGroundtruth& gt, const Tensor& log_probs, const Tensor& spans,
                         const Correspondence& gamma, const LossConfig& config,
                         LossBreakdown* breakdown = nullptr);

/// Value-level overload on a materialized prediction set (probabilities,
/// spans in the groundtruth's time units).
double anticipation_loss(const PaddedGroundtruth& gt, const PredictionSet& pred,
                         const Correspondence& gamma, const LossConfig& config,
                         LossBreakdown* breakdown = nullptr);

}  // namespace antq
