#include "antq/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace antq {

double temporal_overlap(const Span& a, const Span& b) {
  if (a.end < a.start || b.end < b.start) {
    throw UsageError("temporal_overlap: instance with end < start");
  }
  return std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

Correspondence greedy_match(const PaddedGroundtruth& gt, std::span<const Span> predicted) {
  const std::size_t n = gt.size();
  if (predicted.size() != n) {
    throw ConfigError("greedy_match: " + std::to_string(predicted.size()) +
                      " predictions for " + std::to_string(n) + " padded groundtruth slots");
  }
  if (gt.num_real > n) throw ConfigError("groundtruth set larger than the query count");

  std::vector<std::size_t> order(gt.num_real);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double la = gt.spans[a].length(), lb = gt.spans[b].length();
    if (la != lb) return la > lb;
    if (gt.spans[a].start != gt.spans[b].start) return gt.spans[a].start < gt.spans[b].start;
    return gt.labels[a] < gt.labels[b];
  });

  Correspondence gamma;
  gamma.gt_to_pred.assign(n, 0);
  std::vector<bool> taken(n, false);
  for (std::size_t slot : order) {
    const Span& s = gt.spans[slot];
    std::size_t best = n;
    double best_overlap = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (taken[j]) continue;
      const double ov = temporal_overlap(s, predicted[j]);
      if (ov > best_overlap) {
        best_overlap = ov;
        best = j;
      }
    }
    if (best == n) {
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (taken[j]) continue;
        const double dist = std::abs(predicted[j].center() - s.center());
        if (dist < best_dist) {
          best_dist = dist;
          best = j;
        }
      }
    }
    taken[best] = true;
    gamma.gt_to_pred[slot] = best;
  }
  std::size_t next = 0;
  for (std::size_t slot = gt.num_real; slot < n; ++slot) {
    while (taken[next]) ++next;
    taken[next] = true;
    gamma.gt_to_pred[slot] = next;
  }
  return gamma;
}

double match_cost(const PaddedGroundtruth& gt, std::size_t slot, const PredictedInstance& pred,
                  const LossConfig& config) {
  const auto label = static_cast<std::size_t>(gt.labels[slot]);
  double cost = -pred.class_probs.at(label);
  if (!gt.is_null(slot)) {
    const Span& s = gt.spans[slot];
    const double l1 = std::abs(s.start - pred.span.start) + std::abs(s.end - pred.span.end);
    cost += config.lambda_l1 * l1 + config.lambda_iou * iou_loss(s, pred.span);
  }
  return cost;
}

std::vector<double> cost_matrix(const PaddedGroundtruth& gt, const PredictionSet& pred,
                                const LossConfig& config) {
  const std::size_t n = gt.size();
  if (pred.size() != n) throw ConfigError("prediction set size differs from padded groundtruth");
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = match_cost(gt, i, pred.entries[j], config);
  return cost;
}

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw DimensionError("assignment cost matrix must be n x n");
  if (n == 0) return {};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials formulation; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

Correspondence hungarian_match(const PaddedGroundtruth& gt, const PredictionSet& pred,
                               const LossConfig& config) {
  const auto cost = cost_matrix(gt, pred, config);
  return Correspondence{solve_assignment(cost, gt.size())};
}

double total_cost(const PaddedGroundtruth& gt, const PredictionSet& pred,
                  const Correspondence& gamma, const LossConfig& config) {
  double total = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    total += match_cost(gt, i, pred.entries.at(gamma.gt_to_pred[i]), config);
  }
  return total;
}

Correspondence match(MatcherKind kind, const PaddedGroundtruth& gt, const PredictionSet& pred,
                     const LossConfig& config) {
  if (kind == MatcherKind::Hungarian) return hungarian_match(gt, pred, config);
  const auto spans = pred.spans();
  return greedy_match(gt, spans);
}

}  // namespace antq
