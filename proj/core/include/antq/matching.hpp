#pragma once

#include <span>
#include <vector>

#include "antq/losses.hpp"
#include "antq/types.hpp"

namespace antq {

/// max(0, min(a.end, b.end) - max(a.start, b.start)).
double temporal_overlap(const Span& a, const Span& b);

/// Greedy set correspondence.
///
/// Real groundtruth slots are visited by descending duration (ties: earlier
/// start, then lower class index, then slot order). Each takes the unmatched
/// prediction of maximum temporal overlap, lowest index on ties. When no
/// unmatched prediction overlaps it at all, the one with the nearest center
/// is taken instead. Leftover predictions go to the no-action slots in
/// ascending index order.
Correspondence greedy_match(const PaddedGroundtruth& gt, std::span<const Span> predicted);

/// Cost of assigning padded slot `slot` to prediction `pred`:
/// -p(c) + [c real] (λ_L1 |s - ŝ|_1 + λ_iou L_iou(s, ŝ)).
double match_cost(const PaddedGroundtruth& gt, std::size_t slot, const PredictedInstance& pred,
                  const LossConfig& config);

/// Row-major square cost matrix of match_cost over all (slot, prediction).
std::vector<double> cost_matrix(const PaddedGroundtruth& gt, const PredictionSet& pred,
                                const LossConfig& config);

/// Exact minimum-cost perfect assignment of an n x n row-major cost matrix
/// (Kuhn-Munkres with potentials, O(n^3)). Returns row -> column.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

Correspondence hungarian_match(const PaddedGroundtruth& gt, const PredictionSet& pred,
                               const LossConfig& config);

double total_cost(const PaddedGroundtruth& gt, const PredictionSet& pred,
                  const Correspondence& gamma, const LossConfig& config);

enum class MatcherKind { Greedy, Hungarian };

Correspondence match(MatcherKind kind, const PaddedGroundtruth& gt, const PredictionSet& pred,
                     const LossConfig& config);

}  // namespace antq
