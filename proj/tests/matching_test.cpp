#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "antq/errors.hpp"
#include "antq/matching.hpp"
#include "support/matching_oracles.hpp"

namespace antq {
namespace {

using testing::brute_force_minimum;
using testing::padded;
using testing::random_groundtruth;
using testing::random_predictions;
using testing::random_span;
using testing::simulate_greedy;

TEST(TemporalOverlap, Examples) {
  EXPECT_EQ(temporal_overlap({2, 8}, {1, 7}), 5.0);
  EXPECT_EQ(temporal_overlap({0, 2}, {3, 5}), 0.0);
  EXPECT_EQ(temporal_overlap({1, 4}, {1, 4}), 3.0);
  EXPECT_THROW(temporal_overlap({3, 1}, {0, 1}), UsageError);
}

TEST(GreedyMatch, WorkedExample) {
  const auto gt = padded({{0, {2, 8}}, {1, {0, 2}}}, 3);
  const std::vector<Span> pred{{1, 7}, {0, 3}, {9, 10}};
  const auto gamma = greedy_match(gt, pred);
  EXPECT_EQ(gamma.gt_to_pred, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(GreedyMatch, EmptyGroundtruthMapsEverythingToNull) {
  const auto gt = padded({}, 4);
  const std::vector<Span> pred{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  EXPECT_EQ(greedy_match(gt, pred).gt_to_pred, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(GreedyMatch, SinglePairMatchesWithoutOverlap) {
  const auto gt = padded({{2, {0, 1}}}, 1);
  const std::vector<Span> pred{{5, 9}};
  EXPECT_EQ(greedy_match(gt, pred).gt_to_pred, (std::vector<std::size_t>{0}));
}

TEST(GreedyMatch, ZeroOverlapFallsBackToNearestCenter) {
  const auto gt = padded({{0, {0, 2}}}, 3);
  const std::vector<Span> pred{{10, 12}, {3, 5}, {6, 7}};
  EXPECT_EQ(greedy_match(gt, pred).gt_to_pred[0], 1u);
}

TEST(GreedyMatch, RejectsOversizedGroundtruth) {
  const std::vector<LabeledSpan> items{{0, {0, 1}}, {1, {1, 2}}};
  EXPECT_THROW(PaddedGroundtruth::pad(items, 1, 4), ConfigError);
  const auto gt = padded(items, 2);
  const std::vector<Span> pred{{0, 1}};
  EXPECT_THROW(greedy_match(gt, pred), ConfigError);
}

TEST(GreedyMatch, MatchesStepSimulationOnRandomInstances) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + trial % 6;
    const auto gt = random_groundtruth(rng, n, 4);
    const auto pred = random_predictions(rng, n, 4).spans();
    const auto gamma = greedy_match(gt, pred);
    ASSERT_TRUE(gamma.is_bijection());
    ASSERT_EQ(gamma.gt_to_pred, simulate_greedy(gt, pred).gt_to_pred) << "trial " << trial;
  }
}

TEST(GreedyMatch, LongestInstanceTakesGlobalMaximumOverlap) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + trial % 5;
    const auto gt = random_groundtruth(rng, n, 3);
    if (gt.num_real == 0) continue;
    const auto pred = random_predictions(rng, n, 3).spans();
    std::size_t longest = 0;
    bool tied = false;
    for (std::size_t i = 1; i < gt.num_real; ++i) {
      if (gt.spans[i].length() > gt.spans[longest].length()) {
        longest = i;
        tied = false;
      } else if (gt.spans[i].length() == gt.spans[longest].length()) {
        tied = true;
      }
    }
    if (tied) continue;
    double global = 0.0;
    for (const auto& p : pred) global = std::max(global, temporal_overlap(gt.spans[longest], p));
    const auto gamma = greedy_match(gt, pred);
    EXPECT_EQ(temporal_overlap(gt.spans[longest], pred[gamma.gt_to_pred[longest]]), global);
  }
}

// Predictions are shorter than every groundtruth span, so no two of them can
// tie on overlap by both covering an instance completely.
TEST(GreedyMatch, InvariantToPredictionOrderWithoutTies) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 10.0), len(0.1, 1.0), long_len(2.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 6;
    std::vector<LabeledSpan> items;
    const std::size_t real = trial % (n + 1);
    for (std::size_t i = 0; i < real; ++i) {
      const double a = u(rng);
      items.push_back({0, {a, a + long_len(rng)}});
    }
    const auto gt = padded(items, n);
    std::vector<Span> pred;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = u(rng);
      pred.push_back({a, a + len(rng)});
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Span> shuffled(n);
    for (std::size_t j = 0; j < n; ++j) shuffled[perm[j]] = pred[j];
    const auto a = greedy_match(gt, pred);
    const auto b = greedy_match(gt, shuffled);
    for (std::size_t i = 0; i < real; ++i) EXPECT_EQ(perm[a.gt_to_pred[i]], b.gt_to_pred[i]);
  }
}

TEST(Hungarian, SingleElement) {
  const std::vector<double> cost{3.5};
  EXPECT_EQ(solve_assignment(cost, 1), (std::vector<std::size_t>{0}));
}

TEST(Hungarian, RecoversPlantedPermutation) {
  std::mt19937_64 rng(3);
  for (std::size_t n = 2; n <= 8; ++n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> cost(n * n);
    std::uniform_real_distribution<double> high(1.0, 2.0);
    for (auto& c : cost) c = high(rng);
    for (std::size_t i = 0; i < n; ++i) cost[i * n + perm[i]] = 0.1 * static_cast<double>(i);
    EXPECT_EQ(solve_assignment(cost, n), perm);
  }
}

TEST(Hungarian, EqualsBruteForceOnRandomCosts) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + trial % 6;
    std::vector<double> cost(n * n);
    for (auto& c : cost) c = u(rng);
    const auto rows = solve_assignment(cost, n);
    double total = 0.0;
    std::vector<bool> seen(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_FALSE(seen[rows[i]]);
      seen[rows[i]] = true;
      total += cost[i * n + rows[i]];
    }
    EXPECT_NEAR(total, brute_force_minimum(cost, n), 1e-12);
  }
}

TEST(Hungarian, MatchCostAndDominanceOverGreedy) {
  std::mt19937_64 rng(23);
  const LossConfig config;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + trial % 6;
    const auto gt = random_groundtruth(rng, n, 3);
    const auto pred = random_predictions(rng, n, 3);
    const auto cost = cost_matrix(gt, pred, config);
    const auto hungarian = hungarian_match(gt, pred, config);
    const auto greedy = greedy_match(gt, pred.spans());
    ASSERT_TRUE(hungarian.is_bijection());
    const double h = total_cost(gt, pred, hungarian, config);
    EXPECT_NEAR(h, brute_force_minimum(cost, n), 1e-12);
    const auto oracle = testing::oracle_cost_matrix(gt, pred, config.lambda_l1, config.lambda_iou);
    for (std::size_t k = 0; k < cost.size(); ++k) EXPECT_NEAR(cost[k], oracle[k], 1e-12);
    EXPECT_LE(h, total_cost(gt, pred, greedy, config) + 1e-12);
  }
}

TEST(Hungarian, MatchCostFormula) {
  const auto gt = padded({{1, {0, 4}}}, 2, 2);
  PredictedInstance p;
  p.class_probs = {0.2, 0.5, 0.3};
  p.span = {2, 6};
  const LossConfig config;
  EXPECT_NEAR(match_cost(gt, 0, p, config), -0.5 + 3.0 * 4.0 + 5.0 * (2.0 / 3.0), 1e-12);
  EXPECT_NEAR(match_cost(gt, 1, p, config), -0.3, 1e-15);
}

TEST(Correspondence, BijectionCheck) {
  EXPECT_TRUE((Correspondence{{2, 0, 1}}).is_bijection());
  EXPECT_FALSE((Correspondence{{0, 0, 1}}).is_bijection());
  EXPECT_FALSE((Correspondence{{0, 3, 1}}).is_bijection());
}

}  // namespace
}  // namespace antq
