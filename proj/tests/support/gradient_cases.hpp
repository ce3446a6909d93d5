#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "antq/losses.hpp"
#include "antq/matching.hpp"
#include "antq/model.hpp"
#include "antq/transformer.hpp"
#include "support/gradcheck.hpp"

namespace antq::testing {

using Inputs = std::vector<Tensor>;

inline constexpr int kGradientSeeds = 100;

inline constexpr double kOpTolerance = 1e-5;

inline std::size_t dim_between(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Sorted pairs whose endpoints are pairwise at least `gap` apart, so the
// interval IoU is smooth around the sample.
inline Tensor separated_intervals(std::size_t n, std::mt19937_64& rng, double gap) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) {
    double a = u(rng), b = u(rng);
    while (std::abs(a - b) < gap) b = u(rng);
    v.push_back(std::min(a, b));
    v.push_back(std::max(a, b));
  }
  return Tensor::matrix(n, 2, std::move(v));
}

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.num_classes = 3;
  c.feature_dim = 4;
  c.model_dim = 8;
  c.segment_layers = 1;
  c.video_layers = 1;
  c.decoder_layers = 1;
  c.num_heads = 2;
  c.num_queries = 4;
  c.window_k = 3;
  c.horizon_max = 10.0;
  c.dropout_p = 0.0;
  return c;
}

struct GradientCase {
  const char* name;
  double tolerance;
  std::function<GradReport(std::uint64_t seed, std::mt19937_64& rng)> run;
};

/// Every differentiable op, plus the end-to-end set loss on a tiny model.
inline std::vector<GradientCase> gradient_cases() {
  std::vector<GradientCase> cases;
  cases.push_back({"Matmul", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const auto m = dim_between(rng, 1, 5), k = dim_between(rng, 1, 5), n = dim_between(rng, 1, 5);
      return gradcheck([s](const Inputs& x) { return probe(ad::matmul(x[0], x[1]), s); },
                       {random_tensor({m, k}, rng), random_tensor({k, n}, rng)});
    }});
  cases.push_back({"Transpose", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const auto m = dim_between(rng, 1, 5), n = dim_between(rng, 1, 5);
      return gradcheck([s](const Inputs& x) { return probe(ad::transpose(x[0]), s); },
                       {random_tensor({m, n}, rng)});
    }});
  cases.push_back({"ElementwiseBinary", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const ad::Shape shape{dim_between(rng, 1, 4), dim_between(rng, 1, 4)};
      const Tensor a = random_tensor(shape, rng);
      const Tensor b = random_tensor(shape, rng);
      const Tensor denom = away_from_zero(shape, rng, 0.5);
      auto r1 = gradcheck([s](const Inputs& x) { return probe(ad::add(x[0], x[1]), s); }, {a, b});
      auto r2 = gradcheck([s](const Inputs& x) { return probe(ad::sub(x[0], x[1]), s); }, {a, b});
      auto r3 = gradcheck([s](const Inputs& x) { return probe(ad::mul(x[0], x[1]), s); }, {a, b});
      auto r4 = gradcheck([s](const Inputs& x) { return probe(ad::div(x[0], x[1]), s); }, {a, denom});
      r1.max_rel_error = std::max({r1.max_rel_error, r2.max_rel_error, r3.max_rel_error, r4.max_rel_error});
      return r1;
    }});
  cases.push_back({"MinimumMaximum", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const ad::Shape shape{dim_between(rng, 1, 4), dim_between(rng, 1, 4)};
      const Tensor a = random_tensor(shape, rng);
      const Tensor b = ad::add(a, away_from_zero(shape, rng, 0.05));
      auto r1 = gradcheck([s](const Inputs& x) { return probe(ad::minimum(x[0], x[1]), s); }, {a, b});
      auto r2 = gradcheck([s](const Inputs& x) { return probe(ad::maximum(x[0], x[1]), s); }, {a, b});
      r1.max_rel_error = std::max(r1.max_rel_error, r2.max_rel_error);
      return r1;
    }});
  cases.push_back({"BiasScaleShift", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const auto m = dim_between(rng, 1, 4), n = dim_between(rng, 1, 4);
      const double factor = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
      auto r1 = gradcheck([s](const Inputs& x) { return probe(ad::add_bias(x[0], x[1]), s); },
                          {random_tensor({m, n}, rng), random_tensor({n}, rng)});
      auto r2 = gradcheck([s, factor](const Inputs& x) { return probe(ad::scale(x[0], factor), s); },
                          {random_tensor({m, n}, rng)});
      auto r3 = gradcheck([s, factor](const Inputs& x) { return probe(ad::add_scalar(x[0], factor), s); },
                          {random_tensor({m, n}, rng)});
      r1.max_rel_error = std::max({r1.max_rel_error, r2.max_rel_error, r3.max_rel_error});
      return r1;
    }});
  cases.push_back({"Unary", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const ad::Shape shape{dim_between(rng, 1, 4), dim_between(rng, 1, 5)};
      const Tensor kinked = away_from_zero(shape, rng, 0.05);
      const Tensor smooth = random_tensor(shape, rng, -3.0, 3.0);
      const Tensor positive = random_tensor(shape, rng, 0.2, 2.0);
      double worst = 0.0;
      std::size_t checked = 0;
      auto take = [&](const testing::GradReport& r) {
        worst = std::max(worst, r.max_rel_error);
        checked += r.checked;
      };
      take(gradcheck([s](const Inputs& x) { return probe(ad::relu(x[0]), s); }, {kinked}));
      take(gradcheck([s](const Inputs& x) { return probe(ad::abs(x[0]), s); }, {kinked}));
      take(gradcheck([s](const Inputs& x) { return probe(ad::sigmoid(x[0]), s); }, {smooth}));
      take(gradcheck([s](const Inputs& x) { return probe(ad::exp(x[0]), s); }, {smooth}));
      take(gradcheck([s](const Inputs& x) { return probe(ad::log(x[0]), s); }, {positive}));
      return testing::GradReport{worst, checked};
    }});
  cases.push_back({"Clamp", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const ad::Shape shape{dim_between(rng, 1, 4), dim_between(rng, 1, 5)};
      Tensor x = random_tensor(shape, rng, -1.0, 1.0);
      // keep entries away from the clamp boundaries at +-0.5
      for (auto& v : x.mutable_data()) {
        if (std::abs(std::abs(v) - 0.5) < 0.05) v *= 1.25;
      }
      return gradcheck([s](const Inputs& in) { return probe(ad::clamp(in[0], -0.5, 0.5), s); }, {x});
    }});
  cases.push_back({"SoftmaxFamily", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const ad::Shape shape{dim_between(rng, 1, 4), dim_between(rng, 1, 6)};
      const Tensor x = random_tensor(shape, rng, -3.0, 3.0);
      double worst = 0.0;
      std::size_t checked = 0;
      for (int axis : {0, 1}) {
        for (auto r : {gradcheck([s, axis](const Inputs& in) { return probe(ad::softmax(in[0], axis), s); }, {x}),
                       gradcheck([s, axis](const Inputs& in) { return probe(ad::log_softmax(in[0], axis), s); },
                                 {x})}) {
          worst = std::max(worst, r.max_rel_error);
          checked += r.checked;
        }
      }
      return testing::GradReport{worst, checked};
    }});
  cases.push_back({"LayerNorm", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const auto m = dim_between(rng, 1, 4), n = dim_between(rng, 2, 8);
      return gradcheck([s](const Inputs& x) { return probe(ad::layernorm(x[0], x[1], x[2]), s); },
                       {random_tensor({m, n}, rng, -2.0, 2.0), random_tensor({n}, rng),
                        random_tensor({n}, rng)});
    }});
  cases.push_back({"Reductions", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const ad::Shape shape{dim_between(rng, 1, 4), dim_between(rng, 1, 5)};
      const Tensor x = random_tensor(shape, rng);
      double worst = 0.0;
      std::size_t checked = 0;
      for (auto r : {gradcheck([s](const Inputs& in) { return probe(ad::mean(in[0], 0, true), s); }, {x}),
                     gradcheck([s](const Inputs& in) { return probe(ad::mean(in[0], 1, false), s); }, {x}),
                     gradcheck([](const Inputs& in) { return ad::scale(ad::sum(in[0]), 1.7); }, {x})}) {
        worst = std::max(worst, r.max_rel_error);
        checked += r.checked;
      }
      return testing::GradReport{worst, checked};
    }});
  cases.push_back({"Restructuring", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const auto m = dim_between(rng, 2, 5), n = dim_between(rng, 2, 5);
      const Tensor a = random_tensor({m, n}, rng);
      const Tensor b = random_tensor({m, n}, rng);
      const auto lo = dim_between(rng, 0, n - 2);
      const auto hi = dim_between(rng, lo + 1, n);
      std::vector<std::size_t> picks;
      for (int i = 0; i < 6; ++i) picks.push_back(dim_between(rng, 0, m * n - 1));
      double worst = 0.0;
      std::size_t checked = 0;
      for (auto r : {
               gradcheck([s](const Inputs& x) {
                 const Tensor parts[] = {x[0], x[1]};
                 return probe(ad::concat(parts, 0), s);
               }, {a, b}),
               gradcheck([s](const Inputs& x) {
                 const Tensor parts[] = {x[0], x[1]};
                 return probe(ad::concat(parts, 1), s);
               }, {a, b}),
               gradcheck([s, lo, hi](const Inputs& x) { return probe(ad::slice(x[0], 1, lo, hi), s); }, {a}),
               gradcheck([s](const Inputs& x) { return probe(ad::slice(x[0], 0, 1, 2), s); }, {a}),
               gradcheck([s, picks](const Inputs& x) { return probe(ad::gather(x[0], picks), s); }, {a}),
               gradcheck([s, m, n](const Inputs& x) { return probe(ad::reshape(x[0], {n * m}), s); }, {a}),
           }) {
        worst = std::max(worst, r.max_rel_error);
        checked += r.checked;
      }
      return testing::GradReport{worst, checked};
    }});
  cases.push_back({"IntervalIou", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const auto n = dim_between(rng, 1, 5);
      Tensor a = separated_intervals(n, rng, 0.1);
      Tensor b = separated_intervals(n, rng, 0.1);
      for (std::size_t i = 0; i < n; ++i) {
        // endpoint coincidences are kinks of the overlap
        for (int p = 0; p < 2; ++p) {
          for (int q = 0; q < 2; ++q) {
            if (std::abs(a.at(i, p) - b.at(i, q)) < 0.05) b.mutable_data()[2 * i + q] += 0.2;
          }
        }
        if (b.at(i, 1) < b.at(i, 0)) std::swap(b.mutable_data()[2 * i], b.mutable_data()[2 * i + 1]);
      }
      return gradcheck([s](const Inputs& x) { return probe(ad::interval_iou(x[0], x[1]), s); }, {a, b});
    }});
  cases.push_back({"DropoutWithFixedMask", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const Tensor x = random_tensor({dim_between(rng, 1, 4), dim_between(rng, 1, 5)}, rng);
      return gradcheck([s](const Inputs& in) {
        std::mt19937_64 mask_rng(s);
        return probe(ad::dropout(in[0], 0.3, mask_rng), s);
      }, {x});
    }});
  cases.push_back({"MultiHeadAttention", kOpTolerance, [](std::uint64_t s, std::mt19937_64& rng) {
      const BlockConfig cfg{8, 2, 16, 0.0};
      const auto params = AttentionParams::create(cfg, rng);
      const auto lq = dim_between(rng, 1, 4), lk = dim_between(rng, 1, 5);
      ParameterList list;
      params.collect("attn", list);
      Inputs inputs{random_tensor({lq, 8}, rng), random_tensor({lk, 8}, rng)};
      for (const auto& p : list) inputs.push_back(p.tensor);
      return gradcheck([s, &params](const Inputs& x) {
        return probe(multi_head_attention(x[0], x[1], x[1], params), s);
      }, inputs);
    }});
  cases.push_back({"BinaryCrossEntropy", kOpTolerance, [](std::uint64_t, std::mt19937_64& rng) {
      const auto n = dim_between(rng, 1, 8);
      std::vector<double> target(n);
      for (auto& t : target) t = std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
      return gradcheck([target](const Inputs& x) { return bce_multilabel(ad::sigmoid(x[0]), target); },
                       {random_tensor({n}, rng, -3.0, 3.0)});
    }});
  // End-to-end: features through both encoders, the decoder and the heads into
  // the set loss, with the correspondence fixed at the initial point.
  cases.push_back({"EndToEndSetLoss", 1e-4, [](std::uint64_t s, std::mt19937_64& rng) {
      const ModelConfig cfg = tiny_config();
      AnticipatrModel model(cfg, s + 1);
      // With a zero output bias, a query whose hidden ReLUs are all inactive
      // emits u_s == u_e exactly, where min/max has no derivative.
      for (auto& p : model.parameters()) {
        if (p.name == "time_head.out.bias") {
          p.tensor.mutable_data()[0] = -0.3;
          p.tensor.mutable_data()[1] = 0.3;
        }
      }
      const std::size_t t_o = dim_between(rng, 2, 7);
      const double t_a = static_cast<double>(dim_between(rng, 3, 9));
      const Tensor features = random_tensor({t_o, cfg.feature_dim}, rng);
      std::vector<LabeledSpan> truth;
      const auto n_real = dim_between(rng, 1, 3);
      for (std::size_t i = 0; i < n_real; ++i) {
        const double a = std::uniform_real_distribution<double>(0.0, 0.6)(rng);
        const double len = std::uniform_real_distribution<double>(0.1, 0.4)(rng);
        truth.push_back({static_cast<int>(dim_between(rng, 0, cfg.num_classes - 1)), Span{a, a + len}});
      }
      const auto gt = PaddedGroundtruth::pad(truth, cfg.num_queries, cfg.num_classes);
      const LossConfig loss_cfg;
      Correspondence gamma;
      {
        ad::NoGradScope no_grad;
        const auto heads = model.anticipate(model.encode(features), t_a);
        gamma = greedy_match(gt, model.to_prediction_set(heads, 0.0, 1.0).spans());
      }
      Inputs inputs;
      for (const auto& p : model.parameters()) inputs.push_back(p.tensor);
      return gradcheck([&](const Inputs&) {
        const auto heads = model.anticipate(model.encode(features), t_a);
        return anticipation_loss(gt, heads.log_probs, heads.unit_spans, gamma, loss_cfg);
      }, inputs, 1e-6, 6, s);
    }});
  return cases;
}

/// Worst error of a case over `seeds` randomized instances.
inline GradReport run_gradient_case(const GradientCase& c, int seeds = kGradientSeeds) {
  GradReport worst;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 7919 + 17);
    const auto report = c.run(static_cast<std::uint64_t>(seed), rng);
    worst.max_rel_error = std::max(worst.max_rel_error, report.max_rel_error);
    worst.checked += report.checked;
    if (report.checked == 0) worst.max_rel_error = std::numeric_limits<double>::infinity();
  }
  return worst;
}

}  // namespace antq::testing
