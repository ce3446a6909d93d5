#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "antq/ops.hpp"

namespace antq::testing {

using ad::Tensor;

struct GradReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares tape gradients of a scalar function against central differences.
/// The error is |g - g_fd|_2 / max(|g|_2 + |g_fd|_2, 1e-12) over the
/// concatenation of all checked entries, so inputs whose true gradient is
/// exactly zero (e.g. attention key biases) do not divide noise by noise.
/// `coords`, when non-zero, limits each input to that many random entries.
inline GradReport gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                            std::vector<Tensor> inputs, double h = 1e-6, std::size_t coords = 0,
                            std::uint64_t seed = 0) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    const Tensor loss = f(inputs);
    tape.backward(loss);
  }
  GradReport report;
  std::mt19937_64 rng(seed);
  ad::NoGradScope no_grad;
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (auto& t : inputs) {
    const auto analytic = t.grad();
    std::vector<std::size_t> idx(t.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (coords > 0 && coords < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(coords);
    }
    auto data = t.mutable_data();
    for (std::size_t i : idx) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = f(inputs).item();
      data[i] = saved - h;
      const double down = f(inputs).item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff += (analytic[i] - numeric) * (analytic[i] - numeric);
      na += analytic[i] * analytic[i];
      nn += numeric * numeric;
      ++report.checked;
    }
  }
  report.max_rel_error = std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), 1e-12);
  return report;
}

inline Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

/// Random tensor whose entries keep at least `margin` away from zero.
inline Tensor away_from_zero(ad::Shape shape, std::mt19937_64& rng, double margin = 0.05) {
  std::uniform_real_distribution<double> u(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = sign(rng) ? u(rng) : -u(rng);
  return Tensor(std::move(shape), std::move(v));
}

/// Weighted sum with fixed random weights, so every output element
/// contributes a distinct gradient.
inline Tensor probe(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xABCDEFULL);
  return ad::sum(ad::mul(y, random_tensor(y.shape(), rng)));
}

}  // namespace antq::testing
