#pragma once

#include <cstdint>
#include <vector>

#include "antq/parameters.hpp"

namespace antq {

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; <= 0 disables.
  double max_grad_norm = 0.0;
};

/// AdamW with decoupled weight decay (decay applied to the weights directly,
/// not folded into the gradient) and bias-corrected moments.
class AdamW {
 public:
  AdamW(ParameterList params, AdamWConfig config);

  /// Applies one update from the gradients currently stored on the
  /// parameters. Throws NumericalError, leaving every parameter and moment
  /// untouched, if any gradient is non-finite.
  void step();
  void zero_grad() { zero_grads(params_); }

  std::int64_t steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  /// Gradient norm seen by the last step (before clipping).
  double last_grad_norm() const { return last_norm_; }

 private:
  ParameterList params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t step_ = 0;
  double last_norm_ = 0.0;
};

}  // namespace antq
