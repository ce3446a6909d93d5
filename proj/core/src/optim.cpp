#include "antq/optim.hpp"

#include <cmath>

namespace antq {

AdamW::AdamW(ParameterList params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0)) throw ConfigError("AdamW learning rate must be positive");
  if (config_.weight_decay < 0.0) throw ConfigError("AdamW weight decay must be >= 0");
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void AdamW::step() {
  double sq = 0.0;
  for (const auto& p : params_) {
    const auto& g = p.tensor.impl().grad;
    for (double v : g) {
      if (!std::isfinite(v)) throw NumericalError("non-finite gradient in parameter " + p.name);
      sq += v * v;
    }
  }
  last_norm_ = std::sqrt(sq);
  double clip = 1.0;
  if (config_.max_grad_norm > 0.0 && last_norm_ > config_.max_grad_norm) {
    clip = config_.max_grad_norm / last_norm_;
  }

  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double decay = 1.0 - config_.lr * config_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& impl = params_[k].tensor.impl();
    const bool has_grad = !impl.grad.empty();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < impl.data.size(); ++i) {
      const double g = has_grad ? impl.grad[i] * clip : 0.0;
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      impl.data[i] *= decay;
      impl.data[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

}  // namespace antq
