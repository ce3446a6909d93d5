#pragma once

#include <random>
#include <string>
#include <vector>

#include "antq/tensor.hpp"

namespace antq {

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

/// Ordered view of a model's learnable tensors. Entries alias model storage.
using ParameterList = std::vector<NamedTensor>;

/// Xavier/Glorot-uniform weight of shape [fan_in x fan_out].
ad::Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

/// Bit-exact copy of every parameter value (used for freeze/mutation checks).
std::vector<std::vector<double>> snapshot(const ParameterList& params);
bool identical(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);

void zero_grads(const ParameterList& params);
void set_requires_grad(const ParameterList& params, bool value);
std::size_t count_scalars(const ParameterList& params);

}  // namespace antq
