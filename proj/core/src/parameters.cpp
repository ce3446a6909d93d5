#include "antq/parameters.hpp"

#include <cmath>
#include <cstring>

namespace antq {

ad::Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  std::vector<double> w(fan_in * fan_out);
  for (auto& v : w) v = dist(rng);
  return ad::Tensor({fan_in, fan_out}, std::move(w), true);
}

std::vector<std::vector<double>> snapshot(const ParameterList& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

bool identical(const std::vector<std::vector<double>>& a,
               const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    if (std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(double)) != 0) return false;
  }
  return true;
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) p.tensor.impl().grad.clear();
}

void set_requires_grad(const ParameterList& params, bool value) {
  for (const auto& p : params) p.tensor.impl().requires_grad = value;
}

std::size_t count_scalars(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

}  // namespace antq
