#include "antq/types.hpp"

#include <algorithm>

namespace antq {

std::size_t PredictedInstance::argmax() const {
  return static_cast<std::size_t>(
      std::distance(class_probs.begin(), std::max_element(class_probs.begin(), class_probs.end())));
}

std::vector<Span> PredictionSet::spans() const {
  std::vector<Span> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.span);
  return out;
}

}  // namespace antq
