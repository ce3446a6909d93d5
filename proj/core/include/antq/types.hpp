#pragma once

#include <cstddef>
#include <vector>

namespace antq {

/// Continuous time interval [start, end]. Frame t occupies (t-1, t].
struct Span {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  double center() const { return 0.5 * (start + end); }
  bool operator==(const Span&) const = default;
};

/// One annotated action: class label and inclusive 1-based frame range.
struct ActionInstance {
  int label = 0;
  int start = 1;
  int end = 1;

  int frames() const { return end - start + 1; }
  /// Continuous extent of the covered frames, i.e. [start - 1, end].
  Span span() const { return {static_cast<double>(start - 1), static_cast<double>(end)}; }
  bool operator==(const ActionInstance&) const = default;
};

struct LabeledSpan {
  int label = 0;
  Span span;
};

/// One decoder query's output: distribution over |C| + 1 labels (the last
/// one is the no-action class) and a predicted interval.
struct PredictedInstance {
  std::vector<double> class_probs;
  Span span;

  std::size_t argmax() const;
};

struct PredictionSet {
  std::size_t num_classes = 0;  // |C|; index num_classes is the no-action class
  std::vector<PredictedInstance> entries;

  std::size_t null_class() const { return num_classes; }
  std::size_t size() const { return entries.size(); }
  std::vector<Span> spans() const;
};

/// A reported (non-null) prediction mapped onto frames.
struct ScoredInstance {
  int label = 0;
  double score = 0.0;
  int start = 1;
  int end = 1;
  bool operator==(const ScoredInstance&) const = default;
};

}  // namespace antq
