#pragma once

#include <string>
#include <vector>

#include "kge/errors.hpp"

namespace kge {

struct ConfusionCounts {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;

  long total() const { return tp + tn + fp + fn; }
};

// Tallies thresholded probabilities against hard labels. A prediction counts
// as positive when its probability is >= threshold (ties go positive).
ConfusionCounts confusion(const std::vector<double>& probabilities,
                          const std::vector<double>& labels, double threshold = 0.5);

// Derived metrics with explicit degeneracy flags: a zero denominator yields
// the value 0 and a cleared *_defined flag instead of a NaN.
struct MetricsReport {
  double acc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
  bool acc_defined = true;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;

  std::string to_json() const;
};

MetricsReport compute_metrics(const ConfusionCounts& c);

}  // namespace kge
