#include "kge/metrics.hpp"

#include <json.hpp>

namespace kge {

ConfusionCounts confusion(const std::vector<double>& probabilities,
                          const std::vector<double>& labels, double threshold) {
  if (probabilities.size() != labels.size()) {
    throw ContractError("confusion: predictions and labels differ in length");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw ContractError("confusion: label at index " + std::to_string(i) +
                          " is not 0 or 1");
    }
    bool predicted = probabilities[i] >= threshold;
    bool actual = labels[i] == 1.0;
    if (predicted && actual) ++c.tp;
    else if (predicted && !actual) ++c.fp;
    else if (!predicted && actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricsReport compute_metrics(const ConfusionCounts& c) {
  MetricsReport r;
  r.counts = c;

  long total = c.total();
  if (total > 0) {
    r.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
  } else {
    r.acc_defined = false;
  }
  if (c.tp + c.fp > 0) {
    r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  } else {
    r.precision_defined = false;
  }
  if (c.tp + c.fn > 0) {
    r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    r.recall_defined = false;
  }
  if (r.precision_defined && r.recall_defined && r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  } else {
    r.f1_defined = false;
  }
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["acc"] = acc;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["counts"] = {{"tp", counts.tp}, {"tn", counts.tn}, {"fp", counts.fp}, {"fn", counts.fn}};
  j["flags"] = {{"acc_defined", acc_defined},
                {"precision_defined", precision_defined},
                {"recall_defined", recall_defined},
                {"f1_defined", f1_defined}};
  return j.dump();
}

}  // namespace kge
