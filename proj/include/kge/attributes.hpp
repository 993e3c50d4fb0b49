#pragma once

#include <optional>
#include <vector>

#include "kge/graph.hpp"
#include "kge/records.hpp"
#include "kge/tensor.hpp"
#include "kge/text_embed.hpp"

namespace kge {

inline constexpr int kNumericWidth = 8;   // [age, weight] plus padding
inline constexpr double kMissingValue = -1.0;

// Min-max ranges for the numeric fields, computed on the training split only.
struct NumericStats {
  std::optional<double> age_min, age_max;
  std::optional<double> weight_min, weight_max;
};

NumericStats compute_numeric_stats(const std::vector<EmrRecord>& training_records);

// Min-max scaling to [0,1]; the missing sentinel passes through unscaled and
// a degenerate range (min == max) maps to 0.5.
double scale_to_unit(double v, std::optional<double> min, std::optional<double> max);

// Record-level feature layout: [age, weight, 0...] of width kNumericWidth,
// missing fields encoded as the -1 sentinel.
Eigen::RowVectorXd encode_numeric(const std::optional<double>& age,
                                  const std::optional<double>& weight,
                                  const NumericStats& stats);

// Per-entity literal features for the fusion gate: Age/Weight entities carry
// their scaled value in the matching slot, text-payload entities carry the
// subword embedding, and every other entity row is zero.
struct AttributeVectors {
  Matrix numeric;  // |E| x kNumericWidth
  Matrix text;     // |E| x text width
};

AttributeVectors build_attribute_vectors(const KnowledgeGraph& kg, const NumericStats& stats,
                                         const SubwordEmbedder& embedder);

}  // namespace kge
