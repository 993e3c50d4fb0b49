#include "kge/attributes.hpp"

#include <algorithm>

namespace kge {

namespace {

void fold(std::optional<double>& mn, std::optional<double>& mx, double v) {
  mn = mn ? std::min(*mn, v) : v;
  mx = mx ? std::max(*mx, v) : v;
}

}  // namespace

NumericStats compute_numeric_stats(const std::vector<EmrRecord>& training_records) {
  NumericStats s;
  for (const EmrRecord& r : training_records) {
    if (r.age) fold(s.age_min, s.age_max, *r.age);
    if (r.weight) fold(s.weight_min, s.weight_max, *r.weight);
  }
  return s;
}

double scale_to_unit(double v, std::optional<double> min, std::optional<double> max) {
  if (v == kMissingValue) return kMissingValue;
  if (!min || !max) return 0.5;  // field never observed in training
  if (*min == *max) return 0.5;
  return std::clamp((v - *min) / (*max - *min), 0.0, 1.0);
}

Eigen::RowVectorXd encode_numeric(const std::optional<double>& age,
                                  const std::optional<double>& weight,
                                  const NumericStats& stats) {
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(kNumericWidth);
  out(0) = age ? scale_to_unit(*age, stats.age_min, stats.age_max) : kMissingValue;
  out(1) = weight ? scale_to_unit(*weight, stats.weight_min, stats.weight_max) : kMissingValue;
  return out;
}

AttributeVectors build_attribute_vectors(const KnowledgeGraph& kg, const NumericStats& stats,
                                         const SubwordEmbedder& embedder) {
  AttributeVectors av;
  const auto n = static_cast<Index>(kg.entity_count());
  av.numeric = Matrix::Zero(n, kNumericWidth);
  av.text = Matrix::Zero(n, embedder.width());
  for (const Entity& e : kg.entities()) {
    switch (e.payload.kind) {
      case AttributePayload::Kind::Numeric: {
        double scaled = e.kind == EntityKind::Age
                            ? scale_to_unit(e.payload.number, stats.age_min, stats.age_max)
                            : scale_to_unit(e.payload.number, stats.weight_min, stats.weight_max);
        av.numeric(e.id, e.kind == EntityKind::Age ? 0 : 1) = scaled;
        break;
      }
      case AttributePayload::Kind::Text:
        av.text.row(e.id) = embedder.embed(e.payload.text);
        break;
      case AttributePayload::Kind::None:
        break;
    }
  }
  return av;
}

}  // namespace kge
