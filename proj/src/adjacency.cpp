#include "kge/adjacency.hpp"

namespace kge {

Matrix normalized_adjacency(Index n_entities,
                            const std::vector<std::pair<Index, Index>>& edges) {
  if (n_entities < 1) throw DimensionError("normalized_adjacency: need at least one entity");
  Matrix a = Matrix::Zero(n_entities, n_entities);
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= n_entities || v < 0 || v >= n_entities) {
      throw DimensionError("normalized_adjacency: edge endpoint out of range");
    }
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  Eigen::VectorXd degree = a.rowwise().sum();
  Matrix with_loops = a + Matrix::Identity(n_entities, n_entities);
  Eigen::VectorXd inv_sqrt = (degree.array() + 1.0).rsqrt();
  return inv_sqrt.asDiagonal() * with_loops * inv_sqrt.asDiagonal();
}

Matrix normalized_adjacency(const KnowledgeGraph& kg) {
  std::vector<std::pair<Index, Index>> edges;
  edges.reserve(kg.triple_count());
  for (const Triple& t : kg.triples()) {
    edges.emplace_back(static_cast<Index>(t.head), static_cast<Index>(t.tail));
  }
  return normalized_adjacency(static_cast<Index>(kg.entity_count()), edges);
}

}  // namespace kge
