#pragma once

#include <utility>
#include <vector>

#include "kge/graph.hpp"
#include "kge/tensor.hpp"

namespace kge {

// Symmetrically normalized adjacency with self-loops,
// (D+I)^(-1/2) (A+I) (D+I)^(-1/2), where A is the undirected unweighted
// incidence of the edge list (parallel edges collapse to one). Dense, meant
// for small fixtures and analysis.
Matrix normalized_adjacency(Index n_entities, const std::vector<std::pair<Index, Index>>& edges);
Matrix normalized_adjacency(const KnowledgeGraph& kg);

}  // namespace kge
