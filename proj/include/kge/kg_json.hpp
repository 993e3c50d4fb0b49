#pragma once

#include <string>
#include <vector>

#include "kge/attributes.hpp"
#include "kge/graph.hpp"

namespace kge {

// Everything the training pipeline needs from the graph-building step: the
// frozen graph itself, numeric scaling statistics computed on the training
// records only, and the record-level split (record names in insertion
// order within each bucket).
struct KgBundle {
  KnowledgeGraph kg;
  NumericStats stats;
  std::vector<std::string> train_records, val_records, test_records;
};

void save_kg_bundle(const std::string& path, const KgBundle& bundle);
KgBundle load_kg_bundle(const std::string& path);

}  // namespace kge
