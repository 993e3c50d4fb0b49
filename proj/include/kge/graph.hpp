#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kge/errors.hpp"

namespace kge {

enum class EntityKind : std::uint8_t {
  MedicalRecord,
  Animal,
  Species,
  Breed,
  Disease,
  Symptom,
  Drugs,
  Prescription,
  TreatmentCode,
  Treatment,
  Comment,
  Age,
  AgeGroup,
  Gender,
  Weight,
  DiseaseCategory,
};

inline constexpr int kEntityKindCount = 16;

const char* to_string(EntityKind kind);
std::optional<EntityKind> entity_kind_from_string(const std::string& s);

using EntityId = std::int64_t;
using RelationId = std::int32_t;

struct RelationType {
  std::string name;
  EntityKind head;
  EntityKind tail;
};

// The relation vocabulary used by the medical-record graphs. Kept as data so
// graphs with a different schema can reuse the same machinery.
const std::vector<RelationType>& default_relation_schema();

// Optional literal attached to an entity. Text is legal only on Disease,
// Symptom, Prescription, Treatment and Comment entities; Numeric only on Age
// and Weight.
struct AttributePayload {
  enum class Kind { None, Numeric, Text };
  Kind kind = Kind::None;
  double number = 0.0;
  std::string text;

  static AttributePayload none() { return {}; }
  static AttributePayload numeric(double v) {
    AttributePayload p;
    p.kind = Kind::Numeric;
    p.number = v;
    return p;
  }
  static AttributePayload text_value(std::string s) {
    AttributePayload p;
    p.kind = Kind::Text;
    p.text = std::move(s);
    return p;
  }
};

struct Entity {
  EntityId id = -1;
  EntityKind kind = EntityKind::MedicalRecord;
  std::string name;
  AttributePayload payload;
};

struct Triple {
  EntityId head = -1;
  RelationId relation = -1;
  EntityId tail = -1;

  bool operator==(const Triple& o) const {
    return head == o.head && relation == o.relation && tail == o.tail;
  }
};

// Append-only store of entities and triples. Entity ids are dense indices in
// insertion order; (kind, name) pairs are deduplicated. After freeze() the
// graph is immutable and exposes adjacency indexes.
class KnowledgeGraph {
 public:
  explicit KnowledgeGraph(std::vector<RelationType> schema = default_relation_schema());

  // Returns the existing id when (kind, name) was seen before; the payload of
  // the first insertion wins.
  EntityId add_entity(EntityKind kind, const std::string& name,
                      AttributePayload payload = AttributePayload::none());
  // Deduplicates exact repeats. Validates ids, the head != tail rule and the
  // relation's kind signature.
  void add_triple(EntityId head, RelationId relation, EntityId tail);

  void freeze();
  bool frozen() const { return frozen_; }

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t triple_count() const { return triples_.size(); }
  const Entity& entity(EntityId id) const;
  std::optional<EntityId> find(EntityKind kind, const std::string& name) const;
  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Triple>& triples() const { return triples_; }
  bool has_triple(EntityId head, RelationId relation, EntityId tail) const;

  const std::vector<RelationType>& schema() const { return schema_; }
  RelationId relation_id(const std::string& name) const;

  // Indexes below require a frozen graph.
  const std::vector<std::size_t>& incident_triples(EntityId id) const;
  const std::vector<EntityId>& entities_of_kind(EntityKind kind) const;
  std::vector<EntityId> tails_of(EntityId head, RelationId relation) const;

  // Tail-corrupted negatives for one positive triple: k distinct entities of
  // the relation's tail kind, none of which form a true triple with the head.
  // Throws SamplingError when fewer than k candidates exist.
  std::vector<Triple> sample_negatives(const Triple& positive, int k,
                                       std::mt19937_64& rng) const;

 private:
  struct TripleKey {
    EntityId head;
    RelationId relation;
    EntityId tail;
    bool operator==(const TripleKey& o) const {
      return head == o.head && relation == o.relation && tail == o.tail;
    }
  };
  struct TripleKeyHash {
    std::size_t operator()(const TripleKey& k) const;
  };

  void require_frozen(const char* what) const;
  void require_mutable(const char* what) const;

  std::vector<RelationType> schema_;
  std::unordered_map<std::string, RelationId> relation_ids_;
  std::vector<Entity> entities_;
  std::unordered_map<std::string, EntityId> entity_ids_;  // key: kind byte + name
  std::vector<Triple> triples_;
  std::unordered_set<TripleKey, TripleKeyHash> triple_set_;
  bool frozen_ = false;

  // Built by freeze().
  std::vector<std::vector<std::size_t>> incident_;
  std::array<std::vector<EntityId>, kEntityKindCount> by_kind_;
  std::unordered_map<std::string, std::vector<EntityId>> tails_index_;  // "head/rel"
};

// Deterministic shuffled three-way partition. Ratios must be positive and sum
// to 1 within 1e-9. Boundary sizes are rounded so the parts are exhaustive
// and disjoint.
template <typename T>
std::array<std::vector<T>, 3> split_three_way(std::vector<T> items,
                                              const std::array<double, 3>& ratios,
                                              std::mt19937_64& rng) {
  double total = ratios[0] + ratios[1] + ratios[2];
  if (!(ratios[0] > 0.0 && ratios[1] > 0.0 && ratios[2] > 0.0) ||
      std::abs(total - 1.0) > 1e-9) {
    throw ContractError("split_three_way: ratios must be positive and sum to 1");
  }
  if (items.empty()) throw ContractError("split_three_way: nothing to split");
  std::shuffle(items.begin(), items.end(), rng);
  auto n = static_cast<double>(items.size());
  auto b1 = static_cast<std::size_t>(std::llround(n * ratios[0]));
  auto b2 = static_cast<std::size_t>(std::llround(n * (ratios[0] + ratios[1])));
  b1 = std::min(b1, items.size());
  b2 = std::min(std::max(b2, b1), items.size());
  std::array<std::vector<T>, 3> out;
  out[0].assign(items.begin(), items.begin() + b1);
  out[1].assign(items.begin() + b1, items.begin() + b2);
  out[2].assign(items.begin() + b2, items.end());
  return out;
}

}  // namespace kge
