#include "kge/graph.hpp"

#include <algorithm>

namespace kge {

namespace {

constexpr const char* kKindNames[kEntityKindCount] = {
    "MedicalRecord", "Animal",  "Species",       "Breed",   "Disease", "Symptom",
    "Drugs",         "Prescription", "TreatmentCode", "Treatment", "Comment", "Age",
    "AgeGroup",      "Gender",  "Weight",        "DiseaseCategory",
};

bool text_allowed(EntityKind k) {
  switch (k) {
    case EntityKind::Disease:
    case EntityKind::Symptom:
    case EntityKind::Prescription:
    case EntityKind::Treatment:
    case EntityKind::Comment:
      return true;
    default:
      return false;
  }
}

bool numeric_allowed(EntityKind k) {
  return k == EntityKind::Age || k == EntityKind::Weight;
}

std::string entity_key(EntityKind kind, const std::string& name) {
  std::string key;
  key.reserve(name.size() + 2);
  key.push_back(static_cast<char>(kind));
  key.push_back('/');
  key += name;
  return key;
}

std::string tails_key(EntityId head, RelationId rel) {
  return std::to_string(head) + "/" + std::to_string(rel);
}

}  // namespace

const char* to_string(EntityKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<EntityKind> entity_kind_from_string(const std::string& s) {
  for (int i = 0; i < kEntityKindCount; ++i) {
    if (s == kKindNames[i]) return static_cast<EntityKind>(i);
  }
  return std::nullopt;
}

const std::vector<RelationType>& default_relation_schema() {
  static const std::vector<RelationType> schema = {
      {"r_A", EntityKind::MedicalRecord, EntityKind::Animal},
      {"r_D", EntityKind::MedicalRecord, EntityKind::Disease},
      {"r_Y", EntityKind::MedicalRecord, EntityKind::Symptom},
      {"r_P", EntityKind::MedicalRecord, EntityKind::Prescription},
      {"r_T", EntityKind::MedicalRecord, EntityKind::Treatment},
      {"r_C", EntityKind::MedicalRecord, EntityKind::Comment},
      {"r_E", EntityKind::MedicalRecord, EntityKind::Age},
      {"r_U", EntityKind::MedicalRecord, EntityKind::AgeGroup},
      {"r_W", EntityKind::MedicalRecord, EntityKind::Weight},
      {"r_G", EntityKind::MedicalRecord, EntityKind::Gender},
      {"r_B", EntityKind::Animal, EntityKind::Breed},
      {"r_S", EntityKind::Animal, EntityKind::Species},
      {"r_I", EntityKind::Disease, EntityKind::DiseaseCategory},
      {"r_R", EntityKind::Prescription, EntityKind::Drugs},
      {"r_O", EntityKind::Treatment, EntityKind::TreatmentCode},
  };
  return schema;
}

std::size_t KnowledgeGraph::TripleKeyHash::operator()(const TripleKey& k) const {
  std::size_t h = std::hash<EntityId>()(k.head);
  h ^= std::hash<std::int64_t>()(k.relation) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= std::hash<EntityId>()(k.tail) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

KnowledgeGraph::KnowledgeGraph(std::vector<RelationType> schema) : schema_(std::move(schema)) {
  if (schema_.empty()) throw SchemaError("relation schema must not be empty");
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    auto [it, inserted] = relation_ids_.emplace(schema_[i].name, static_cast<RelationId>(i));
    if (!inserted) throw SchemaError("duplicate relation name '" + schema_[i].name + "'");
  }
}

void KnowledgeGraph::require_frozen(const char* what) const {
  if (!frozen_) throw ContractError(std::string(what) + " requires a frozen graph");
}

void KnowledgeGraph::require_mutable(const char* what) const {
  if (frozen_) throw ContractError(std::string(what) + " on a frozen graph");
}

EntityId KnowledgeGraph::add_entity(EntityKind kind, const std::string& name,
                                    AttributePayload payload) {
  require_mutable("add_entity");
  if (name.empty()) throw ContractError("entity name must not be empty");
  if (payload.kind == AttributePayload::Kind::Text && !text_allowed(kind)) {
    throw SchemaError(std::string("text payload not allowed on ") + to_string(kind));
  }
  if (payload.kind == AttributePayload::Kind::Numeric && !numeric_allowed(kind)) {
    throw SchemaError(std::string("numeric payload not allowed on ") + to_string(kind));
  }
  std::string key = entity_key(kind, name);
  auto it = entity_ids_.find(key);
  if (it != entity_ids_.end()) return it->second;
  EntityId id = static_cast<EntityId>(entities_.size());
  entities_.push_back(Entity{id, kind, name, std::move(payload)});
  entity_ids_.emplace(std::move(key), id);
  return id;
}

void KnowledgeGraph::add_triple(EntityId head, RelationId relation, EntityId tail) {
  require_mutable("add_triple");
  if (head < 0 || head >= static_cast<EntityId>(entities_.size()) || tail < 0 ||
      tail >= static_cast<EntityId>(entities_.size())) {
    throw ContractError("add_triple: entity id out of range");
  }
  if (head == tail) throw ContractError("add_triple: self-loops are not allowed");
  if (relation < 0 || relation >= static_cast<RelationId>(schema_.size())) {
    throw SchemaError("add_triple: unknown relation id " + std::to_string(relation));
  }
  const RelationType& rt = schema_[relation];
  if (entities_[head].kind != rt.head || entities_[tail].kind != rt.tail) {
    throw SchemaError("triple violates signature of " + rt.name + " (" +
                      to_string(rt.head) + " -> " + to_string(rt.tail) + "), got " +
                      to_string(entities_[head].kind) + " -> " + to_string(entities_[tail].kind));
  }
  TripleKey key{head, relation, tail};
  if (triple_set_.count(key)) return;
  triple_set_.insert(key);
  triples_.push_back(Triple{head, relation, tail});
}

void KnowledgeGraph::freeze() {
  if (frozen_) return;
  frozen_ = true;
  incident_.assign(entities_.size(), {});
  for (std::size_t t = 0; t < triples_.size(); ++t) {
    incident_[triples_[t].head].push_back(t);
    incident_[triples_[t].tail].push_back(t);
  }
  for (const Entity& e : entities_) {
    by_kind_[static_cast<int>(e.kind)].push_back(e.id);
  }
  for (const Triple& t : triples_) {
    tails_index_[tails_key(t.head, t.relation)].push_back(t.tail);
  }
}

const Entity& KnowledgeGraph::entity(EntityId id) const {
  if (id < 0 || id >= static_cast<EntityId>(entities_.size())) {
    throw ContractError("entity id out of range: " + std::to_string(id));
  }
  return entities_[id];
}

std::optional<EntityId> KnowledgeGraph::find(EntityKind kind, const std::string& name) const {
  auto it = entity_ids_.find(entity_key(kind, name));
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

bool KnowledgeGraph::has_triple(EntityId head, RelationId relation, EntityId tail) const {
  return triple_set_.count(TripleKey{head, relation, tail}) > 0;
}

RelationId KnowledgeGraph::relation_id(const std::string& name) const {
  auto it = relation_ids_.find(name);
  if (it == relation_ids_.end()) throw SchemaError("unknown relation '" + name + "'");
  return it->second;
}

const std::vector<std::size_t>& KnowledgeGraph::incident_triples(EntityId id) const {
  require_frozen("incident_triples");
  entity(id);
  return incident_[id];
}

const std::vector<EntityId>& KnowledgeGraph::entities_of_kind(EntityKind kind) const {
  require_frozen("entities_of_kind");
  return by_kind_[static_cast<int>(kind)];
}

std::vector<EntityId> KnowledgeGraph::tails_of(EntityId head, RelationId relation) const {
  require_frozen("tails_of");
  auto it = tails_index_.find(tails_key(head, relation));
  if (it == tails_index_.end()) return {};
  return it->second;
}

std::vector<Triple> KnowledgeGraph::sample_negatives(const Triple& positive, int k,
                                                     std::mt19937_64& rng) const {
  require_frozen("sample_negatives");
  if (k < 1) throw ContractError("sample_negatives: k must be positive");
  if (!has_triple(positive.head, positive.relation, positive.tail)) {
    throw ContractError("sample_negatives: positive triple not in the graph");
  }
  const RelationType& rt = schema_[positive.relation];
  const std::vector<EntityId>& pool = by_kind_[static_cast<int>(rt.tail)];

  // Large pools almost never collide with true tails, so rejection sampling
  // avoids materializing the candidate list; small or crowded pools fall back
  // to the exact scan, which also decides whether k tails exist at all.
  if (pool.size() >= 64 && static_cast<std::size_t>(k) * 4 <= pool.size()) {
    std::vector<Triple> out;
    out.reserve(k);
    std::vector<EntityId> seen;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int attempts = 0; static_cast<int>(out.size()) < k && attempts < 16 * k + 64;
         ++attempts) {
      EntityId t = pool[pick(rng)];
      if (t == positive.head) continue;
      if (std::find(seen.begin(), seen.end(), t) != seen.end()) continue;
      if (has_triple(positive.head, positive.relation, t)) continue;
      seen.push_back(t);
      out.push_back(Triple{positive.head, positive.relation, t});
    }
    if (static_cast<int>(out.size()) == k) return out;
  }

  std::vector<EntityId> candidates;
  candidates.reserve(pool.size());
  for (EntityId t : pool) {
    if (t == positive.head) continue;
    if (has_triple(positive.head, positive.relation, t)) continue;
    candidates.push_back(t);
  }
  if (static_cast<int>(candidates.size()) < k) {
    throw SamplingError("sample_negatives: need " + std::to_string(k) + " corrupted tails for " +
                        rt.name + " but only " + std::to_string(candidates.size()) +
                        " candidates exist");
  }
  // Partial Fisher-Yates: draw k distinct candidates uniformly.
  std::vector<Triple> out;
  out.reserve(k);
  for (int j = 0; j < k; ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, candidates.size() - 1);
    std::size_t at = pick(rng);
    std::swap(candidates[j], candidates[at]);
    out.push_back(Triple{positive.head, positive.relation, candidates[j]});
  }
  return out;
}

}  // namespace kge
