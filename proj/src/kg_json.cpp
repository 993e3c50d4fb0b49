#include "kge/kg_json.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>

namespace kge {

namespace {

using nlohmann::ordered_json;

ordered_json payload_json(const AttributePayload& p) {
  switch (p.kind) {
    case AttributePayload::Kind::None:
      return nullptr;
    case AttributePayload::Kind::Numeric:
      return ordered_json{{"type", "numeric"}, {"value", p.number}};
    case AttributePayload::Kind::Text:
      return ordered_json{{"type", "text"}, {"value", p.text}};
  }
  return nullptr;
}

AttributePayload payload_from_json(const ordered_json& j) {
  if (j.is_null()) return AttributePayload::none();
  const std::string type = j.at("type").get<std::string>();
  if (type == "numeric") return AttributePayload::numeric(j.at("value").get<double>());
  if (type == "text") return AttributePayload::text_value(j.at("value").get<std::string>());
  throw IoError("kg bundle: unknown payload type '" + type + "'");
}

ordered_json optional_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

std::optional<double> optional_from_json(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

void save_kg_bundle(const std::string& path, const KgBundle& bundle) {
  if (!bundle.kg.frozen()) throw ContractError("save_kg_bundle: graph must be frozen");

  ordered_json j;
  ordered_json entities = ordered_json::array();
  for (const Entity& e : bundle.kg.entities()) {
    entities.push_back({{"kind", to_string(e.kind)},
                        {"name", e.name},
                        {"payload", payload_json(e.payload)}});
  }
  j["entities"] = std::move(entities);

  ordered_json triples = ordered_json::array();
  for (const Triple& t : bundle.kg.triples()) {
    triples.push_back({{"head", t.head},
                       {"relation", bundle.kg.schema().at(t.relation).name},
                       {"tail", t.tail}});
  }
  j["triples"] = std::move(triples);

  j["numeric_stats"] = {{"age_min", optional_json(bundle.stats.age_min)},
                        {"age_max", optional_json(bundle.stats.age_max)},
                        {"weight_min", optional_json(bundle.stats.weight_min)},
                        {"weight_max", optional_json(bundle.stats.weight_max)}};
  j["splits"] = {{"train", bundle.train_records},
                 {"val", bundle.val_records},
                 {"test", bundle.test_records}};

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("kg bundle: cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("kg bundle: short write to " + path);
}

KgBundle load_kg_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("kg bundle: cannot open " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("kg bundle: malformed JSON in " + path + ": " + e.what());
  }

  KgBundle bundle;
  try {
    EntityId expected = 0;
    for (const auto& ej : j.at("entities")) {
      const std::string kind_name = ej.at("kind").get<std::string>();
      auto kind = entity_kind_from_string(kind_name);
      if (!kind) throw IoError("kg bundle: unknown entity kind '" + kind_name + "'");
      EntityId got = bundle.kg.add_entity(*kind, ej.at("name").get<std::string>(),
                                          payload_from_json(ej.at("payload")));
      if (got != expected) {
        throw IoError("kg bundle: duplicate entity (kind, name) at index " +
                      std::to_string(expected));
      }
      ++expected;
    }
    for (const auto& tj : j.at("triples")) {
      bundle.kg.add_triple(tj.at("head").get<EntityId>(),
                           bundle.kg.relation_id(tj.at("relation").get<std::string>()),
                           tj.at("tail").get<EntityId>());
    }
    bundle.kg.freeze();

    const auto& stats = j.at("numeric_stats");
    bundle.stats.age_min = optional_from_json(stats.at("age_min"));
    bundle.stats.age_max = optional_from_json(stats.at("age_max"));
    bundle.stats.weight_min = optional_from_json(stats.at("weight_min"));
    bundle.stats.weight_max = optional_from_json(stats.at("weight_max"));

    const auto& splits = j.at("splits");
    bundle.train_records = splits.at("train").get<std::vector<std::string>>();
    bundle.val_records = splits.at("val").get<std::vector<std::string>>();
    bundle.test_records = splits.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("kg bundle: " + path + " is missing fields: " + e.what());
  }
  return bundle;
}

}  // namespace kge
