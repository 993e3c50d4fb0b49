#include "kge/records.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace kge {

namespace {

using nlohmann::json;

const std::vector<std::string>& field_names() {
  static const std::vector<std::string> names = {
      "record_id", "animal_id", "species",      "breed",        "gender",
      "age",       "weight",    "symptom",      "disease",      "disease_category",
      "prescription", "drug_code", "treatment", "treatment_code", "comment"};
  return names;
}

std::optional<double> parse_double(const std::string& s, bool& ok) {
  ok = true;
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    if (pos != s.size()) {
      ok = false;
      return std::nullopt;
    }
    return v;
  } catch (const std::exception&) {
    ok = false;
    return std::nullopt;
  }
}

std::optional<std::string> opt_text(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

// Field map -> record, appending an issue and returning nullopt on the first
// problem with the row.
std::optional<EmrRecord> make_record(
    const std::unordered_map<std::string, std::string>& fields, std::size_t line,
    std::vector<ParseIssue>& issues) {
  auto get = [&fields](const char* name) -> std::string {
    auto it = fields.find(name);
    return it == fields.end() ? std::string() : it->second;
  };

  EmrRecord r;
  r.record_id = get("record_id");
  r.animal_id = get("animal_id");
  if (r.record_id.empty()) {
    issues.push_back({line, "missing record_id"});
    return std::nullopt;
  }
  if (r.animal_id.empty()) {
    issues.push_back({line, "missing animal_id"});
    return std::nullopt;
  }
  r.species = opt_text(get("species"));
  r.breed = opt_text(get("breed"));
  r.gender = opt_text(get("gender"));
  r.symptom = opt_text(get("symptom"));
  r.disease = opt_text(get("disease"));
  r.disease_category = opt_text(get("disease_category"));
  r.prescription = opt_text(get("prescription"));
  r.drug_code = opt_text(get("drug_code"));
  r.treatment = opt_text(get("treatment"));
  r.treatment_code = opt_text(get("treatment_code"));
  r.comment = opt_text(get("comment"));

  bool ok = true;
  r.age = parse_double(get("age"), ok);
  if (!ok) {
    issues.push_back({line, "age is not numeric: '" + get("age") + "'"});
    return std::nullopt;
  }
  if (r.age && *r.age < 0.0) {
    issues.push_back({line, "age must be nonnegative"});
    return std::nullopt;
  }
  r.weight = parse_double(get("weight"), ok);
  if (!ok) {
    issues.push_back({line, "weight is not numeric: '" + get("weight") + "'"});
    return std::nullopt;
  }
  if (r.weight && *r.weight <= 0.0) {
    issues.push_back({line, "weight must be positive"});
    return std::nullopt;
  }
  return r;
}

struct CsvRow {
  std::size_t line;
  std::vector<std::string> fields;
};

// Full-text CSV scan; quoted fields may contain commas, quotes ("") and
// newlines, so rows cannot be split on line breaks first.
std::vector<CsvRow> scan_csv(const std::string& text) {
  std::vector<CsvRow> rows;
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  bool row_dirty = false;
  std::size_t line = 1;
  std::size_t row_start_line = 1;

  auto end_field = [&]() {
    fields.push_back(cur);
    cur.clear();
  };
  auto end_row = [&]() {
    end_field();
    rows.push_back({row_start_line, std::move(fields)});
    fields = {};
    row_dirty = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        cur.push_back(c);
      }
      row_dirty = true;
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_dirty = true;
        break;
      case ',':
        end_field();
        row_dirty = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_dirty || !cur.empty() || !fields.empty()) end_row();
        ++line;
        row_start_line = line;
        break;
      default:
        cur.push_back(c);
        row_dirty = true;
        break;
    }
  }
  if (row_dirty || !cur.empty() || !fields.empty()) end_row();
  return rows;
}

ParseResult parse_csv(const std::string& text) {
  ParseResult out;
  std::vector<CsvRow> rows = scan_csv(text);
  if (rows.empty()) return out;

  const std::vector<std::string>& known = field_names();
  std::vector<std::string> header = rows.front().fields;
  for (const std::string& h : header) {
    if (std::find(known.begin(), known.end(), h) == known.end()) {
      throw IoError("unknown CSV column '" + h + "'");
    }
  }
  auto has = [&header](const char* name) {
    return std::find(header.begin(), header.end(), name) != header.end();
  };
  if (!has("record_id") || !has("animal_id")) {
    throw IoError("CSV header must contain record_id and animal_id");
  }

  std::unordered_set<std::string> seen_ids;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const CsvRow& row = rows[i];
    if (row.fields.size() != header.size()) {
      out.issues.push_back({row.line, "expected " + std::to_string(header.size()) +
                                          " fields, got " + std::to_string(row.fields.size())});
      continue;
    }
    std::unordered_map<std::string, std::string> fields;
    for (std::size_t c = 0; c < header.size(); ++c) fields[header[c]] = row.fields[c];
    auto rec = make_record(fields, row.line, out.issues);
    if (!rec) continue;
    if (!seen_ids.insert(rec->record_id).second) {
      out.issues.push_back({row.line, "duplicate record_id '" + rec->record_id + "'"});
      continue;
    }
    out.records.push_back(std::move(*rec));
  }
  return out;
}

ParseResult parse_jsonl(const std::string& text) {
  ParseResult out;
  const std::vector<std::string>& known = field_names();
  std::unordered_set<std::string> seen_ids;
  std::istringstream in(text);
  std::string line_text;
  std::size_t line = 0;
  while (std::getline(in, line_text)) {
    ++line;
    if (line_text.empty() || line_text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj = json::parse(line_text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      out.issues.push_back({line, "not a JSON object"});
      continue;
    }
    bool bad = false;
    std::unordered_map<std::string, std::string> fields;
    for (const auto& [key, value] : obj.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        out.issues.push_back({line, "unknown key '" + key + "'"});
        bad = true;
        break;
      }
      if (value.is_null()) continue;
      if (value.is_string()) {
        fields[key] = value.get<std::string>();
      } else if (value.is_number()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", value.get<double>());
        fields[key] = buf;
      } else {
        out.issues.push_back({line, "key '" + key + "' has a non-scalar value"});
        bad = true;
        break;
      }
    }
    if (bad) continue;
    auto rec = make_record(fields, line, out.issues);
    if (!rec) continue;
    if (!seen_ids.insert(rec->record_id).second) {
      out.issues.push_back({line, "duplicate record_id '" + rec->record_id + "'"});
      continue;
    }
    out.records.push_back(std::move(*rec));
  }
  return out;
}

void enforce_issue_budget(const ParseResult& r) {
  std::size_t attempted = r.records.size() + r.issues.size();
  if (attempted == 0) return;
  if (static_cast<double>(r.issues.size()) > 0.1 * static_cast<double>(attempted)) {
    std::string msg = std::to_string(r.issues.size()) + " of " + std::to_string(attempted) +
                      " rows malformed";
    for (std::size_t i = 0; i < r.issues.size() && i < 5; ++i) {
      msg += "; line " + std::to_string(r.issues[i].line) + ": " + r.issues[i].reason;
    }
    throw IoError(msg);
  }
}

}  // namespace

std::vector<std::string> split_csv_row(const std::string& row) {
  std::vector<CsvRow> rows = scan_csv(row);
  if (rows.empty()) return {};
  return rows.front().fields;
}

ParseResult parse_records_text(const std::string& text, RecordFormat format) {
  ParseResult out = format == RecordFormat::Csv ? parse_csv(text) : parse_jsonl(text);
  enforce_issue_budget(out);
  return out;
}

ParseResult parse_records(const std::string& path, RecordFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open record file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading record file: " + path);
  return parse_records_text(buf.str(), format);
}

const char* age_band(double age_years) {
  if (age_years < 1.0) return "Infancy";
  if (age_years < 7.0) return "Adult";
  if (age_years < 13.0) return "Old-age";
  return "Super-aged";
}

std::string numeric_entity_name(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

KnowledgeGraph build_kg(const std::vector<EmrRecord>& records) {
  if (records.empty()) throw ContractError("build_kg: no records");
  KnowledgeGraph kg;
  const RelationId r_a = kg.relation_id("r_A");
  const RelationId r_d = kg.relation_id("r_D");
  const RelationId r_y = kg.relation_id("r_Y");
  const RelationId r_p = kg.relation_id("r_P");
  const RelationId r_t = kg.relation_id("r_T");
  const RelationId r_c = kg.relation_id("r_C");
  const RelationId r_e = kg.relation_id("r_E");
  const RelationId r_u = kg.relation_id("r_U");
  const RelationId r_w = kg.relation_id("r_W");
  const RelationId r_g = kg.relation_id("r_G");
  const RelationId r_b = kg.relation_id("r_B");
  const RelationId r_s = kg.relation_id("r_S");
  const RelationId r_i = kg.relation_id("r_I");
  const RelationId r_r = kg.relation_id("r_R");
  const RelationId r_o = kg.relation_id("r_O");

  for (const EmrRecord& rec : records) {
    if (kg.find(EntityKind::MedicalRecord, rec.record_id)) {
      throw ContractError("build_kg: duplicate record_id '" + rec.record_id + "'");
    }
    EntityId m = kg.add_entity(EntityKind::MedicalRecord, rec.record_id);
    EntityId animal = kg.add_entity(EntityKind::Animal, rec.animal_id);
    kg.add_triple(m, r_a, animal);

    if (rec.species) {
      EntityId s = kg.add_entity(EntityKind::Species, *rec.species);
      kg.add_triple(animal, r_s, s);
    }
    if (rec.breed) {
      EntityId b = kg.add_entity(EntityKind::Breed, *rec.breed);
      kg.add_triple(animal, r_b, b);
    }
    if (rec.gender) {
      EntityId g = kg.add_entity(EntityKind::Gender, *rec.gender);
      kg.add_triple(m, r_g, g);
    }
    if (rec.disease) {
      EntityId d = kg.add_entity(EntityKind::Disease, *rec.disease,
                                 AttributePayload::text_value(*rec.disease));
      kg.add_triple(m, r_d, d);
      if (rec.disease_category) {
        EntityId cat = kg.add_entity(EntityKind::DiseaseCategory, *rec.disease_category);
        kg.add_triple(d, r_i, cat);
      }
    }
    if (rec.symptom) {
      EntityId y = kg.add_entity(EntityKind::Symptom, *rec.symptom,
                                 AttributePayload::text_value(*rec.symptom));
      kg.add_triple(m, r_y, y);
    }
    if (rec.prescription) {
      EntityId p = kg.add_entity(EntityKind::Prescription, *rec.prescription,
                                 AttributePayload::text_value(*rec.prescription));
      kg.add_triple(m, r_p, p);
      if (rec.drug_code) {
        EntityId dr = kg.add_entity(EntityKind::Drugs, *rec.drug_code);
        kg.add_triple(p, r_r, dr);
      }
    }
    if (rec.treatment) {
      EntityId t = kg.add_entity(EntityKind::Treatment, *rec.treatment,
                                 AttributePayload::text_value(*rec.treatment));
      kg.add_triple(m, r_t, t);
      if (rec.treatment_code) {
        EntityId tc = kg.add_entity(EntityKind::TreatmentCode, *rec.treatment_code);
        kg.add_triple(t, r_o, tc);
      }
    }
    if (rec.comment) {
      EntityId c = kg.add_entity(EntityKind::Comment, *rec.comment,
                                 AttributePayload::text_value(*rec.comment));
      kg.add_triple(m, r_c, c);
    }
    if (rec.age) {
      EntityId a = kg.add_entity(EntityKind::Age, numeric_entity_name(*rec.age),
                                 AttributePayload::numeric(*rec.age));
      kg.add_triple(m, r_e, a);
      EntityId band = kg.add_entity(EntityKind::AgeGroup, age_band(*rec.age));
      kg.add_triple(m, r_u, band);
    }
    if (rec.weight) {
      EntityId w = kg.add_entity(EntityKind::Weight, numeric_entity_name(*rec.weight),
                                 AttributePayload::numeric(*rec.weight));
      kg.add_triple(m, r_w, w);
    }
  }
  kg.freeze();
  return kg;
}

}  // namespace kge
