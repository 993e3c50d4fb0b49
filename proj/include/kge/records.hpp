#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kge/graph.hpp"

namespace kge {

// One row of the medical-record input. Only record_id and animal_id are
// mandatory; every clinical field may be absent.
struct EmrRecord {
  std::string record_id;
  std::string animal_id;
  std::optional<std::string> species;
  std::optional<std::string> breed;
  std::optional<std::string> gender;
  std::optional<double> age;     // years
  std::optional<double> weight;  // kg
  std::optional<std::string> symptom;
  std::optional<std::string> disease;
  std::optional<std::string> disease_category;
  std::optional<std::string> prescription;
  std::optional<std::string> drug_code;
  std::optional<std::string> treatment;
  std::optional<std::string> treatment_code;
  std::optional<std::string> comment;
};

enum class RecordFormat { Csv, Jsonl };

struct ParseIssue {
  std::size_t line = 0;  // 1-based position in the file
  std::string reason;
};

struct ParseResult {
  std::vector<EmrRecord> records;
  std::vector<ParseIssue> issues;
};

// Reads a whole record file. Malformed rows are collected into the issue
// report instead of being dropped silently; when more than 10% of the rows
// are malformed the file is rejected with an IoError that carries the first
// issues.
ParseResult parse_records(const std::string& path, RecordFormat format);
ParseResult parse_records_text(const std::string& text, RecordFormat format);

// Age band names used for the AgeGroup entity.
const char* age_band(double age_years);

// Builds the heterogeneous graph: one MedicalRecord entity per record, one
// Animal per distinct animal_id, shared value entities deduplicated, and the
// derived AgeGroup entity. The returned graph is frozen.
KnowledgeGraph build_kg(const std::vector<EmrRecord>& records);

// Canonical entity name for a numeric payload, shared by build and lookup.
std::string numeric_entity_name(double v);

// RFC-4180-style CSV row splitter (quoted fields, embedded commas/newlines).
// Exposed for tests.
std::vector<std::string> split_csv_row(const std::string& row);

}  // namespace kge
