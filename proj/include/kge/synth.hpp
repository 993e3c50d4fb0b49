#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kge/records.hpp"

namespace kge {

// In literal_dependent mode the disease is recoverable from literal features
// (signature symptom phrases, age/weight bands); in structural_only mode the
// literals are uniform noise and only graph structure (preferred drug and
// treatment codes) carries the disease.
enum class SignalMode { StructuralOnly, LiteralDependent };

struct SynthConfig {
  int n_animals = 100;
  int min_records_per_animal = 1;
  int max_records_per_animal = 3;
  int n_diseases = 10;
  int n_symptom_vocab = 160;
  std::uint64_t seed = 42;
  SignalMode signal_mode = SignalMode::LiteralDependent;
};

struct SynthCorpus {
  std::vector<EmrRecord> records;
  std::vector<std::string> disease_names;
  // Signature phrases per disease (literal_dependent); the remaining
  // vocabulary is the shared noise pool.
  std::vector<std::vector<std::string>> signatures;
  std::vector<std::string> noise_pool;
};

SynthCorpus generate_corpus(const SynthConfig& config);

std::string records_to_csv(const std::vector<EmrRecord>& records);
std::string records_to_jsonl(const std::vector<EmrRecord>& records);
void write_records_csv(const std::vector<EmrRecord>& records, const std::string& path);
void write_records_jsonl(const std::vector<EmrRecord>& records, const std::string& path);

SignalMode signal_mode_from_string(const std::string& s);
const char* to_string(SignalMode m);

}  // namespace kge
