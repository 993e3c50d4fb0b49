#pragma once

#include <string>

#include "kge/model.hpp"
#include "kge/synth.hpp"
#include "kge/training.hpp"

namespace kge {

// Which literal channels feed the fusion gate. Disabled channels are zeroed
// (table widths stay fixed so parameter shapes are comparable across runs).
struct LiteralFlags {
  bool use_numeric = true;
  bool use_text = true;
};

LiteralFlags literal_flags_from_string(const std::string& s);  // none|numeric|text|both
std::string to_string(const LiteralFlags& f);

// One experiment = one config file. CLI flags override individual fields
// after the file is parsed.
struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "runs/default";
  std::string data_csv;    // record corpus consumed by build-kg
  std::string kg_path;     // bundle produced by build-kg
  std::string pretrained;  // checkpoint directory; empty = train from scratch

  LayerConfig model;
  LiteralFlags literals;
  Index text_width = 32;  // subword embedding width for text literals

  TrainRunConfig pretrain;  // seed is filled from the top-level seed
  TrainRunConfig finetune{.negatives = 1};  // balanced pairs by default

  double train_ratio = 0.6;
  double val_ratio = 0.2;
  double test_ratio = 0.2;

  SynthConfig synth;  // seed is filled from the top-level seed

  void validate() const;
};

// Parses a config file; missing keys keep their defaults, unknown keys are
// config errors. A missing or unreadable file is an I/O error.
ExperimentConfig load_experiment_config(const std::string& path);

// Parse from a JSON string (file contents).
ExperimentConfig parse_experiment_config(const std::string& text);

std::string to_json(const ExperimentConfig& cfg);

}  // namespace kge
