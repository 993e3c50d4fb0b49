#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kge/checkpoint.hpp"
#include "kge/config.hpp"
#include "kge/kg_json.hpp"
#include "kge/training.hpp"

namespace kge {

// Everything derived from a bundle + config that the training phases consume.
// The bundle outlives the task; matrices and index lists are owned here.
struct TaskData {
  PropGraph graph;  // diagnosis edges of val/test records are masked out
  Matrix numeric;   // per-entity numeric features, zeroed when disabled
  Matrix text;      // per-entity text features, zeroed when disabled
  std::vector<std::size_t> pretrain_train;  // triple indices into kg.triples()
  std::vector<std::size_t> pretrain_val;    // held-out tenth for early stopping
  std::vector<FinetunePair> train_pairs;
  std::vector<FinetunePair> val_pairs;   // balanced 1:1
  std::vector<FinetunePair> test_pairs;  // balanced 1:1
  ModelDims dims;
};

// Derives the propagation graph, literal feature tables, pretraining triple
// split and classification pair sets. Deterministic in cfg.seed. Diagnosis
// triples of validation and test records are excluded from the propagation
// graph and from the pretraining triples so the targets never leak.
TaskData prepare_task(const KgBundle& bundle, const ExperimentConfig& cfg);

// One full in-process experiment on a prepared bundle: optional pretraining,
// fine-tuning, and a test-split evaluation of the best parameters. Shared by
// the ablation command and by tests.
struct RunOutcome {
  TrainResult pretrain;  // default-constructed when pretraining was skipped
  TrainResult finetune;
  MetricsReport test;
};

RunOutcome run_experiment(const KgBundle& bundle, const ExperimentConfig& cfg, bool do_pretrain);

// Effective file locations; unset paths default into cfg.out_dir.
std::string effective_data_csv(const ExperimentConfig& cfg);
std::string effective_kg_path(const ExperimentConfig& cfg);

// One history line per epoch: {phase, epoch, loss, acc, precision, recall,
// f1, wall_ms}.
void write_history_jsonl(const std::string& path, const std::vector<EpochStats>& history);

// Subcommand bodies. Each creates cfg.out_dir, writes its artifacts there and
// prints a one-line JSON summary to stdout; failures are reported by throwing
// (the CLI maps exception types to exit codes).
void cmd_synth(const ExperimentConfig& cfg);
void cmd_build_kg(const ExperimentConfig& cfg);
void cmd_pretrain(const ExperimentConfig& cfg);
void cmd_finetune(const ExperimentConfig& cfg);
void cmd_evaluate(const ExperimentConfig& cfg, const std::string& split);
void cmd_ablate(const ExperimentConfig& cfg, const std::string& scenario,
                std::vector<std::uint64_t> seeds);

}  // namespace kge
