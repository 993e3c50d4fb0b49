#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kge/graph.hpp"
#include "kge/metrics.hpp"
#include "kge/model.hpp"

namespace kge {

// One ranking pair: the negative shares head and relation with its positive
// and differs only in the (corrupted) tail.
struct PretrainPair {
  Triple positive;
  Triple negative;
};

struct FinetunePair {
  EntityId record = 0;
  EntityId disease = 0;
  double label = 0.0;  // 1 iff (record, r_D, disease) is a graph triple
};

struct TrainRunConfig {
  int batch_size = 1024;
  int epochs = 100;
  int patience = 10;
  int negatives = 3;  // per positive
  double lr = 1e-3;
  double lambda_reg = 1e-5;
  std::uint64_t seed = 42;

  void validate() const;
};

// Translation-style plausibility: rows of h/t are projected through the
// per-relation matrix, and the squared L2 residual against the relation
// embedding is the score. Lower means more plausible. All arguments are
// row-aligned tables: h, r, t are k x d, w_r is the d x d projection shared
// by every row (single-relation form).
Tensor triplet_score(const Tensor& h, const Tensor& r, const Tensor& t, const Tensor& w_r);

// Mixed-relation batch: scores triples[i] using entity_repr rows and the
// matching per-relation projection, returning a k x 1 column in input order.
Tensor triplet_scores(const Tensor& entity_repr, const Tensor& relation_emb,
                      const std::vector<Tensor>& rel_proj, const std::vector<Triple>& triples);

// Mean softplus(positive - negative) over aligned score columns; the margin
// objective that pushes positives below their negatives.
Tensor ranking_loss(const Tensor& positive_scores, const Tensor& negative_scores);

// Sum of squared entries over every named parameter.
Tensor l2_penalty(ModelParams& params);

// Two-layer classifier head over the projected pair, squashed to (0,1).
Tensor finetune_scores(const Tensor& entity_repr, const Tensor& w_r, ModelParams& params,
                       const std::vector<FinetunePair>& pairs);

// Mean binary cross entropy with predictions clamped to [1e-12, 1 - 1e-12].
Tensor bce_loss(const Tensor& probabilities, const std::vector<double>& labels);

// One positive pair per diagnosis triple plus `negatives_per_positive`
// corrupted-disease pairs per positive. The subset overload restricts the
// positives to the given triple indices (all of which must be r_D triples).
std::vector<FinetunePair> build_finetune_pairs(const KnowledgeGraph& kg,
                                               int negatives_per_positive, std::mt19937_64& rng);
std::vector<FinetunePair> build_finetune_pairs(const KnowledgeGraph& kg,
                                               const std::vector<std::size_t>& triple_indices,
                                               int negatives_per_positive, std::mt19937_64& rng);

struct EpochStats {
  std::string phase;
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double acc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double val_loss = 0.0;  // pretraining validation objective
  long long wall_ms = 0;
};

struct TrainResult {
  ModelParams best;
  std::vector<EpochStats> history;
  int best_epoch = 0;  // 1-based; 0 when no epoch completed
  double best_metric = 0.0;
  bool diverged = false;
};

// Shared inputs for both phases: the visible propagation graph plus the
// literal feature tables aligned with entity ids.
struct GraphInputs {
  const PropGraph* graph = nullptr;
  const Matrix* numeric = nullptr;
  const Matrix* text = nullptr;
};

// Self-supervised phase. Negatives for the training triples are resampled
// every epoch (seeded by epoch index); validation pairs are drawn once so the
// early-stopping objective stays comparable across epochs. Keeps the best
// (lowest validation loss) parameters; a non-finite loss stops the run with
// `diverged` set and the best parameters preserved.
TrainResult run_pretrain(const KnowledgeGraph& kg, const GraphInputs& in, ModelParams& params,
                         const LayerConfig& lcfg, const TrainRunConfig& rcfg,
                         const std::vector<std::size_t>& train_triples,
                         const std::vector<std::size_t>& val_triples);

// Supervised phase over fixed pair sets. Early-stops on validation F1 and
// keeps the best parameters.
TrainResult run_finetune(const KnowledgeGraph& kg, const GraphInputs& in, ModelParams& params,
                         const LayerConfig& lcfg, const TrainRunConfig& rcfg,
                         const std::vector<FinetunePair>& train_pairs,
                         const std::vector<FinetunePair>& val_pairs);

// Evaluation-mode forward + scoring helpers.
std::vector<double> eval_triple_scores(const GraphInputs& in, ModelParams& params,
                                       const LayerConfig& lcfg, const std::vector<Triple>& triples);
std::vector<double> eval_pair_probabilities(const KnowledgeGraph& kg, const GraphInputs& in,
                                            ModelParams& params, const LayerConfig& lcfg,
                                            const std::vector<FinetunePair>& pairs);
MetricsReport evaluate_pairs(const KnowledgeGraph& kg, const GraphInputs& in, ModelParams& params,
                             const LayerConfig& lcfg, const std::vector<FinetunePair>& pairs);

}  // namespace kge
