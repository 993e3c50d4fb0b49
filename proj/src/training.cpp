#include "kge/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "kge/adam.hpp"
#include "kge/ops.hpp"

namespace kge {

namespace {

constexpr std::uint64_t kEpochStride = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kValSalt = 0x76616c5f73616c74ULL;

long long ms_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               t0)
      .count();
}

}  // namespace

void TrainRunConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (negatives < 1) throw ConfigError("negatives must be >= 1");
  if (lr < 0.0) throw ConfigError("lr must be nonnegative");
  if (lambda_reg < 0.0) throw ConfigError("lambda_reg must be nonnegative");
}

Tensor triplet_score(const Tensor& h, const Tensor& r, const Tensor& t, const Tensor& w_r) {
  Tensor projected_h = matmul(h, w_r);
  Tensor projected_t = matmul(t, w_r);
  Tensor residual = add(sub(projected_h, projected_t), r);
  return sum_rows(square(residual));
}

Tensor triplet_scores(const Tensor& entity_repr, const Tensor& relation_emb,
                      const std::vector<Tensor>& rel_proj, const std::vector<Triple>& triples) {
  if (triples.empty()) throw ContractError("triplet_scores: empty triple batch");
  const auto n_rel = static_cast<RelationId>(rel_proj.size());
  const Index k = static_cast<Index>(triples.size());

  Tensor out;
  bool first = true;
  for (RelationId rel = 0; rel < n_rel; ++rel) {
    std::vector<Index> heads, tails, rel_rows, positions;
    for (Index i = 0; i < k; ++i) {
      if (triples[i].relation != rel) continue;
      heads.push_back(static_cast<Index>(triples[i].head));
      tails.push_back(static_cast<Index>(triples[i].tail));
      rel_rows.push_back(rel);
      positions.push_back(i);
    }
    if (positions.empty()) continue;
    Tensor block = triplet_score(rows(entity_repr, heads), rows(relation_emb, rel_rows),
                                 rows(entity_repr, tails), rel_proj[rel]);
    Tensor placed = scatter_sum_rows(block, positions, k);
    out = first ? placed : add(out, placed);
    first = false;
  }
  if (first) throw ContractError("triplet_scores: a triple uses an out-of-range relation");
  for (const Triple& t : triples) {
    if (t.relation < 0 || t.relation >= n_rel) {
      throw ContractError("triplet_scores: a triple uses an out-of-range relation");
    }
  }
  return out;
}

Tensor ranking_loss(const Tensor& positive_scores, const Tensor& negative_scores) {
  if (positive_scores.rows() != negative_scores.rows() || positive_scores.cols() != 1 ||
      negative_scores.cols() != 1) {
    throw DimensionError("ranking_loss: expected aligned kx1 score columns");
  }
  return mean(softplus(sub(positive_scores, negative_scores)));
}

Tensor l2_penalty(ModelParams& params) {
  Tensor acc;
  bool first = true;
  for (const NamedParam& p : params.named_params()) {
    Tensor term = sum(square(*p.tensor));
    acc = first ? term : add(acc, term);
    first = false;
  }
  if (first) throw ContractError("l2_penalty: model has no parameters");
  return acc;
}

Tensor finetune_scores(const Tensor& entity_repr, const Tensor& w_r, ModelParams& params,
                       const std::vector<FinetunePair>& pairs) {
  if (pairs.empty()) throw ContractError("finetune_scores: empty pair batch");
  std::vector<Index> records, diseases;
  records.reserve(pairs.size());
  diseases.reserve(pairs.size());
  for (const FinetunePair& p : pairs) {
    records.push_back(static_cast<Index>(p.record));
    diseases.push_back(static_cast<Index>(p.disease));
  }
  Tensor ph = matmul(rows(entity_repr, records), w_r);
  Tensor pt = matmul(rows(entity_repr, diseases), w_r);
  Tensor hidden = leaky_relu(add_rowwise(matmul(concat_cols({ph, pt}), params.clf_w1),
                                         params.clf_b1));
  Tensor logit = add_rowwise(matmul(hidden, params.clf_w2), params.clf_b2);
  return sigmoid(logit);
}

Tensor bce_loss(const Tensor& probabilities, const std::vector<double>& labels) {
  if (probabilities.cols() != 1 ||
      probabilities.rows() != static_cast<Index>(labels.size())) {
    throw DimensionError("bce_loss: probabilities must be a kx1 column aligned with labels");
  }
  if (labels.empty()) throw ContractError("bce_loss: empty batch");
  Matrix y(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw ContractError("bce_loss: label at index " + std::to_string(i) + " is not 0 or 1");
    }
    y(static_cast<Index>(i), 0) = labels[i];
  }
  Tensor labels_t{y};
  Tensor ones = Tensor::constant(probabilities.rows(), 1, 1.0);
  Tensor p = clamp(probabilities, 1e-12, 1.0 - 1e-12);
  Tensor per_pair = add(hadamard(labels_t, log(p)),
                        hadamard(sub(ones, labels_t), log(sub(ones, p))));
  return scale(sum(per_pair), -1.0 / static_cast<double>(labels.size()));
}

std::vector<FinetunePair> build_finetune_pairs(const KnowledgeGraph& kg,
                                               int negatives_per_positive, std::mt19937_64& rng) {
  const RelationId r_d = kg.relation_id("r_D");
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < kg.triple_count(); ++i) {
    if (kg.triples()[i].relation == r_d) indices.push_back(i);
  }
  return build_finetune_pairs(kg, indices, negatives_per_positive, rng);
}

std::vector<FinetunePair> build_finetune_pairs(const KnowledgeGraph& kg,
                                               const std::vector<std::size_t>& triple_indices,
                                               int negatives_per_positive, std::mt19937_64& rng) {
  if (negatives_per_positive < 1) {
    throw ContractError("build_finetune_pairs: need at least one negative per positive");
  }
  if (triple_indices.empty()) {
    throw ContractError("build_finetune_pairs: no diagnosis triples");
  }
  const RelationId r_d = kg.relation_id("r_D");
  std::vector<FinetunePair> pairs;
  pairs.reserve(triple_indices.size() * (1 + negatives_per_positive));
  for (std::size_t i : triple_indices) {
    const Triple& t = kg.triples().at(i);
    if (t.relation != r_d) {
      throw ContractError("build_finetune_pairs: triple " + std::to_string(i) +
                          " is not a diagnosis triple");
    }
    pairs.push_back({t.head, t.tail, 1.0});
    for (const Triple& neg : kg.sample_negatives(t, negatives_per_positive, rng)) {
      pairs.push_back({neg.head, neg.tail, 0.0});
    }
  }
  return pairs;
}

namespace {

// Negatives per positive, clamped to what the tail pool can actually supply;
// triples whose pool is empty contribute no ranking pairs.
std::vector<PretrainPair> assemble_ranking_pairs(const KnowledgeGraph& kg,
                                                 const std::vector<std::size_t>& triple_indices,
                                                 int negatives, std::mt19937_64& rng) {
  std::vector<PretrainPair> pairs;
  for (std::size_t i : triple_indices) {
    const Triple& t = kg.triples().at(i);
    const EntityKind tail_kind = kg.schema().at(t.relation).tail;
    const auto pool = static_cast<long>(kg.entities_of_kind(tail_kind).size()) -
                      static_cast<long>(kg.tails_of(t.head, t.relation).size());
    const int k = static_cast<int>(std::min<long>(negatives, pool));
    if (k < 1) continue;
    for (const Triple& neg : kg.sample_negatives(t, k, rng)) {
      pairs.push_back({t, neg});
    }
  }
  return pairs;
}

void check_graph_inputs(const GraphInputs& in) {
  if (!in.graph || !in.numeric || !in.text) {
    throw ContractError("training: graph inputs are incomplete");
  }
}

ForwardResult eval_forward(const GraphInputs& in, ModelParams& params, const LayerConfig& lcfg) {
  Tape::Pause pause;
  return forward(*in.graph, *in.numeric, *in.text, params, lcfg, false, nullptr);
}

}  // namespace

TrainResult run_pretrain(const KnowledgeGraph& kg, const GraphInputs& in, ModelParams& params,
                         const LayerConfig& lcfg, const TrainRunConfig& rcfg,
                         const std::vector<std::size_t>& train_triples,
                         const std::vector<std::size_t>& val_triples) {
  rcfg.validate();
  lcfg.validate();
  check_graph_inputs(in);
  if (train_triples.empty()) throw ContractError("run_pretrain: no training triples");
  if (val_triples.empty()) throw ContractError("run_pretrain: no validation triples");

  // Fixed validation pairs keep the early-stopping objective comparable.
  std::mt19937_64 val_rng(rcfg.seed ^ kValSalt);
  std::vector<PretrainPair> val_pairs =
      assemble_ranking_pairs(kg, val_triples, rcfg.negatives, val_rng);
  if (val_pairs.empty()) throw ContractError("run_pretrain: validation triples have no negatives");

  TrainResult result;
  result.best = params.clone();
  result.best_metric = std::numeric_limits<double>::infinity();

  AdamState opt;
  opt.lr = rcfg.lr;
  int bad_epochs = 0;

  std::vector<std::size_t> order = train_triples;

  for (int epoch = 1; epoch <= rcfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(rcfg.seed ^ (kEpochStride * static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0.0;
    std::size_t pair_count = 0;
    try {
      std::shuffle(order.begin(), order.end(), rng);

      // A batch is `batch_size` positive triples, each paired with its own
      // sampled negatives, so one propagation pass serves every ranking pair
      // drawn from those positives.
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(rcfg.batch_size)) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(rcfg.batch_size));
        const std::vector<std::size_t> slice(order.begin() + static_cast<std::ptrdiff_t>(start),
                                             order.begin() + static_cast<std::ptrdiff_t>(stop));
        const std::vector<PretrainPair> pairs =
            assemble_ranking_pairs(kg, slice, rcfg.negatives, rng);
        if (pairs.empty()) continue;
        std::vector<Triple> pos, neg;
        pos.reserve(pairs.size());
        neg.reserve(pairs.size());
        for (const PretrainPair& p : pairs) {
          pos.push_back(p.positive);
          neg.push_back(p.negative);
        }

        Tensor final_repr = forward(*in.graph, *in.numeric, *in.text, params, lcfg, true, &rng)
                                .final;
        Tensor pos_scores = triplet_scores(final_repr, params.relation_emb, params.rel_proj, pos);
        Tensor neg_scores = triplet_scores(final_repr, params.relation_emb, params.rel_proj, neg);
        Tensor loss = add(ranking_loss(pos_scores, neg_scores),
                          scale(l2_penalty(params), rcfg.lambda_reg));
        if (!std::isfinite(loss.item())) {
          throw TrainingError("pretraining loss diverged at batch " +
                              std::to_string(start / rcfg.batch_size) + " of epoch " +
                              std::to_string(epoch));
        }
        loss_sum += loss.item() * static_cast<double>(pairs.size());
        pair_count += pairs.size();

        GradientMap grads = backward(loss);
        std::vector<NamedParam> named = params.named_params();
        adam_step(named, grads, opt);
      }
      if (pair_count == 0) throw ContractError("run_pretrain: no ranking pairs to train on");
    } catch (const TrainingError&) {
      Tape::active().clear();
      result.diverged = true;
      break;
    }

    // Validation under a frozen model.
    double val_loss;
    {
      Tensor final_repr = eval_forward(in, params, lcfg).final;
      Tape::Pause pause;
      std::vector<Triple> pos, neg;
      for (const PretrainPair& p : val_pairs) {
        pos.push_back(p.positive);
        neg.push_back(p.negative);
      }
      Tensor pos_scores = triplet_scores(final_repr, params.relation_emb, params.rel_proj, pos);
      Tensor neg_scores = triplet_scores(final_repr, params.relation_emb, params.rel_proj, neg);
      val_loss = ranking_loss(pos_scores, neg_scores).item();
    }

    EpochStats stats;
    stats.phase = "pretrain";
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(pair_count);
    stats.val_loss = val_loss;
    stats.wall_ms = ms_since(t0);
    result.history.push_back(stats);

    if (val_loss < result.best_metric) {
      result.best_metric = val_loss;
      result.best_epoch = epoch;
      result.best = params.clone();
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= rcfg.patience) break;
    }
  }
  return result;
}

TrainResult run_finetune(const KnowledgeGraph& kg, const GraphInputs& in, ModelParams& params,
                         const LayerConfig& lcfg, const TrainRunConfig& rcfg,
                         const std::vector<FinetunePair>& train_pairs,
                         const std::vector<FinetunePair>& val_pairs) {
  rcfg.validate();
  lcfg.validate();
  check_graph_inputs(in);
  if (train_pairs.empty()) throw ContractError("run_finetune: no training pairs");
  if (val_pairs.empty()) throw ContractError("run_finetune: no validation pairs");

  const RelationId r_d = kg.relation_id("r_D");
  TrainResult result;
  result.best = params.clone();
  result.best_metric = -std::numeric_limits<double>::infinity();

  AdamState opt;
  opt.lr = rcfg.lr;
  int bad_epochs = 0;

  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= rcfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(rcfg.seed ^ (kEpochStride * static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t pair_count = 0;
    try {
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(rcfg.batch_size)) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(rcfg.batch_size));
        std::vector<FinetunePair> batch;
        std::vector<double> labels;
        batch.reserve(stop - start);
        labels.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
          batch.push_back(train_pairs[order[i]]);
          labels.push_back(train_pairs[order[i]].label);
        }

        Tensor final_repr = forward(*in.graph, *in.numeric, *in.text, params, lcfg, true, &rng)
                                .final;
        Tensor probs = finetune_scores(final_repr, params.rel_proj.at(r_d), params, batch);
        Tensor loss = add(bce_loss(probs, labels), scale(l2_penalty(params), rcfg.lambda_reg));
        if (!std::isfinite(loss.item())) {
          throw TrainingError("fine-tuning loss diverged at batch " +
                              std::to_string(start / rcfg.batch_size) + " of epoch " +
                              std::to_string(epoch));
        }
        loss_sum += loss.item() * static_cast<double>(stop - start);
        pair_count += stop - start;

        GradientMap grads = backward(loss);
        std::vector<NamedParam> named = params.named_params();
        adam_step(named, grads, opt);
      }
    } catch (const TrainingError&) {
      Tape::active().clear();
      result.diverged = true;
      break;
    }

    EpochStats stats;
    stats.phase = "finetune";
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(pair_count);
    {
      Tensor final_repr = eval_forward(in, params, lcfg).final;
      Tape::Pause pause;
      Tensor probs = finetune_scores(final_repr, params.rel_proj.at(r_d), params, val_pairs);
      std::vector<double> labels, flat;
      for (const FinetunePair& p : val_pairs) labels.push_back(p.label);
      for (Index i = 0; i < probs.rows(); ++i) flat.push_back(probs.value()(i, 0));
      stats.val_loss = bce_loss(probs, labels).item();
      MetricsReport report = compute_metrics(confusion(flat, labels));
      stats.acc = report.acc;
      stats.precision = report.precision;
      stats.recall = report.recall;
      stats.f1 = report.f1;
    }
    stats.wall_ms = ms_since(t0);
    result.history.push_back(stats);

    if (stats.f1 > result.best_metric) {
      result.best_metric = stats.f1;
      result.best_epoch = epoch;
      result.best = params.clone();
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= rcfg.patience) break;
    }
  }
  return result;
}

std::vector<double> eval_triple_scores(const GraphInputs& in, ModelParams& params,
                                       const LayerConfig& lcfg,
                                       const std::vector<Triple>& triples) {
  check_graph_inputs(in);
  if (triples.empty()) throw ContractError("eval_triple_scores: empty triple list");
  Tensor final_repr = eval_forward(in, params, lcfg).final;
  Tape::Pause pause;
  Tensor scores = triplet_scores(final_repr, params.relation_emb, params.rel_proj, triples);
  std::vector<double> out;
  out.reserve(triples.size());
  for (Index i = 0; i < scores.rows(); ++i) out.push_back(scores.value()(i, 0));
  return out;
}

std::vector<double> eval_pair_probabilities(const KnowledgeGraph& kg, const GraphInputs& in,
                                            ModelParams& params, const LayerConfig& lcfg,
                                            const std::vector<FinetunePair>& pairs) {
  check_graph_inputs(in);
  if (pairs.empty()) throw ContractError("eval_pair_probabilities: empty pair list");
  const RelationId r_d = kg.relation_id("r_D");
  Tensor final_repr = eval_forward(in, params, lcfg).final;
  Tape::Pause pause;
  Tensor probs = finetune_scores(final_repr, params.rel_proj.at(r_d), params, pairs);
  std::vector<double> out;
  out.reserve(pairs.size());
  for (Index i = 0; i < probs.rows(); ++i) out.push_back(probs.value()(i, 0));
  return out;
}

MetricsReport evaluate_pairs(const KnowledgeGraph& kg, const GraphInputs& in, ModelParams& params,
                             const LayerConfig& lcfg, const std::vector<FinetunePair>& pairs) {
  std::vector<double> probs = eval_pair_probabilities(kg, in, params, lcfg, pairs);
  std::vector<double> labels;
  labels.reserve(pairs.size());
  for (const FinetunePair& p : pairs) labels.push_back(p.label);
  return compute_metrics(confusion(probs, labels));
}

}  // namespace kge
