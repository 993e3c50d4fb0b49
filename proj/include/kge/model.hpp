#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kge/adam.hpp"
#include "kge/graph.hpp"
#include "kge/ops.hpp"
#include "kge/tensor.hpp"

namespace kge {

enum class Aggregator { Gcn, GraphSage, BiInteraction, Gin };

const char* to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& s);

// One width knob drives the whole network: entity and relation embeddings,
// the gate output, every propagation layer and the final representation all
// share `dim`. The gate's Hadamard blend with the raw embedding and the
// shared square attention matrix force these widths to be equal anyway.
struct LayerConfig {
  Aggregator aggregator = Aggregator::BiInteraction;
  int layers = 1;
  int dim = 300;
  double dropout = 0.1;
  bool residual_identity = false;
  double alpha = 0.1;       // weight of the initial representation
  double lambda_rc = 4.0;   // beta_l = log(lambda_rc / (1 + l)), clamped to [0,1]
  double gin_epsilon = 0.0;
  bool gin_epsilon_learnable = false;

  void validate() const;
};

// Residual interpolation coefficient for 1-based layer l. Logs one warning
// per process when the raw value falls outside [0,1] and is clamped.
double beta_for_layer(double lambda_rc, int layer, bool* clamped = nullptr);

// Directed propagation edges: each kept triple (h, r, t) contributes
// h <- t with relation id r, and t <- h with the inverse id r + R. Edge order
// is sorted by (dst, src, rel) so downstream passes are deterministic.
struct PropGraph {
  Index n_entities = 0;
  Index n_relation_dirs = 0;
  std::vector<Index> dst, src, rel;

  std::size_t edge_count() const { return dst.size(); }
  // keep, when given, masks kg.triples() by index.
  static PropGraph from_kg(const KnowledgeGraph& kg, const std::vector<char>* keep = nullptr);
};

struct GateWeights {
  Tensor we;  // dim x dim
  Tensor wn;  // numeric width x dim
  Tensor wt;  // text width x dim
  Tensor b;   // 1 x dim
  Tensor w;   // (dim + numeric + text) x dim
};

struct LayerWeights {
  Tensor w;                       // GCN: dim x dim, GraphSAGE: 2*dim x dim
  Tensor w1, w2;                  // Bi-Interaction
  Tensor fc1_w, fc1_b, fc2_w, fc2_b;  // GIN stack
  Tensor eps;                     // GIN, 1x1, only when learnable
  Tensor res_w;                   // identity-mapping weight, when residual is on
};

struct ModelDims {
  Index n_entities = 0;
  Index n_relations = 0;  // canonical relations; embeddings hold 2x rows
  Index dim = 0;
  Index numeric_width = 0;
  Index text_width = 0;
};

struct ModelParams {
  ModelDims dims;
  Tensor entity_emb;    // n_entities x dim
  Tensor relation_emb;  // 2 * n_relations x dim (canonical rows first)
  GateWeights gate;
  Tensor attn_w;  // dim x dim, shared across layers and relations
  std::vector<LayerWeights> layers;
  Tensor head_w;  // (K * dim) x dim
  Tensor head_b;  // 1 x dim
  std::vector<Tensor> rel_proj;  // per canonical relation, dim x dim
  Tensor clf_w1;  // 2*dim x dim
  Tensor clf_b1;  // 1 x dim
  Tensor clf_w2;  // dim x 1
  Tensor clf_b2;  // 1 x 1

  static ModelParams init(const ModelDims& dims, const LayerConfig& cfg, std::uint64_t seed);
  // Stable iteration order; names key checkpoints and optimiser moments.
  std::vector<NamedParam> named_params();
  ModelParams clone() const;
  bool all_finite() const;
};

// Eq-level building blocks. All representations are row vectors, so tables
// of shape (rows x dim) and single vectors (1 x dim) go through the same
// code paths.

// Gate fusion of structural embedding e with numeric and text features.
Tensor fuse_literals(const Tensor& e, const Tensor& n, const Tensor& t, const GateWeights& g);

// Raw attention logit(s) for aligned rows of h, r, t.
Tensor attention_score(const Tensor& h, const Tensor& r, const Tensor& t, const Tensor& attn_w);

// Softmax over a kx1 column of scores belonging to one neighborhood.
Tensor normalize_attention(const Tensor& scores);

// Weighted sum of neighbor representations: weights kx1, reps kxd -> 1xd.
Tensor aggregate_neighborhood(const Tensor& weights, const Tensor& neighbor_reps);

// Full attention-weighted message table: for every entity the sum of
// softmax-weighted neighbor representations over its incident edges;
// entities without edges get a zero row.
Tensor attentive_messages(const PropGraph& g, const Tensor& h, const Tensor& relation_emb,
                          const Tensor& attn_w);

Tensor apply_aggregator(const Tensor& h, const Tensor& h_n, Aggregator kind,
                        const LayerWeights& lw, const LayerConfig& cfg);

// Initial-residual + identity-mapping wrapper around the aggregated message
// matrix m: leaky_relu(((1-alpha) m + alpha h0) ((1-beta) I + beta w)).
Tensor residual_identity(const Tensor& m, const Tensor& h0, double alpha, double beta,
                         const Tensor& w_res);

Tensor final_representation(const std::vector<Tensor>& layer_outputs, const Tensor& w_out,
                            const Tensor& b_out);

struct ForwardResult {
  Tensor h0;
  std::vector<Tensor> layer_outputs;
  Tensor final;  // n_entities x dim
};

// Fuse, K propagation layers, concat head. numeric/text are constant feature
// tables aligned with entity ids. rng is only consulted when training and
// dropout > 0.
ForwardResult forward(const PropGraph& g, const Matrix& numeric, const Matrix& text,
                      ModelParams& params, const LayerConfig& cfg, bool training = false,
                      std::mt19937_64* rng = nullptr);

}  // namespace kge
