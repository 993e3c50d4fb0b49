#include "kge/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace kge {

const char* to_string(Aggregator a) {
  switch (a) {
    case Aggregator::Gcn: return "gcn";
    case Aggregator::GraphSage: return "sage";
    case Aggregator::BiInteraction: return "bi";
    case Aggregator::Gin: return "gin";
  }
  return "?";
}

Aggregator aggregator_from_string(const std::string& s) {
  if (s == "gcn") return Aggregator::Gcn;
  if (s == "sage" || s == "graphsage") return Aggregator::GraphSage;
  if (s == "bi" || s == "bi-interaction") return Aggregator::BiInteraction;
  if (s == "gin") return Aggregator::Gin;
  throw ConfigError("unknown aggregator '" + s + "' (expected gcn|sage|bi|gin)");
}

void LayerConfig::validate() const {
  if (layers < 1) throw ConfigError("layers must be >= 1");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be in [0, 1]");
  if (lambda_rc <= 0.0) throw ConfigError("lambda_rc must be positive");
}

double beta_for_layer(double lambda_rc, int layer, bool* clamped) {
  if (layer < 1) throw ContractError("beta_for_layer: layers are 1-based");
  double raw = std::log(lambda_rc / (1.0 + layer));
  double beta = std::clamp(raw, 0.0, 1.0);
  bool was_clamped = raw != beta;
  if (clamped) *clamped = was_clamped;
  if (was_clamped) {
    static bool warned = false;
    if (!warned) {
      warned = true;
      std::cerr << "[warn] residual beta " << raw << " at layer " << layer
                << " clamped into [0,1]\n";
    }
  }
  return beta;
}

PropGraph PropGraph::from_kg(const KnowledgeGraph& kg, const std::vector<char>* keep) {
  if (!kg.frozen()) throw ContractError("PropGraph::from_kg needs a frozen graph");
  if (keep && keep->size() != kg.triple_count()) {
    throw ContractError("PropGraph::from_kg: mask size mismatch");
  }
  PropGraph g;
  g.n_entities = static_cast<Index>(kg.entity_count());
  const auto n_rel = static_cast<Index>(kg.schema().size());
  g.n_relation_dirs = 2 * n_rel;

  struct Edge {
    Index dst, src, rel;
  };
  std::vector<Edge> edges;
  edges.reserve(2 * kg.triple_count());
  for (std::size_t i = 0; i < kg.triple_count(); ++i) {
    if (keep && !(*keep)[i]) continue;
    const Triple& t = kg.triples()[i];
    edges.push_back({t.head, t.tail, t.relation});
    edges.push_back({t.tail, t.head, t.relation + n_rel});
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.dst != b.dst) return a.dst < b.dst;
    if (a.src != b.src) return a.src < b.src;
    return a.rel < b.rel;
  });
  g.dst.reserve(edges.size());
  g.src.reserve(edges.size());
  g.rel.reserve(edges.size());
  for (const Edge& e : edges) {
    g.dst.push_back(e.dst);
    g.src.push_back(e.src);
    g.rel.push_back(e.rel);
  }
  return g;
}

namespace {

Matrix xavier(Index in, Index out, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(in, out);
  for (Index r = 0; r < in; ++r) {
    for (Index c = 0; c < out; ++c) m(r, c) = dist(rng);
  }
  return m;
}

Matrix embedding_init(Index rows, Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Matrix m(rows, dim);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < dim; ++c) m(r, c) = dist(rng);
  }
  return m;
}

}  // namespace

ModelParams ModelParams::init(const ModelDims& dims, const LayerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (dims.n_entities < 1 || dims.n_relations < 1 || dims.dim < 1 || dims.numeric_width < 1 ||
      dims.text_width < 1) {
    throw DimensionError("ModelParams::init: all dims must be positive");
  }
  if (dims.dim != static_cast<Index>(cfg.dim)) {
    throw ConfigError("ModelParams::init: dims.dim disagrees with LayerConfig.dim");
  }
  std::mt19937_64 rng(seed);
  const Index d = dims.dim;

  ModelParams p;
  p.dims = dims;
  p.entity_emb = Tensor(embedding_init(dims.n_entities, d, rng), true);
  p.relation_emb = Tensor(embedding_init(2 * dims.n_relations, d, rng), true);
  p.gate.we = Tensor(xavier(d, d, rng), true);
  p.gate.wn = Tensor(xavier(dims.numeric_width, d, rng), true);
  p.gate.wt = Tensor(xavier(dims.text_width, d, rng), true);
  // Positive bias opens the gate toward the fused attribute channel at the
  // start of training; a zero start mixes half random embedding into every
  // fused vector, which buries weak literal signal before it can be learned.
  p.gate.b = Tensor::constant(1, d, 2.0, true);
  p.gate.w = Tensor(xavier(d + dims.numeric_width + dims.text_width, d, rng), true);
  p.attn_w = Tensor(xavier(d, d, rng), true);

  p.layers.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    LayerWeights& lw = p.layers[l];
    switch (cfg.aggregator) {
      case Aggregator::Gcn:
        lw.w = Tensor(xavier(d, d, rng), true);
        break;
      case Aggregator::GraphSage:
        lw.w = Tensor(xavier(2 * d, d, rng), true);
        break;
      case Aggregator::BiInteraction:
        lw.w1 = Tensor(xavier(d, d, rng), true);
        lw.w2 = Tensor(xavier(d, d, rng), true);
        break;
      case Aggregator::Gin:
        lw.fc1_w = Tensor(xavier(d, d, rng), true);
        lw.fc1_b = Tensor::zeros(1, d, true);
        lw.fc2_w = Tensor(xavier(d, d, rng), true);
        lw.fc2_b = Tensor::zeros(1, d, true);
        if (cfg.gin_epsilon_learnable) {
          lw.eps = Tensor::scalar(cfg.gin_epsilon, true);
        }
        break;
    }
    if (cfg.residual_identity) {
      lw.res_w = Tensor(xavier(d, d, rng), true);
    }
  }
  p.head_w = Tensor(xavier(static_cast<Index>(cfg.layers) * d, d, rng), true);
  p.head_b = Tensor::zeros(1, d, true);
  for (Index r = 0; r < dims.n_relations; ++r) {
    p.rel_proj.emplace_back(xavier(d, d, rng), true);
  }
  p.clf_w1 = Tensor(xavier(2 * d, d, rng), true);
  p.clf_b1 = Tensor::zeros(1, d, true);
  p.clf_w2 = Tensor(xavier(d, 1, rng), true);
  p.clf_b2 = Tensor::zeros(1, 1, true);
  return p;
}

std::vector<NamedParam> ModelParams::named_params() {
  std::vector<NamedParam> out;
  auto add = [&out](const std::string& name, Tensor& t) {
    if (t.defined()) out.push_back({name, &t});
  };
  add("entity_emb", entity_emb);
  add("relation_emb", relation_emb);
  add("gate.we", gate.we);
  add("gate.wn", gate.wn);
  add("gate.wt", gate.wt);
  add("gate.b", gate.b);
  add("gate.w", gate.w);
  add("attn_w", attn_w);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::string prefix = "layer" + std::to_string(l) + ".";
    add(prefix + "w", layers[l].w);
    add(prefix + "w1", layers[l].w1);
    add(prefix + "w2", layers[l].w2);
    add(prefix + "fc1_w", layers[l].fc1_w);
    add(prefix + "fc1_b", layers[l].fc1_b);
    add(prefix + "fc2_w", layers[l].fc2_w);
    add(prefix + "fc2_b", layers[l].fc2_b);
    add(prefix + "eps", layers[l].eps);
    add(prefix + "res_w", layers[l].res_w);
  }
  add("head.w", head_w);
  add("head.b", head_b);
  for (std::size_t r = 0; r < rel_proj.size(); ++r) {
    add("rel_proj." + std::to_string(r), rel_proj[r]);
  }
  add("clf.w1", clf_w1);
  add("clf.b1", clf_b1);
  add("clf.w2", clf_w2);
  add("clf.b2", clf_b2);
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams copy = *this;  // shares nodes at first
  auto fresh = [](Tensor& t) {
    if (t.defined()) t = Tensor(t.value(), true);
  };
  fresh(copy.entity_emb);
  fresh(copy.relation_emb);
  fresh(copy.gate.we);
  fresh(copy.gate.wn);
  fresh(copy.gate.wt);
  fresh(copy.gate.b);
  fresh(copy.gate.w);
  fresh(copy.attn_w);
  for (LayerWeights& lw : copy.layers) {
    fresh(lw.w);
    fresh(lw.w1);
    fresh(lw.w2);
    fresh(lw.fc1_w);
    fresh(lw.fc1_b);
    fresh(lw.fc2_w);
    fresh(lw.fc2_b);
    fresh(lw.eps);
    fresh(lw.res_w);
  }
  fresh(copy.head_w);
  fresh(copy.head_b);
  for (Tensor& t : copy.rel_proj) fresh(t);
  fresh(copy.clf_w1);
  fresh(copy.clf_b1);
  fresh(copy.clf_w2);
  fresh(copy.clf_b2);
  return copy;
}

bool ModelParams::all_finite() const {
  auto* self = const_cast<ModelParams*>(this);
  for (const NamedParam& p : self->named_params()) {
    if (!p.tensor->value().allFinite()) return false;
  }
  return true;
}

Tensor fuse_literals(const Tensor& e, const Tensor& n, const Tensor& t, const GateWeights& g) {
  Tensor gate_in = add_rowwise(
      add(add(matmul(e, g.we), matmul(n, g.wn)), matmul(t, g.wt)), g.b);
  Tensor mu = sigmoid(gate_in);
  Tensor nu = kge::tanh(matmul(concat_cols({e, n, t}), g.w));
  Tensor ones = Tensor::constant(mu.rows(), mu.cols(), 1.0);
  return add(hadamard(mu, nu), hadamard(sub(ones, mu), e));
}

Tensor attention_score(const Tensor& h, const Tensor& r, const Tensor& t, const Tensor& attn_w) {
  Tensor query = kge::tanh(add(matmul(h, attn_w), r));
  Tensor key = matmul(t, attn_w);
  return sum_rows(hadamard(key, query));
}

Tensor normalize_attention(const Tensor& scores) {
  if (scores.cols() != 1) {
    throw DimensionError("normalize_attention: expected a kx1 score column");
  }
  return transpose(softmax_rows(transpose(scores)));
}

Tensor aggregate_neighborhood(const Tensor& weights, const Tensor& neighbor_reps) {
  if (weights.cols() != 1 || weights.rows() != neighbor_reps.rows()) {
    throw DimensionError("aggregate_neighborhood: weights must be kx1 aligned with reps");
  }
  return matmul(transpose(weights), neighbor_reps);
}

Tensor attentive_messages(const PropGraph& g, const Tensor& h, const Tensor& relation_emb,
                          const Tensor& attn_w) {
  if (h.rows() != g.n_entities) {
    throw DimensionError("attentive_messages: representation table has wrong row count");
  }
  if (g.dst.empty()) return Tensor::zeros(g.n_entities, h.cols());
  if (relation_emb.rows() < g.n_relation_dirs) {
    throw DimensionError("attentive_messages: relation table too small for inverse ids");
  }

  Tensor ha = matmul(h, attn_w);
  Tensor query = kge::tanh(add(rows(ha, g.dst), rows(relation_emb, g.rel)));
  Tensor key = rows(ha, g.src);
  Tensor score = sum_rows(hadamard(key, query));  // edges x 1

  // Per-neighborhood max, detached: softmax is shift-invariant, so routing
  // no gradient through the max changes nothing.
  Matrix mx = Matrix::Constant(g.n_entities, 1, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < g.dst.size(); ++e) {
    mx(g.dst[e], 0) = std::max(mx(g.dst[e], 0), score.value()(static_cast<Index>(e), 0));
  }
  Tensor shift = rows(Tensor(mx), g.dst);
  Tensor expd = kge::exp(sub(score, shift));
  Tensor denom = scatter_sum_rows(expd, g.dst, g.n_entities);
  Tensor weights = divide(expd, rows(denom, g.dst));

  Tensor messages = scale_rows(rows(h, g.src), weights);
  return scatter_sum_rows(messages, g.dst, g.n_entities);
}

Tensor apply_aggregator(const Tensor& h, const Tensor& h_n, Aggregator kind,
                        const LayerWeights& lw, const LayerConfig& cfg) {
  switch (kind) {
    case Aggregator::Gcn:
      return leaky_relu(matmul(add(h, h_n), lw.w));
    case Aggregator::GraphSage:
      return leaky_relu(matmul(concat_cols({h, h_n}), lw.w));
    case Aggregator::BiInteraction: {
      Tensor sum_part = leaky_relu(matmul(add(h, h_n), lw.w1));
      Tensor prod_part = leaky_relu(matmul(hadamard(h, h_n), lw.w2));
      return add(sum_part, prod_part);
    }
    case Aggregator::Gin: {
      Tensor scaled;
      if (lw.eps.defined()) {
        Tensor one_plus = add(lw.eps, Tensor::scalar(1.0));
        scaled = mul_scalar(h, one_plus);
      } else {
        scaled = scale(h, 1.0 + cfg.gin_epsilon);
      }
      Tensor combined = add(scaled, h_n);
      Tensor hidden = leaky_relu(add_rowwise(matmul(combined, lw.fc1_w), lw.fc1_b));
      Tensor out = add_rowwise(matmul(hidden, lw.fc2_w), lw.fc2_b);
      return leaky_relu(out);
    }
  }
  throw ContractError("apply_aggregator: unknown aggregator");
}

Tensor residual_identity(const Tensor& m, const Tensor& h0, double alpha, double beta,
                         const Tensor& w_res) {
  if (m.rows() != h0.rows() || m.cols() != h0.cols()) {
    throw DimensionError("residual_identity: message and initial tables differ in shape");
  }
  Tensor blend = add(scale(m, 1.0 - alpha), scale(h0, alpha));
  Tensor mixed = add(scale(blend, 1.0 - beta), scale(matmul(blend, w_res), beta));
  return leaky_relu(mixed);
}

Tensor final_representation(const std::vector<Tensor>& layer_outputs, const Tensor& w_out,
                            const Tensor& b_out) {
  if (layer_outputs.empty()) throw ContractError("final_representation: no layer outputs");
  return leaky_relu(add_rowwise(matmul(concat_cols(layer_outputs), w_out), b_out));
}

ForwardResult forward(const PropGraph& g, const Matrix& numeric, const Matrix& text,
                      ModelParams& params, const LayerConfig& cfg, bool training,
                      std::mt19937_64* rng) {
  cfg.validate();
  if (numeric.rows() != g.n_entities || text.rows() != g.n_entities) {
    throw DimensionError("forward: attribute tables must cover every entity");
  }
  if (static_cast<int>(params.layers.size()) != cfg.layers) {
    throw DimensionError("forward: parameter layer count disagrees with config");
  }
  if (training && cfg.dropout > 0.0 && rng == nullptr) {
    throw ContractError("forward: training with dropout needs an rng");
  }

  ForwardResult result;
  Tensor n_feat(numeric);
  Tensor t_feat(text);
  result.h0 = fuse_literals(params.entity_emb, n_feat, t_feat, params.gate);
  if (!result.h0.value().allFinite()) {
    throw TrainingError("non-finite representations after literal fusion");
  }

  Tensor h = result.h0;
  for (int l = 0; l < cfg.layers; ++l) {
    Tensor h_n = attentive_messages(g, h, params.relation_emb, params.attn_w);
    Tensor out = apply_aggregator(h, h_n, cfg.aggregator, params.layers[l], cfg);
    if (cfg.residual_identity) {
      double beta = beta_for_layer(cfg.lambda_rc, l + 1);
      out = residual_identity(out, result.h0, cfg.alpha, beta, params.layers[l].res_w);
    }
    if (training && cfg.dropout > 0.0) {
      out = dropout(out, cfg.dropout, *rng);
    }
    if (!out.value().allFinite()) {
      throw TrainingError("non-finite representations at layer " + std::to_string(l + 1));
    }
    result.layer_outputs.push_back(out);
    h = out;
  }
  result.final = final_representation(result.layer_outputs, params.head_w, params.head_b);
  if (!result.final.value().allFinite()) {
    throw TrainingError("non-finite final representations");
  }
  return result;
}

}  // namespace kge
