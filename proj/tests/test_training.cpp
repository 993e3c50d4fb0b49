#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "kge/attributes.hpp"
#include "kge/ops.hpp"
#include "kge/records.hpp"
#include "kge/synth.hpp"
#include "kge/training.hpp"
#include "oracles.hpp"

using namespace kge;

namespace {

Matrix rand_mat(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  return oracle::random_matrix(r, c, rng, scale);
}

// Everything a training run needs, derived from a small synthetic corpus.
struct ToyTask {
  KnowledgeGraph kg;
  PropGraph graph;
  Matrix numeric;
  Matrix text;
  ModelDims dims;
};

ToyTask make_toy_task(Index dim, std::uint64_t seed = 7, int n_animals = 12) {
  SynthConfig cfg;
  cfg.n_animals = n_animals;
  cfg.min_records_per_animal = 1;
  cfg.max_records_per_animal = n_animals > 20 ? 4 : 3;
  cfg.n_diseases = 4;
  cfg.n_symptom_vocab = 40;
  cfg.seed = seed;
  cfg.signal_mode = SignalMode::LiteralDependent;
  SynthCorpus corpus = generate_corpus(cfg);

  ToyTask task;
  task.kg = build_kg(corpus.records);
  task.graph = PropGraph::from_kg(task.kg);
  NumericStats stats = compute_numeric_stats(corpus.records);
  SubwordEmbedder embedder(12);
  AttributeVectors attrs = build_attribute_vectors(task.kg, stats, embedder);
  task.numeric = attrs.numeric;
  task.text = attrs.text;

  task.dims.n_entities = static_cast<Index>(task.kg.entity_count());
  task.dims.n_relations = static_cast<Index>(task.kg.schema().size());
  task.dims.dim = dim;
  task.dims.numeric_width = task.numeric.cols();
  task.dims.text_width = task.text.cols();
  return task;
}

std::vector<std::size_t> diagnosis_triples(const KnowledgeGraph& kg) {
  const RelationId r_d = kg.relation_id("r_D");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kg.triple_count(); ++i) {
    if (kg.triples()[i].relation == r_d) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST_CASE("run config validation") {
  TrainRunConfig good;
  CHECK_NOTHROW(good.validate());
  TrainRunConfig c = good;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = good;
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = good;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = good;
  c.negatives = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = good;
  c.lr = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = good;
  c.lambda_reg = -1e-9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("triplet score closed forms") {
  const Index d = 3;

  SUBCASE("identical head and tail leave only the relation residual") {
    Matrix h = rand_mat(2, d, 11);
    Matrix r = rand_mat(2, d, 12);
    Matrix w = rand_mat(d, d, 13);
    Matrix score = triplet_score(Tensor(h), Tensor(r), Tensor(h), Tensor(w)).value();
    for (Index i = 0; i < 2; ++i) {
      CHECK(score(i, 0) == doctest::Approx(r.row(i).squaredNorm()).epsilon(1e-12));
    }
  }

  SUBCASE("an exact translation scores zero") {
    Matrix h = rand_mat(1, d, 14);
    Matrix t = rand_mat(1, d, 15);
    Matrix r = t - h;
    Matrix score =
        triplet_score(Tensor(h), Tensor(r), Tensor(t), Tensor(Matrix(Matrix::Identity(d, d))))
            .value();
    CHECK(score(0, 0) == 0.0);
  }

  SUBCASE("random case matches a scalar reference") {
    Matrix h = rand_mat(1, d, 16), r = rand_mat(1, d, 17), t = rand_mat(1, d, 18);
    Matrix w = rand_mat(d, d, 19);
    double got = triplet_score(Tensor(h), Tensor(r), Tensor(t), Tensor(w)).item();
    double want = 0.0;
    for (Index c = 0; c < d; ++c) {
      double resid = r(0, c);
      for (Index k = 0; k < d; ++k) resid += (h(0, k) - t(0, k)) * w(k, c);
      want += resid * resid;
    }
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("mixed-relation batches score against the right projections") {
  const Index d = 3;
  Matrix repr = rand_mat(6, d, 21);
  Matrix rel_emb = rand_mat(4, d, 22);  // two canonical relations plus inverses
  std::vector<Tensor> proj = {Tensor(rand_mat(d, d, 23)), Tensor(rand_mat(d, d, 24))};

  std::vector<Triple> triples = {{0, 1, 3}, {2, 0, 4}, {5, 1, 1}, {3, 0, 0}};
  Matrix got = triplet_scores(Tensor(repr), Tensor(rel_emb), proj, triples).value();
  REQUIRE(got.rows() == 4);

  for (std::size_t i = 0; i < triples.size(); ++i) {
    const Triple& t = triples[i];
    double single = triplet_score(Tensor(Matrix(repr.row(t.head))),
                                  Tensor(Matrix(rel_emb.row(t.relation))),
                                  Tensor(Matrix(repr.row(t.tail))), proj[t.relation])
                        .item();
    CHECK(got(static_cast<Index>(i), 0) == doctest::Approx(single).epsilon(1e-12));
  }

  CHECK_THROWS_AS(triplet_scores(Tensor(repr), Tensor(rel_emb), proj, {{0, 7, 1}}),
                  ContractError);
  CHECK_THROWS_AS(triplet_scores(Tensor(repr), Tensor(rel_emb), proj, {}), ContractError);
}

TEST_CASE("ranking loss closed forms") {
  SUBCASE("score parity costs ln 2 per pair") {
    Matrix s = rand_mat(5, 1, 31).cwiseAbs();
    double loss = ranking_loss(Tensor(s), Tensor(s)).item();
    CHECK(std::abs(loss - std::log(2.0)) < 1e-9);
  }

  SUBCASE("well-separated pairs cost almost nothing") {
    Matrix pos = Matrix::Zero(3, 1);
    Matrix neg = Matrix::Constant(3, 1, 40.0);
    CHECK(ranking_loss(Tensor(pos), Tensor(neg)).item() < 1e-15);
  }

  SUBCASE("two-pair batch matches the scalar reference") {
    Matrix pos(2, 1), neg(2, 1);
    pos << 1.3, 0.2;
    neg << 0.4, 2.5;
    double want = 0.5 * (std::log1p(std::exp(1.3 - 0.4)) + std::log1p(std::exp(0.2 - 2.5)));
    CHECK(ranking_loss(Tensor(pos), Tensor(neg)).item() == doctest::Approx(want).epsilon(1e-12));
  }

  CHECK_THROWS_AS(ranking_loss(Tensor(rand_mat(2, 1, 32)), Tensor(rand_mat(3, 1, 33))),
                  DimensionError);
}

TEST_CASE("l2 penalty sums squared entries across all parameters") {
  ModelDims dims;
  dims.n_entities = 3;
  dims.n_relations = 2;
  dims.dim = 4;
  dims.numeric_width = 2;
  dims.text_width = 2;
  LayerConfig cfg;
  cfg.dim = 4;
  cfg.aggregator = Aggregator::Gcn;
  ModelParams params = ModelParams::init(dims, cfg, 3);

  double want = 0.0;
  for (const NamedParam& p : params.named_params()) want += p.tensor->value().squaredNorm();
  CHECK(l2_penalty(params).item() == doctest::Approx(want).epsilon(1e-12));
  CHECK(want > 0.0);
}

TEST_CASE("finetune scores") {
  const Index d = 2;
  ModelDims dims;
  dims.n_entities = 4;
  dims.n_relations = 2;
  dims.dim = d;
  dims.numeric_width = 2;
  dims.text_width = 2;
  LayerConfig cfg;
  cfg.dim = static_cast<int>(d);
  ModelParams params = ModelParams::init(dims, cfg, 5);
  Matrix repr = rand_mat(4, d, 41);
  Matrix w_r = rand_mat(d, d, 42);
  std::vector<FinetunePair> pairs = {{0, 1, 1.0}, {2, 3, 0.0}, {1, 3, 1.0}};

  SUBCASE("zero classifier weights sit at exactly one half") {
    params.clf_w1 = Tensor::zeros(2 * d, d, true);
    params.clf_b1 = Tensor::zeros(1, d, true);
    params.clf_w2 = Tensor::zeros(d, 1, true);
    params.clf_b2 = Tensor::zeros(1, 1, true);
    Matrix probs = finetune_scores(Tensor(repr), Tensor(w_r), params, pairs).value();
    for (Index i = 0; i < probs.rows(); ++i) CHECK(probs(i, 0) == 0.5);
  }

  SUBCASE("probabilities stay strictly inside (0,1)") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 50; ++trial) {
      Matrix wild = oracle::random_matrix(4, d, rng, 20.0);
      Matrix probs = finetune_scores(Tensor(wild), Tensor(w_r), params, pairs).value();
      for (Index i = 0; i < probs.rows(); ++i) {
        CHECK(probs(i, 0) > 0.0);
        CHECK(probs(i, 0) < 1.0);
      }
    }
  }

  SUBCASE("two-dimensional case matches a scalar reference") {
    Matrix probs = finetune_scores(Tensor(repr), Tensor(w_r), params, pairs).value();
    auto lrelu = [](double x) { return x < 0.0 ? 0.01 * x : x; };
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      Eigen::RowVectorXd ph = repr.row(pairs[i].record) * w_r;
      Eigen::RowVectorXd pt = repr.row(pairs[i].disease) * w_r;
      Eigen::RowVectorXd cat(2 * d);
      cat << ph, pt;
      double logit = params.clf_b2.value()(0, 0);
      for (Index j = 0; j < d; ++j) {
        double hidden = params.clf_b1.value()(0, j);
        for (Index k = 0; k < 2 * d; ++k) hidden += cat(k) * params.clf_w1.value()(k, j);
        logit += lrelu(hidden) * params.clf_w2.value()(j, 0);
      }
      double want = 1.0 / (1.0 + std::exp(-logit));
      CHECK(probs(static_cast<Index>(i), 0) == doctest::Approx(want).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(finetune_scores(Tensor(repr), Tensor(w_r), params, {}), ContractError);
}

TEST_CASE("binary cross entropy closed forms") {
  SUBCASE("exact predictions cost nearly nothing") {
    Matrix p(4, 1);
    p << 1.0, 0.0, 1.0, 0.0;
    CHECK(bce_loss(Tensor(p), {1, 0, 1, 0}).item() <= 1e-11);
  }

  SUBCASE("coin-flip predictions cost ln 2") {
    Matrix p = Matrix::Constant(6, 1, 0.5);
    CHECK(std::abs(bce_loss(Tensor(p), {1, 0, 1, 0, 1, 1}).item() - std::log(2.0)) < 1e-9);
  }

  SUBCASE("mixed batch matches the scalar reference") {
    Matrix p(4, 1);
    p << 0.9, 0.3, 0.6, 0.02;
    std::vector<double> y = {1, 0, 0, 1};
    double want = -(std::log(0.9) + std::log(0.7) + std::log(0.4) + std::log(0.02)) / 4.0;
    CHECK(bce_loss(Tensor(p), y).item() == doctest::Approx(want).epsilon(1e-12));
  }

  CHECK_THROWS_AS(bce_loss(Tensor(Matrix(Matrix::Constant(1, 1, 0.5))), {0.5}), ContractError);
  CHECK_THROWS_AS(bce_loss(Tensor(Matrix(Matrix::Constant(2, 1, 0.5))), {1}), DimensionError);
}

TEST_CASE("gradients flow through both loss heads") {
  const Index d = 3;

  SUBCASE("ranking head") {
    Matrix repr = rand_mat(5, d, 51);
    Matrix rel_emb = rand_mat(4, d, 52);
    Matrix w0 = rand_mat(d, d, 53);
    Matrix w1 = rand_mat(d, d, 54);
    std::vector<Triple> pos = {{0, 0, 1}, {2, 1, 3}, {4, 0, 2}};
    std::vector<Triple> neg = {{0, 0, 4}, {2, 1, 0}, {4, 0, 3}};

    Tape::active().clear();
    Tensor repr_t(repr, true), rel_t(rel_emb, true);
    std::vector<Tensor> proj = {Tensor(w0, true), Tensor(w1, true)};
    Tensor loss = ranking_loss(triplet_scores(repr_t, rel_t, proj, pos),
                               triplet_scores(repr_t, rel_t, proj, neg));
    GradientMap grads = backward(loss);

    auto f = [&](const std::vector<Matrix>& vs) {
      std::vector<Tensor> p = {Tensor(vs[2]), Tensor(vs[3])};
      return ranking_loss(triplet_scores(Tensor(vs[0]), Tensor(vs[1]), p, pos),
                          triplet_scores(Tensor(vs[0]), Tensor(vs[1]), p, neg))
          .item();
    };
    oracle::FdReport rep = oracle::check_gradients(
        f, {repr, rel_emb, w0, w1},
        {grads.at(repr_t), grads.at(rel_t), grads.at(proj[0]), grads.at(proj[1])});
    CHECK(rep.max_rel_err < 1e-4);
  }

  SUBCASE("classification head") {
    ModelDims dims;
    dims.n_entities = 5;
    dims.n_relations = 2;
    dims.dim = d;
    dims.numeric_width = 2;
    dims.text_width = 2;
    LayerConfig cfg;
    cfg.dim = static_cast<int>(d);
    ModelParams params = ModelParams::init(dims, cfg, 55);
    Matrix repr = rand_mat(5, d, 56);
    Matrix w_r = rand_mat(d, d, 57);
    std::vector<FinetunePair> pairs = {{0, 1, 1.0}, {2, 3, 0.0}, {4, 1, 0.0}, {3, 0, 1.0}};
    std::vector<double> labels = {1, 0, 0, 1};

    Tape::active().clear();
    Tensor repr_t(repr, true), w_r_t(w_r, true);
    Tensor loss = bce_loss(finetune_scores(repr_t, w_r_t, params, pairs), labels);
    GradientMap grads = backward(loss);

    Matrix cw1 = params.clf_w1.value(), cb1 = params.clf_b1.value();
    Matrix cw2 = params.clf_w2.value(), cb2 = params.clf_b2.value();
    auto f = [&](const std::vector<Matrix>& vs) {
      params.clf_w1.raw_value() = vs[2];
      params.clf_b1.raw_value() = vs[3];
      params.clf_w2.raw_value() = vs[4];
      params.clf_b2.raw_value() = vs[5];
      return bce_loss(finetune_scores(Tensor(vs[0]), Tensor(vs[1]), params, pairs), labels)
          .item();
    };
    oracle::FdReport rep = oracle::check_gradients(
        f, {repr, w_r, cw1, cb1, cw2, cb2},
        {grads.at(repr_t), grads.at(w_r_t), grads.at(params.clf_w1), grads.at(params.clf_b1),
         grads.at(params.clf_w2), grads.at(params.clf_b2)});
    params.clf_w1.raw_value() = cw1;
    params.clf_b1.raw_value() = cb1;
    params.clf_w2.raw_value() = cw2;
    params.clf_b2.raw_value() = cb2;
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("finetune pair construction") {
  KnowledgeGraph kg;
  EntityId m1 = kg.add_entity(EntityKind::MedicalRecord, "M1");
  EntityId m2 = kg.add_entity(EntityKind::MedicalRecord, "M2");
  EntityId d1 = kg.add_entity(EntityKind::Disease, "d1", AttributePayload::text_value("d1"));
  EntityId d2 = kg.add_entity(EntityKind::Disease, "d2", AttributePayload::text_value("d2"));
  EntityId d3 = kg.add_entity(EntityKind::Disease, "d3", AttributePayload::text_value("d3"));
  EntityId d4 = kg.add_entity(EntityKind::Disease, "d4", AttributePayload::text_value("d4"));
  const RelationId r_d = kg.relation_id("r_D");
  kg.add_triple(m1, r_d, d1);
  kg.add_triple(m2, r_d, d2);
  kg.freeze();
  (void)d3;
  (void)d4;

  SUBCASE("ratio one doubles the pair count") {
    std::mt19937_64 rng(61);
    std::vector<FinetunePair> pairs = build_finetune_pairs(kg, 1, rng);
    REQUIRE(pairs.size() == 4);
    CHECK(std::count_if(pairs.begin(), pairs.end(),
                        [](const FinetunePair& p) { return p.label == 1.0; }) == 2);
  }

  SUBCASE("ratio three gives three negatives per positive") {
    std::mt19937_64 rng(62);
    std::vector<FinetunePair> pairs = build_finetune_pairs(kg, 3, rng);
    REQUIRE(pairs.size() == 8);
    CHECK(std::count_if(pairs.begin(), pairs.end(),
                        [](const FinetunePair& p) { return p.label == 0.0; }) == 6);
  }

  SUBCASE("negatives never collide with real links") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      std::mt19937_64 rng(seed);
      for (const FinetunePair& p : build_finetune_pairs(kg, 3, rng)) {
        if (p.label == 0.0) {
          CHECK_FALSE(kg.has_triple(p.record, r_d, p.disease));
        }
      }
    }
  }

  SUBCASE("identical rng state reproduces the pair list") {
    std::mt19937_64 a(63), b(63);
    std::vector<FinetunePair> pa = build_finetune_pairs(kg, 2, a);
    std::vector<FinetunePair> pb = build_finetune_pairs(kg, 2, b);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i].record == pb[i].record);
      CHECK(pa[i].disease == pb[i].disease);
      CHECK(pa[i].label == pb[i].label);
    }
  }

  SUBCASE("asking for more negatives than diseases fails") {
    std::mt19937_64 rng(64);
    CHECK_THROWS_AS(build_finetune_pairs(kg, 5, rng), SamplingError);
  }

  SUBCASE("subset overload rejects non-diagnosis triples") {
    KnowledgeGraph other;
    EntityId m = other.add_entity(EntityKind::MedicalRecord, "M1");
    EntityId a = other.add_entity(EntityKind::Animal, "A1");
    EntityId dd =
        other.add_entity(EntityKind::Disease, "dz", AttributePayload::text_value("dz"));
    other.add_triple(m, other.relation_id("r_A"), a);
    other.add_triple(m, other.relation_id("r_D"), dd);
    other.freeze();
    std::mt19937_64 rng(65);
    CHECK_THROWS_AS(build_finetune_pairs(other, {0}, 1, rng), ContractError);
    CHECK_THROWS_AS(build_finetune_pairs(other, {}, 1, rng), ContractError);
  }
}

TEST_CASE("one optimizer step lowers the ranking objective for every aggregator") {
  ToyTask task = make_toy_task(6);
  std::mt19937_64 neg_rng(71);

  // One fixed batch of ranking pairs, reused before and after the step.
  std::vector<Triple> pos, neg;
  for (std::size_t i = 0; i < task.kg.triple_count(); i += 7) {
    const Triple& t = task.kg.triples()[i];
    const EntityKind tail_kind = task.kg.schema().at(t.relation).tail;
    const long pool = static_cast<long>(task.kg.entities_of_kind(tail_kind).size()) -
                      static_cast<long>(task.kg.tails_of(t.head, t.relation).size());
    if (pool < 1) continue;
    pos.push_back(t);
    neg.push_back(task.kg.sample_negatives(t, 1, neg_rng)[0]);
  }
  REQUIRE(pos.size() >= 10);

  for (Aggregator kind : {Aggregator::Gcn, Aggregator::GraphSage, Aggregator::BiInteraction,
                          Aggregator::Gin}) {
    CAPTURE(to_string(kind));
    LayerConfig lcfg;
    lcfg.aggregator = kind;
    lcfg.layers = 1;
    lcfg.dim = 6;
    lcfg.dropout = 0.0;
    ModelParams params = ModelParams::init(task.dims, lcfg, 72);

    auto batch_loss = [&]() {
      Tensor final_repr = forward(task.graph, task.numeric, task.text, params, lcfg).final;
      Tensor p = triplet_scores(final_repr, params.relation_emb, params.rel_proj, pos);
      Tensor n = triplet_scores(final_repr, params.relation_emb, params.rel_proj, neg);
      return ranking_loss(p, n);
    };

    Tape::active().clear();
    Tensor before = batch_loss();
    double loss_before = before.item();
    GradientMap grads = backward(before);
    AdamState opt;
    opt.lr = 1e-3;
    std::vector<NamedParam> named = params.named_params();
    adam_step(named, grads, opt);

    Tape::Pause pause;
    double loss_after = batch_loss().item();
    CHECK(loss_after < loss_before);
  }
}

TEST_CASE("fine-tuning learns the toy diagnosis task deterministically") {
  ToyTask task = make_toy_task(8);
  GraphInputs in{&task.graph, &task.numeric, &task.text};

  std::vector<std::size_t> diag = diagnosis_triples(task.kg);
  REQUIRE(diag.size() >= 10);
  const std::size_t cut = diag.size() * 7 / 10;
  std::vector<std::size_t> train_idx(diag.begin(), diag.begin() + cut);
  std::vector<std::size_t> val_idx(diag.begin() + cut, diag.end());

  std::mt19937_64 pair_rng(81);
  std::vector<FinetunePair> train_pairs = build_finetune_pairs(task.kg, train_idx, 1, pair_rng);
  std::vector<FinetunePair> val_pairs = build_finetune_pairs(task.kg, val_idx, 1, pair_rng);

  LayerConfig lcfg;
  lcfg.aggregator = Aggregator::BiInteraction;
  lcfg.layers = 1;
  lcfg.dim = 8;
  lcfg.dropout = 0.0;

  TrainRunConfig rcfg;
  rcfg.batch_size = 4096;
  rcfg.epochs = 50;
  rcfg.patience = 50;
  rcfg.lr = 5e-3;
  rcfg.lambda_reg = 1e-6;
  rcfg.seed = 82;

  ModelParams params = ModelParams::init(task.dims, lcfg, 83);
  TrainResult result = run_finetune(task.kg, in, params, lcfg, rcfg, train_pairs, val_pairs);

  REQUIRE_FALSE(result.diverged);
  REQUIRE_FALSE(result.history.empty());
  CHECK(result.history.size() <= 50);
  CHECK(result.history.front().phase == "finetune");
  CHECK(result.history.front().epoch == 1);
  // The optimizer makes clear progress on the training objective.
  CHECK(result.history.back().loss < 0.9 * result.history.front().loss);
  CHECK(result.best_epoch >= 1);
  CHECK(result.best_metric >= 0.5);

  // The retained checkpoint is the best validation epoch, never beaten later.
  for (const EpochStats& s : result.history) {
    CHECK(result.best_metric >= s.f1 - 1e-12);
  }

  SUBCASE("identical seeds reproduce the whole history") {
    ModelParams params2 = ModelParams::init(task.dims, lcfg, 83);
    TrainResult again = run_finetune(task.kg, in, params2, lcfg, rcfg, train_pairs, val_pairs);
    REQUIRE(again.history.size() == result.history.size());
    for (std::size_t i = 0; i < result.history.size(); ++i) {
      CHECK(again.history[i].loss == result.history[i].loss);
      CHECK(again.history[i].f1 == result.history[i].f1);
      CHECK(again.history[i].val_loss == result.history[i].val_loss);
    }
    CHECK(again.best_epoch == result.best_epoch);
    CHECK((again.best.entity_emb.value() - result.best.entity_emb.value())
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  SUBCASE("zero learning rate freezes parameters and the loss") {
    TrainRunConfig frozen = rcfg;
    frozen.lr = 0.0;
    frozen.epochs = 4;
    ModelParams params3 = ModelParams::init(task.dims, lcfg, 83);
    Matrix before = params3.entity_emb.value();
    TrainResult still = run_finetune(task.kg, in, params3, lcfg, frozen, train_pairs, val_pairs);
    REQUIRE(still.history.size() == 4);
    for (const EpochStats& s : still.history) {
      // Constant up to summation order: shuffling only reorders the batch sum.
      CHECK(s.loss == doctest::Approx(still.history.front().loss).epsilon(1e-12));
      CHECK(s.f1 == still.history.front().f1);
    }
    CHECK((params3.entity_emb.value() - before).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("early stopping halts after patience non-improving epochs") {
  ToyTask task = make_toy_task(6);
  GraphInputs in{&task.graph, &task.numeric, &task.text};
  std::vector<std::size_t> diag = diagnosis_triples(task.kg);
  const std::size_t cut = diag.size() * 7 / 10;
  std::mt19937_64 pair_rng(91);
  std::vector<FinetunePair> train_pairs = build_finetune_pairs(
      task.kg, std::vector<std::size_t>(diag.begin(), diag.begin() + cut), 1, pair_rng);
  std::vector<FinetunePair> val_pairs = build_finetune_pairs(
      task.kg, std::vector<std::size_t>(diag.begin() + cut, diag.end()), 1, pair_rng);

  LayerConfig lcfg;
  lcfg.aggregator = Aggregator::Gcn;
  lcfg.layers = 1;
  lcfg.dim = 6;
  lcfg.dropout = 0.0;

  TrainRunConfig rcfg;
  rcfg.batch_size = 4096;
  rcfg.epochs = 60;
  rcfg.patience = 3;
  rcfg.lr = 5e-3;
  rcfg.seed = 92;

  ModelParams params = ModelParams::init(task.dims, lcfg, 93);
  TrainResult result = run_finetune(task.kg, in, params, lcfg, rcfg, train_pairs, val_pairs);
  REQUIRE_FALSE(result.history.empty());
  CHECK(result.history.size() <= 60);
  if (result.history.size() < 60) {
    // Stopped early: exactly `patience` epochs after the best one.
    CHECK(result.history.size() == static_cast<std::size_t>(result.best_epoch) + 3);
  }
  for (const EpochStats& s : result.history) CHECK(result.best_metric >= s.f1 - 1e-12);
}

TEST_CASE("pretraining improves ranking and orders held-out scores") {
  // Enough animals that the ranking objective can generalize: on tiny graphs
  // the embeddings memorize the training triples before validation improves.
  ToyTask task = make_toy_task(8, 7, 60);
  GraphInputs in{&task.graph, &task.numeric, &task.text};

  std::vector<std::size_t> all(task.kg.triple_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 split_rng(101);
  std::shuffle(all.begin(), all.end(), split_rng);
  const std::size_t held = all.size() / 10;
  std::vector<std::size_t> held_out(all.begin(), all.begin() + held);
  std::vector<std::size_t> visible(all.begin() + held, all.end());
  const std::size_t val_cut = visible.size() / 10;
  std::vector<std::size_t> val_idx(visible.begin(), visible.begin() + val_cut);
  std::vector<std::size_t> train_idx(visible.begin() + val_cut, visible.end());

  LayerConfig lcfg;
  lcfg.aggregator = Aggregator::BiInteraction;
  lcfg.layers = 1;
  lcfg.dim = 8;
  lcfg.dropout = 0.0;

  TrainRunConfig rcfg;
  rcfg.batch_size = 2048;
  rcfg.epochs = 80;
  rcfg.patience = 80;
  rcfg.negatives = 3;
  rcfg.lr = 3e-3;
  rcfg.lambda_reg = 1e-3;
  rcfg.seed = 102;

  ModelParams params = ModelParams::init(task.dims, lcfg, 103);
  TrainResult result = run_pretrain(task.kg, in, params, lcfg, rcfg, train_idx, val_idx);

  REQUIRE_FALSE(result.diverged);
  REQUIRE_FALSE(result.history.empty());
  CHECK(result.history.front().phase == "pretrain");
  CHECK(result.best_metric < result.history.front().val_loss * 1.0001);
  CHECK(result.history.back().loss < result.history.front().loss);

  // Held-out positives must score better (lower) than corrupted tails.
  std::vector<Triple> pos, neg;
  std::mt19937_64 neg_rng(104);
  for (std::size_t i : held_out) {
    const Triple& t = task.kg.triples()[i];
    const EntityKind tail_kind = task.kg.schema().at(t.relation).tail;
    const long pool = static_cast<long>(task.kg.entities_of_kind(tail_kind).size()) -
                      static_cast<long>(task.kg.tails_of(t.head, t.relation).size());
    if (pool < 1) continue;
    pos.push_back(t);
    neg.push_back(task.kg.sample_negatives(t, 1, neg_rng)[0]);
  }
  REQUIRE(pos.size() >= 5);
  std::vector<double> pos_scores = eval_triple_scores(in, result.best, lcfg, pos);
  std::vector<double> neg_scores = eval_triple_scores(in, result.best, lcfg, neg);
  double pos_mean = std::accumulate(pos_scores.begin(), pos_scores.end(), 0.0) /
                    static_cast<double>(pos_scores.size());
  double neg_mean = std::accumulate(neg_scores.begin(), neg_scores.end(), 0.0) /
                    static_cast<double>(neg_scores.size());
  CHECK(pos_mean < neg_mean);

  SUBCASE("same seed reproduces the pretraining history") {
    ModelParams params2 = ModelParams::init(task.dims, lcfg, 103);
    TrainResult again = run_pretrain(task.kg, in, params2, lcfg, rcfg, train_idx, val_idx);
    REQUIRE(again.history.size() == result.history.size());
    for (std::size_t i = 0; i < result.history.size(); ++i) {
      CHECK(again.history[i].loss == result.history[i].loss);
      CHECK(again.history[i].val_loss == result.history[i].val_loss);
    }
  }
}

TEST_CASE("divergence aborts the run but returns cleanly") {
  ToyTask task = make_toy_task(6);
  GraphInputs in{&task.graph, &task.numeric, &task.text};
  std::vector<std::size_t> diag = diagnosis_triples(task.kg);
  std::mt19937_64 pair_rng(111);
  std::vector<FinetunePair> pairs = build_finetune_pairs(task.kg, diag, 1, pair_rng);

  LayerConfig lcfg;
  lcfg.aggregator = Aggregator::Gcn;
  lcfg.layers = 1;
  lcfg.dim = 6;
  lcfg.dropout = 0.0;

  TrainRunConfig rcfg;
  rcfg.epochs = 5;
  rcfg.seed = 112;

  ModelParams params = ModelParams::init(task.dims, lcfg, 113);
  params.entity_emb = Tensor(Matrix::Constant(task.dims.n_entities, 6, 1e200), true);

  TrainResult result = run_finetune(task.kg, in, params, lcfg, rcfg, pairs, pairs);
  CHECK(result.diverged);
  CHECK(result.history.empty());
  CHECK(result.best_epoch == 0);
  // The returned checkpoint is the pre-divergence state, still usable.
  CHECK(result.best.entity_emb.rows() == task.dims.n_entities);
}
