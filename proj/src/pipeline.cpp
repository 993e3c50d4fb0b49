#include "kge/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <unordered_set>

#include "kge/attributes.hpp"
#include "kge/records.hpp"
#include "kge/synth.hpp"
#include "kge/text_embed.hpp"

namespace kge {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Domain separators so the record split, the pretraining triple split and the
// pair sampling each get an independent stream from one experiment seed.
constexpr std::uint64_t kRecordSplitSalt = 0x7265635f73706c74ULL;
constexpr std::uint64_t kTripleSplitSalt = 0x70745f73706c6974ULL;
constexpr std::uint64_t kPairSalt = 0x706169725f73616cULL;
constexpr std::uint64_t kHoldoutSalt = 0x686f6c645f6f7574ULL;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

std::string join(const std::string& dir, const char* leaf) {
  return (fs::path(dir) / leaf).string();
}

void print_summary(const ordered_json& j) { std::cout << j.dump() << std::endl; }

ordered_json metrics_json(const MetricsReport& report) {
  return ordered_json::parse(report.to_json());
}

// Checkpoints must agree with the requested architecture in every field that
// changes parameter shapes or the forward graph.
void check_architecture(const LayerConfig& ck, const LayerConfig& want, const ModelDims& have,
                        const ModelDims& want_dims) {
  if (ck.aggregator != want.aggregator || ck.layers != want.layers || ck.dim != want.dim ||
      ck.residual_identity != want.residual_identity ||
      ck.gin_epsilon_learnable != want.gin_epsilon_learnable) {
    throw ConfigError("checkpoint architecture does not match the requested model");
  }
  if (have.n_entities != want_dims.n_entities || have.n_relations != want_dims.n_relations ||
      have.dim != want_dims.dim || have.numeric_width != want_dims.numeric_width ||
      have.text_width != want_dims.text_width) {
    throw ConfigError("checkpoint dimensions do not match the knowledge graph");
  }
}

std::vector<EntityId> resolve_records(const KnowledgeGraph& kg,
                                      const std::vector<std::string>& names) {
  std::vector<EntityId> ids;
  ids.reserve(names.size());
  for (const auto& name : names) {
    auto id = kg.find(EntityKind::MedicalRecord, name);
    if (!id) throw ContractError("bundle split references unknown record '" + name + "'");
    ids.push_back(*id);
  }
  return ids;
}

}  // namespace

std::string effective_data_csv(const ExperimentConfig& cfg) {
  return cfg.data_csv.empty() ? join(cfg.out_dir, "data.csv") : cfg.data_csv;
}

std::string effective_kg_path(const ExperimentConfig& cfg) {
  return cfg.kg_path.empty() ? join(cfg.out_dir, "kg.json") : cfg.kg_path;
}

TaskData prepare_task(const KgBundle& bundle, const ExperimentConfig& cfg) {
  cfg.validate();
  const KnowledgeGraph& kg = bundle.kg;
  if (!kg.frozen()) throw ContractError("prepare_task: graph must be frozen");

  auto train_ids = resolve_records(kg, bundle.train_records);
  auto val_ids = resolve_records(kg, bundle.val_records);
  auto test_ids = resolve_records(kg, bundle.test_records);
  std::unordered_set<EntityId> heldout(val_ids.begin(), val_ids.end());
  heldout.insert(test_ids.begin(), test_ids.end());
  std::unordered_set<EntityId> train_set(train_ids.begin(), train_ids.end());

  const RelationId r_d = kg.relation_id("r_D");
  const auto& triples = kg.triples();
  std::vector<char> keep(triples.size(), 1);
  std::vector<std::size_t> train_diag, val_diag, test_diag;
  std::unordered_set<EntityId> val_set(val_ids.begin(), val_ids.end());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const Triple& t = triples[i];
    if (t.relation != r_d) continue;
    if (heldout.count(t.head)) {
      keep[i] = 0;
      (val_set.count(t.head) ? val_diag : test_diag).push_back(i);
    } else if (train_set.count(t.head)) {
      train_diag.push_back(i);
    }
  }

  TaskData task;
  task.graph = PropGraph::from_kg(kg, &keep);

  std::vector<std::size_t> visible;
  visible.reserve(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (keep[i]) visible.push_back(i);
  }
  std::mt19937_64 split_rng(cfg.seed ^ kTripleSplitSalt);
  std::shuffle(visible.begin(), visible.end(), split_rng);
  std::size_t n_val = std::max<std::size_t>(1, visible.size() / 10);
  if (n_val >= visible.size()) throw ContractError("prepare_task: too few visible triples");
  task.pretrain_val.assign(visible.end() - static_cast<std::ptrdiff_t>(n_val), visible.end());
  task.pretrain_train.assign(visible.begin(),
                             visible.end() - static_cast<std::ptrdiff_t>(n_val));

  std::mt19937_64 pair_rng(cfg.seed ^ kPairSalt);
  task.train_pairs = build_finetune_pairs(kg, train_diag, cfg.finetune.negatives, pair_rng);
  task.val_pairs = build_finetune_pairs(kg, val_diag, 1, pair_rng);
  task.test_pairs = build_finetune_pairs(kg, test_diag, 1, pair_rng);

  SubwordEmbedder embedder(static_cast<int>(cfg.text_width));
  AttributeVectors av = build_attribute_vectors(kg, bundle.stats, embedder);
  task.numeric = std::move(av.numeric);
  task.text = std::move(av.text);
  if (!cfg.literals.use_numeric) task.numeric.setZero();
  if (!cfg.literals.use_text) task.text.setZero();

  task.dims.n_entities = static_cast<Index>(kg.entity_count());
  task.dims.n_relations = static_cast<Index>(kg.schema().size());
  task.dims.dim = cfg.model.dim;
  task.dims.numeric_width = task.numeric.cols();
  task.dims.text_width = task.text.cols();
  return task;
}

RunOutcome run_experiment(const KgBundle& bundle, const ExperimentConfig& cfg, bool do_pretrain) {
  TaskData task = prepare_task(bundle, cfg);
  GraphInputs in{&task.graph, &task.numeric, &task.text};
  ModelParams params = ModelParams::init(task.dims, cfg.model, cfg.seed);

  RunOutcome outcome;
  if (do_pretrain) {
    TrainRunConfig rc = cfg.pretrain;
    rc.seed = cfg.seed;
    outcome.pretrain = run_pretrain(bundle.kg, in, params, cfg.model, rc, task.pretrain_train,
                                    task.pretrain_val);
    if (outcome.pretrain.diverged) throw TrainingError("pretraining diverged");
    params = outcome.pretrain.best.clone();
  }

  TrainRunConfig rc = cfg.finetune;
  rc.seed = cfg.seed;
  outcome.finetune =
      run_finetune(bundle.kg, in, params, cfg.model, rc, task.train_pairs, task.val_pairs);
  if (outcome.finetune.diverged) throw TrainingError("fine-tuning diverged");
  outcome.test = evaluate_pairs(bundle.kg, in, outcome.finetune.best, cfg.model, task.test_pairs);
  return outcome;
}

void write_history_jsonl(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const EpochStats& e : history) {
    ordered_json j{{"phase", e.phase}, {"epoch", e.epoch},   {"loss", e.loss},
                   {"acc", e.acc},     {"precision", e.precision}, {"recall", e.recall},
                   {"f1", e.f1},       {"wall_ms", e.wall_ms}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

void cmd_synth(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  SynthConfig sc = cfg.synth;
  sc.seed = cfg.seed;
  SynthCorpus corpus = generate_corpus(sc);
  const std::string path = effective_data_csv(cfg);
  ensure_dir(fs::path(path).parent_path().string());
  write_records_csv(corpus.records, path);
  print_summary(ordered_json{{"command", "synth"},
                             {"data_csv", path},
                             {"records", corpus.records.size()},
                             {"diseases", corpus.disease_names.size()},
                             {"signal_mode", to_string(sc.signal_mode)}});
}

void cmd_build_kg(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  ParseResult parsed = parse_records(effective_data_csv(cfg), RecordFormat::Csv);

  std::vector<std::size_t> order(parsed.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ kRecordSplitSalt);
  auto parts = split_three_way(std::move(order), {cfg.train_ratio, cfg.val_ratio, cfg.test_ratio},
                               rng);

  std::vector<EmrRecord> train_records;
  train_records.reserve(parts[0].size());
  for (std::size_t i : parts[0]) train_records.push_back(parsed.records[i]);

  KgBundle bundle;
  bundle.stats = compute_numeric_stats(train_records);
  bundle.kg = build_kg(parsed.records);
  auto names_of = [&](const std::vector<std::size_t>& part) {
    std::vector<std::string> names;
    names.reserve(part.size());
    for (std::size_t i : part) names.push_back(parsed.records[i].record_id);
    return names;
  };
  bundle.train_records = names_of(parts[0]);
  bundle.val_records = names_of(parts[1]);
  bundle.test_records = names_of(parts[2]);

  const std::string path = effective_kg_path(cfg);
  ensure_dir(fs::path(path).parent_path().string());
  save_kg_bundle(path, bundle);
  print_summary(ordered_json{{"command", "build-kg"},
                             {"kg_path", path},
                             {"entities", bundle.kg.entity_count()},
                             {"triples", bundle.kg.triple_count()},
                             {"records",
                              {{"train", bundle.train_records.size()},
                               {"val", bundle.val_records.size()},
                               {"test", bundle.test_records.size()}}},
                             {"parse_issues", parsed.issues.size()}});
}

void cmd_pretrain(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  KgBundle bundle = load_kg_bundle(effective_kg_path(cfg));
  TaskData task = prepare_task(bundle, cfg);
  GraphInputs in{&task.graph, &task.numeric, &task.text};
  ModelParams params = ModelParams::init(task.dims, cfg.model, cfg.seed);

  TrainRunConfig rc = cfg.pretrain;
  rc.seed = cfg.seed;
  TrainResult res = run_pretrain(bundle.kg, in, params, cfg.model, rc, task.pretrain_train,
                                 task.pretrain_val);

  const std::string ck_dir = join(cfg.out_dir, "checkpoint");
  save_checkpoint(ck_dir, res.best, cfg.model);
  write_history_jsonl(join(cfg.out_dir, "history.jsonl"), res.history);
  write_text(join(cfg.out_dir, "config.json"), to_json(cfg) + "\n");

  // Held-out sanity: the ranking objective should place positives below
  // freshly sampled corrupted tails.
  std::vector<Triple> positives, negatives;
  std::mt19937_64 rng(cfg.seed ^ kHoldoutSalt);
  for (std::size_t idx : task.pretrain_val) {
    const Triple& pos = bundle.kg.triples()[idx];
    try {
      std::vector<Triple> neg = bundle.kg.sample_negatives(pos, 1, rng);
      positives.push_back(pos);
      negatives.push_back(neg.front());
    } catch (const SamplingError&) {
      // Tail pool exhausted for this head/relation; skip the triple.
    }
  }
  double mean_pos = 0.0, mean_neg = 0.0;
  if (!positives.empty()) {
    std::vector<double> ps = eval_triple_scores(in, res.best, cfg.model, positives);
    std::vector<double> ns = eval_triple_scores(in, res.best, cfg.model, negatives);
    mean_pos = std::accumulate(ps.begin(), ps.end(), 0.0) / static_cast<double>(ps.size());
    mean_neg = std::accumulate(ns.begin(), ns.end(), 0.0) / static_cast<double>(ns.size());
  }
  ordered_json report{{"best_epoch", res.best_epoch},
                      {"best_val_loss", res.best_metric},
                      {"holdout",
                       {{"pairs", positives.size()},
                        {"mean_positive_score", mean_pos},
                        {"mean_negative_score", mean_neg},
                        {"positives_score_lower", mean_pos < mean_neg}}}};
  write_text(join(cfg.out_dir, "pretrain_report.json"), report.dump(2) + "\n");

  if (res.diverged) throw TrainingError("pretraining diverged; best checkpoint saved");
  print_summary(ordered_json{{"command", "pretrain"},
                             {"checkpoint", ck_dir},
                             {"epochs_run", res.history.size()},
                             {"best_epoch", res.best_epoch},
                             {"best_val_loss", res.best_metric},
                             {"holdout_positives_lower", mean_pos < mean_neg}});
}

void cmd_finetune(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  KgBundle bundle = load_kg_bundle(effective_kg_path(cfg));
  TaskData task = prepare_task(bundle, cfg);
  GraphInputs in{&task.graph, &task.numeric, &task.text};

  ModelParams params;
  if (!cfg.pretrained.empty()) {
    LoadedCheckpoint ck = load_checkpoint(cfg.pretrained);
    check_architecture(ck.config, cfg.model, ck.params.dims, task.dims);
    params = std::move(ck.params);
  } else {
    params = ModelParams::init(task.dims, cfg.model, cfg.seed);
  }

  TrainRunConfig rc = cfg.finetune;
  rc.seed = cfg.seed;
  TrainResult res =
      run_finetune(bundle.kg, in, params, cfg.model, rc, task.train_pairs, task.val_pairs);

  const std::string ck_dir = join(cfg.out_dir, "checkpoint");
  save_checkpoint(ck_dir, res.best, cfg.model);
  write_history_jsonl(join(cfg.out_dir, "history.jsonl"), res.history);
  write_text(join(cfg.out_dir, "config.json"), to_json(cfg) + "\n");
  if (res.diverged) throw TrainingError("fine-tuning diverged; best checkpoint saved");

  MetricsReport test = evaluate_pairs(bundle.kg, in, res.best, cfg.model, task.test_pairs);
  ordered_json mj{{"split", "test"}, {"seed", cfg.seed}, {"metrics", metrics_json(test)}};
  write_text(join(cfg.out_dir, "metrics.json"), mj.dump(2) + "\n");

  print_summary(ordered_json{{"command", "finetune"},
                             {"checkpoint", ck_dir},
                             {"epochs_run", res.history.size()},
                             {"best_epoch", res.best_epoch},
                             {"best_val_f1", res.best_metric},
                             {"test_f1", test.f1}});
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::string& split) {
  cfg.validate();
  if (cfg.pretrained.empty()) {
    throw ConfigError("evaluate requires --pretrained with a checkpoint directory");
  }
  if (split != "train" && split != "val" && split != "test") {
    throw ConfigError("evaluate: split must be train, val or test");
  }
  ensure_dir(cfg.out_dir);
  KgBundle bundle = load_kg_bundle(effective_kg_path(cfg));
  LoadedCheckpoint ck = load_checkpoint(cfg.pretrained);

  ExperimentConfig eff = cfg;
  eff.model = ck.config;  // the checkpoint defines the architecture
  TaskData task = prepare_task(bundle, eff);
  check_architecture(ck.config, eff.model, ck.params.dims, task.dims);
  GraphInputs in{&task.graph, &task.numeric, &task.text};

  const std::vector<FinetunePair>& pairs = split == "train"  ? task.train_pairs
                                           : split == "val" ? task.val_pairs
                                                            : task.test_pairs;
  MetricsReport report = evaluate_pairs(bundle.kg, in, ck.params, eff.model, pairs);
  ordered_json mj{{"split", split}, {"seed", cfg.seed}, {"metrics", metrics_json(report)}};
  write_text(join(cfg.out_dir, "metrics.json"), mj.dump(2) + "\n");
  print_summary(ordered_json{{"command", "evaluate"},
                             {"split", split},
                             {"pairs", pairs.size()},
                             {"f1", report.f1},
                             {"acc", report.acc}});
}

void cmd_ablate(const ExperimentConfig& cfg, const std::string& scenario,
                std::vector<std::uint64_t> seeds) {
  cfg.validate();
  if (seeds.empty()) seeds = {cfg.seed, cfg.seed + 1, cfg.seed + 2};
  if (seeds.size() < 3) throw ConfigError("ablate needs at least 3 seeds");
  ensure_dir(cfg.out_dir);
  KgBundle bundle = load_kg_bundle(effective_kg_path(cfg));

  struct Variant {
    std::string name;
    ExperimentConfig cfg;
    bool pretrain = false;
  };
  std::vector<Variant> variants;
  auto with = [&](const std::string& name, auto&& mutate, bool pre = false) {
    Variant v{name, cfg, pre};
    mutate(v.cfg);
    variants.push_back(std::move(v));
  };
  if (scenario == "literals") {
    for (const char* mode : {"none", "numeric", "text", "both"}) {
      with(mode, [&](ExperimentConfig& c) { c.literals = literal_flags_from_string(mode); });
    }
  } else if (scenario == "residual") {
    with("off", [](ExperimentConfig& c) { c.model.residual_identity = false; });
    with("on", [](ExperimentConfig& c) { c.model.residual_identity = true; });
  } else if (scenario == "pretrain") {
    with("scratch", [](ExperimentConfig&) {});
    with("pretrained", [](ExperimentConfig&) {}, true);
  } else if (scenario == "depth") {
    for (int k : {1, 2, 3}) {
      with(std::to_string(k) + "_layers", [&](ExperimentConfig& c) { c.model.layers = k; });
    }
  } else if (scenario == "aggregator") {
    for (const char* a : {"gcn", "graphsage", "bi-interaction", "gin"}) {
      with(a, [&](ExperimentConfig& c) { c.model.aggregator = aggregator_from_string(a); });
    }
  } else {
    throw ConfigError("ablate: unknown scenario '" + scenario +
                      "' (expected literals|residual|pretrain|depth|aggregator)");
  }

  auto mean_sd = [](const std::vector<double>& xs) {
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return std::pair<double, double>(mean, sd);
  };

  std::string runs_csv = "scenario,variant,seed,f1,acc,precision,recall\n";
  std::string summary_csv =
      "scenario,variant,seeds,f1_mean,f1_sd,acc_mean,acc_sd,precision_mean,precision_sd,"
      "recall_mean,recall_sd\n";
  ordered_json summary = ordered_json::array();
  for (const Variant& v : variants) {
    std::vector<double> f1s, accs, precs, recs;
    std::string seed_list;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig run_cfg = v.cfg;
      run_cfg.seed = seed;
      RunOutcome out = run_experiment(bundle, run_cfg, v.pretrain);
      f1s.push_back(out.test.f1);
      accs.push_back(out.test.acc);
      precs.push_back(out.test.precision);
      recs.push_back(out.test.recall);
      runs_csv += scenario + "," + v.name + "," + std::to_string(seed) + "," +
                  std::to_string(out.test.f1) + "," + std::to_string(out.test.acc) + "," +
                  std::to_string(out.test.precision) + "," + std::to_string(out.test.recall) +
                  "\n";
      seed_list += (seed_list.empty() ? "" : ";") + std::to_string(seed);
    }
    auto [f1m, f1s_] = mean_sd(f1s);
    auto [am, as_] = mean_sd(accs);
    auto [pm, ps_] = mean_sd(precs);
    auto [rm, rs_] = mean_sd(recs);
    summary_csv += scenario + "," + v.name + "," + seed_list + "," + std::to_string(f1m) + "," +
                   std::to_string(f1s_) + "," + std::to_string(am) + "," + std::to_string(as_) +
                   "," + std::to_string(pm) + "," + std::to_string(ps_) + "," +
                   std::to_string(rm) + "," + std::to_string(rs_) + "\n";
    summary.push_back(ordered_json{{"variant", v.name},
                                   {"f1_mean", f1m},
                                   {"f1_sd", f1s_},
                                   {"acc_mean", am},
                                   {"acc_sd", as_}});
  }
  write_text(join(cfg.out_dir, "ablation.csv"), summary_csv);
  write_text(join(cfg.out_dir, "ablation_runs.csv"), runs_csv);
  print_summary(
      ordered_json{{"command", "ablate"}, {"scenario", scenario}, {"variants", summary}});
}

}  // namespace kge
