#include "kge/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace kge {

namespace {

using nlohmann::ordered_json;

void check_keys(const ordered_json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_into(const ordered_json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

LiteralFlags literal_flags_from_string(const std::string& s) {
  if (s == "none") return {false, false};
  if (s == "numeric") return {true, false};
  if (s == "text") return {false, true};
  if (s == "both") return {true, true};
  throw ConfigError("unknown literal mode '" + s + "' (expected none|numeric|text|both)");
}

std::string to_string(const LiteralFlags& f) {
  if (f.use_numeric && f.use_text) return "both";
  if (f.use_numeric) return "numeric";
  if (f.use_text) return "text";
  return "none";
}

void ExperimentConfig::validate() const {
  model.validate();
  pretrain.validate();
  finetune.validate();
  if (text_width < 1) throw ConfigError("text_width must be >= 1");
  if (train_ratio <= 0.0 || val_ratio <= 0.0 || test_ratio <= 0.0) {
    throw ConfigError("split ratios must be positive");
  }
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  if (out_dir.empty()) throw ConfigError("out_dir must be set");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(j,
             {"seed", "out_dir", "data_csv", "kg_path", "pretrained", "model", "literals",
              "text_width", "pretrain", "finetune", "split", "synth"},
             "the top level");

  ExperimentConfig cfg;
  try {
    read_into(j, "seed", cfg.seed);
    read_into(j, "out_dir", cfg.out_dir);
    read_into(j, "data_csv", cfg.data_csv);
    read_into(j, "kg_path", cfg.kg_path);
    read_into(j, "pretrained", cfg.pretrained);
    read_into(j, "text_width", cfg.text_width);

    if (j.contains("literals")) {
      cfg.literals = literal_flags_from_string(j.at("literals").get<std::string>());
    }

    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m,
                 {"aggregator", "layers", "dim", "dropout", "residual_identity", "alpha",
                  "lambda_rc", "gin_epsilon", "gin_epsilon_learnable"},
                 "model");
      if (m.contains("aggregator")) {
        cfg.model.aggregator = aggregator_from_string(m.at("aggregator").get<std::string>());
      }
      read_into(m, "layers", cfg.model.layers);
      read_into(m, "dim", cfg.model.dim);
      read_into(m, "dropout", cfg.model.dropout);
      read_into(m, "residual_identity", cfg.model.residual_identity);
      read_into(m, "alpha", cfg.model.alpha);
      read_into(m, "lambda_rc", cfg.model.lambda_rc);
      read_into(m, "gin_epsilon", cfg.model.gin_epsilon);
      read_into(m, "gin_epsilon_learnable", cfg.model.gin_epsilon_learnable);
    }

    auto read_run = [](const ordered_json& r, TrainRunConfig& out, const std::string& where) {
      check_keys(r, {"batch_size", "epochs", "patience", "negatives", "lr", "lambda_reg"},
                 where);
      read_into(r, "batch_size", out.batch_size);
      read_into(r, "epochs", out.epochs);
      read_into(r, "patience", out.patience);
      read_into(r, "negatives", out.negatives);
      read_into(r, "lr", out.lr);
      read_into(r, "lambda_reg", out.lambda_reg);
    };
    if (j.contains("pretrain")) read_run(j.at("pretrain"), cfg.pretrain, "pretrain");
    if (j.contains("finetune")) read_run(j.at("finetune"), cfg.finetune, "finetune");

    if (j.contains("split")) {
      const auto& s = j.at("split");
      check_keys(s, {"train", "val", "test"}, "split");
      read_into(s, "train", cfg.train_ratio);
      read_into(s, "val", cfg.val_ratio);
      read_into(s, "test", cfg.test_ratio);
    }

    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      check_keys(s,
                 {"n_animals", "min_records_per_animal", "max_records_per_animal", "n_diseases",
                  "n_symptom_vocab", "signal_mode"},
                 "synth");
      read_into(s, "n_animals", cfg.synth.n_animals);
      read_into(s, "min_records_per_animal", cfg.synth.min_records_per_animal);
      read_into(s, "max_records_per_animal", cfg.synth.max_records_per_animal);
      read_into(s, "n_diseases", cfg.synth.n_diseases);
      read_into(s, "n_symptom_vocab", cfg.synth.n_symptom_vocab);
      if (s.contains("signal_mode")) {
        cfg.synth.signal_mode = signal_mode_from_string(s.at("signal_mode").get<std::string>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: bad field type: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

std::string to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["data_csv"] = cfg.data_csv;
  j["kg_path"] = cfg.kg_path;
  j["pretrained"] = cfg.pretrained;
  j["model"] = {{"aggregator", to_string(cfg.model.aggregator)},
                {"layers", cfg.model.layers},
                {"dim", cfg.model.dim},
                {"dropout", cfg.model.dropout},
                {"residual_identity", cfg.model.residual_identity},
                {"alpha", cfg.model.alpha},
                {"lambda_rc", cfg.model.lambda_rc},
                {"gin_epsilon", cfg.model.gin_epsilon},
                {"gin_epsilon_learnable", cfg.model.gin_epsilon_learnable}};
  j["literals"] = to_string(cfg.literals);
  j["text_width"] = cfg.text_width;
  auto run_json = [](const TrainRunConfig& r) {
    return ordered_json{{"batch_size", r.batch_size}, {"epochs", r.epochs},
                        {"patience", r.patience},    {"negatives", r.negatives},
                        {"lr", r.lr},                {"lambda_reg", r.lambda_reg}};
  };
  j["pretrain"] = run_json(cfg.pretrain);
  j["finetune"] = run_json(cfg.finetune);
  j["split"] = {{"train", cfg.train_ratio}, {"val", cfg.val_ratio}, {"test", cfg.test_ratio}};
  j["synth"] = {{"n_animals", cfg.synth.n_animals},
                {"min_records_per_animal", cfg.synth.min_records_per_animal},
                {"max_records_per_animal", cfg.synth.max_records_per_animal},
                {"n_diseases", cfg.synth.n_diseases},
                {"n_symptom_vocab", cfg.synth.n_symptom_vocab},
                {"signal_mode", to_string(cfg.synth.signal_mode)}};
  return j.dump(2);
}

}  // namespace kge
