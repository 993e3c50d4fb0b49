#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kge/pipeline.hpp"

namespace {

using kge::ExperimentConfig;

// Flags shared by every subcommand; unset options leave the config file (or
// built-in default) value alone.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> aggregator;
  std::optional<int> layers;
  std::optional<std::string> residual;
  std::optional<std::string> literals;
  std::optional<std::string> pretrained;
  std::optional<std::string> out;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its fields");
  cmd->add_option("--seed", o.seed, "experiment seed (drives splits, init and sampling)");
  cmd->add_option("--aggregator", o.aggregator,
                  "gcn|graphsage|bi-interaction|gin");
  cmd->add_option("--layers", o.layers, "number of propagation layers");
  cmd->add_option("--residual", o.residual, "identity-residual connections: on|off");
  cmd->add_option("--literals", o.literals, "literal channels: none|numeric|text|both");
  cmd->add_option("--pretrained", o.pretrained, "checkpoint directory to start from / evaluate");
  cmd->add_option("--out", o.out, "output directory for artifacts");
}

bool parse_on_off(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw kge::ConfigError("--residual expects on|off, got '" + s + "'");
}

ExperimentConfig make_config(const Overrides& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{}
                                               : kge::load_experiment_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.aggregator) cfg.model.aggregator = kge::aggregator_from_string(*o.aggregator);
  if (o.layers) cfg.model.layers = *o.layers;
  if (o.residual) cfg.model.residual_identity = parse_on_off(*o.residual);
  if (o.literals) cfg.literals = kge::literal_flags_from_string(*o.literals);
  if (o.pretrained) cfg.pretrained = *o.pretrained;
  if (o.out) cfg.out_dir = *o.out;
  return cfg;
}

int fail(const char* type, const std::string& message, int code) {
  nlohmann::ordered_json j{{"error", {{"type", type}, {"message", message}}}};
  std::cerr << j.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterogeneous knowledge-graph embeddings for medical-record diagnosis"};
  app.require_subcommand(1);

  Overrides o;
  std::string split = "test";
  std::string scenario = "literals";
  std::vector<std::uint64_t> seeds;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic record corpus");
  CLI::App* build = app.add_subcommand("build-kg", "build the knowledge graph from records");
  CLI::App* pretrain = app.add_subcommand("pretrain", "self-supervised triple-ranking phase");
  CLI::App* finetune = app.add_subcommand("finetune", "supervised diagnosis classification");
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a saved checkpoint on a split");
  CLI::App* ablate = app.add_subcommand("ablate", "multi-seed comparison of model variants");
  for (CLI::App* cmd : {synth, build, pretrain, finetune, evaluate, ablate}) {
    add_common_flags(cmd, o);
  }
  evaluate->add_option("--split", split, "train|val|test (default test)");
  ablate->add_option("--scenario", scenario,
                     "literals|residual|pretrain|depth|aggregator (default literals)");
  ablate->add_option("--seeds", seeds, "explicit seed list (default: seed, seed+1, seed+2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("ConfigError", e.what(), 1);
  }

  try {
    ExperimentConfig cfg = make_config(o);
    if (*synth) {
      kge::cmd_synth(cfg);
    } else if (*build) {
      kge::cmd_build_kg(cfg);
    } else if (*pretrain) {
      kge::cmd_pretrain(cfg);
    } else if (*finetune) {
      kge::cmd_finetune(cfg);
    } else if (*evaluate) {
      kge::cmd_evaluate(cfg, split);
    } else if (*ablate) {
      kge::cmd_ablate(cfg, scenario, seeds);
    }
    return 0;
  } catch (const kge::ConfigError& e) {
    return fail("ConfigError", e.what(), 1);
  } catch (const kge::SchemaError& e) {
    return fail("SchemaError", e.what(), 1);
  } catch (const kge::ContractError& e) {
    return fail("ContractError", e.what(), 1);
  } catch (const kge::SamplingError& e) {
    return fail("SamplingError", e.what(), 1);
  } catch (const kge::DimensionError& e) {
    return fail("DimensionError", e.what(), 1);
  } catch (const kge::IoError& e) {
    return fail("IoError", e.what(), 2);
  } catch (const kge::TrainingError& e) {
    return fail("TrainingError", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("InternalError", e.what(), 1);
  }
}
