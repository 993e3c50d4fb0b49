#include "kge/checkpoint.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace kge {

namespace {

using nlohmann::ordered_json;

std::string blob_name(std::string name) {
  for (char& c : name) {
    if (c == '.') c = '_';
  }
  return name + ".bin";
}

void write_blob(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
  // Row-major storage writes out in row-major order directly.
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  if (!out) throw IoError("checkpoint: short write to " + path.string());
}

Matrix read_blob(const std::filesystem::path& path, Index rows, Index cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size()))) {
    throw IoError("checkpoint: blob " + path.string() + " is shorter than its manifest shape");
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw IoError("checkpoint: blob " + path.string() + " is longer than its manifest shape");
  }
  return m;
}

ordered_json layer_config_json(const LayerConfig& cfg) {
  ordered_json j;
  j["aggregator"] = to_string(cfg.aggregator);
  j["layers"] = cfg.layers;
  j["dim"] = cfg.dim;
  j["dropout"] = cfg.dropout;
  j["residual_identity"] = cfg.residual_identity;
  j["alpha"] = cfg.alpha;
  j["lambda_rc"] = cfg.lambda_rc;
  j["gin_epsilon"] = cfg.gin_epsilon;
  j["gin_epsilon_learnable"] = cfg.gin_epsilon_learnable;
  return j;
}

LayerConfig layer_config_from_json(const ordered_json& j) {
  LayerConfig cfg;
  cfg.aggregator = aggregator_from_string(j.at("aggregator").get<std::string>());
  cfg.layers = j.at("layers").get<int>();
  cfg.dim = j.at("dim").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.residual_identity = j.at("residual_identity").get<bool>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.lambda_rc = j.at("lambda_rc").get<double>();
  cfg.gin_epsilon = j.at("gin_epsilon").get<double>();
  cfg.gin_epsilon_learnable = j.at("gin_epsilon_learnable").get<bool>();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& dir, ModelParams& params, const LayerConfig& cfg) {
  std::filesystem::path root(dir);
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw IoError("checkpoint: cannot create directory " + dir + ": " + ec.message());

  ordered_json manifest;
  manifest["format"] = "f64-le-rowmajor";
  manifest["dims"] = {{"n_entities", params.dims.n_entities},
                      {"n_relations", params.dims.n_relations},
                      {"dim", params.dims.dim},
                      {"numeric_width", params.dims.numeric_width},
                      {"text_width", params.dims.text_width}};
  manifest["layer_config"] = layer_config_json(cfg);

  ordered_json tensors = ordered_json::array();
  for (const NamedParam& p : params.named_params()) {
    const Matrix& m = p.tensor->value();
    std::string file = blob_name(p.name);
    tensors.push_back(
        {{"name", p.name}, {"rows", m.rows()}, {"cols", m.cols()}, {"file", file}});
    write_blob(root / file, m);
  }
  manifest["tensors"] = std::move(tensors);

  std::ofstream out(root / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot write manifest in " + dir);
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("checkpoint: short write of manifest in " + dir);
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  std::filesystem::path root(dir);
  std::ifstream in(root / "manifest.json");
  if (!in) throw IoError("checkpoint: cannot open manifest in " + dir);
  ordered_json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint: malformed manifest in " + dir + ": " + e.what());
  }

  LoadedCheckpoint loaded;
  try {
    loaded.config = layer_config_from_json(manifest.at("layer_config"));
    const auto& dims_j = manifest.at("dims");
    ModelDims dims;
    dims.n_entities = dims_j.at("n_entities").get<Index>();
    dims.n_relations = dims_j.at("n_relations").get<Index>();
    dims.dim = dims_j.at("dim").get<Index>();
    dims.numeric_width = dims_j.at("numeric_width").get<Index>();
    dims.text_width = dims_j.at("text_width").get<Index>();

    // Allocate the right tensor tree, then overwrite every blob.
    try {
      loaded.params = ModelParams::init(dims, loaded.config, 0);
    } catch (const std::runtime_error& e) {
      throw IoError("checkpoint: manifest in " + dir + " is inconsistent: " + e.what());
    }
    std::vector<NamedParam> named = loaded.params.named_params();

    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != named.size()) {
      throw IoError("checkpoint: manifest lists " + std::to_string(tensors.size()) +
                    " tensors but the configuration implies " + std::to_string(named.size()));
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      const auto& entry = tensors.at(i);
      const std::string name = entry.at("name").get<std::string>();
      if (name != named[i].name) {
        throw IoError("checkpoint: manifest tensor '" + name + "' does not match expected '" +
                      named[i].name + "'");
      }
      const Index rows = entry.at("rows").get<Index>();
      const Index cols = entry.at("cols").get<Index>();
      if (rows != named[i].tensor->rows() || cols != named[i].tensor->cols()) {
        throw IoError("checkpoint: tensor '" + name + "' has shape " + std::to_string(rows) +
                      "x" + std::to_string(cols) + ", expected " +
                      std::to_string(named[i].tensor->rows()) + "x" +
                      std::to_string(named[i].tensor->cols()));
      }
      *named[i].tensor =
          Tensor(read_blob(root / entry.at("file").get<std::string>(), rows, cols), true);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint: manifest in " + dir + " is missing fields: " + e.what());
  }
  return loaded;
}

}  // namespace kge
