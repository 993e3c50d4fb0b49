#pragma once

#include <string>

#include "kge/model.hpp"

namespace kge {

// On-disk layout: <dir>/manifest.json describing dims, the layer
// configuration and every tensor (name, shape, blob file); one .bin blob per
// tensor holding raw little-endian doubles in row-major order.
void save_checkpoint(const std::string& dir, ModelParams& params, const LayerConfig& cfg);

struct LoadedCheckpoint {
  ModelParams params;
  LayerConfig config;
};

// Rebuilds the parameter set from a manifest directory. Shape or name
// mismatches between the manifest and the reconstructed parameter tree are
// I/O errors, as are missing or short blob files.
LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace kge
