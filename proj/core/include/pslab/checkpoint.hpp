#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pslab/networks.hpp"

namespace pslab {

// Checkpoint layout: one directory holding manifest.json (kind, model
// config, seed, epoch, parameter names and shapes) plus one tensor file
// per parameter.
struct CheckpointInfo {
  std::string kind;         // "mask" | "depth" | "spp"
  std::string config_json;  // model config as serialized by the caller
  std::uint64_t seed = 0;
  int epoch = 0;
  std::vector<std::pair<std::string, Shape>> params;
};

void save_checkpoint(const std::string& dir, const std::string& kind,
                     const std::string& config_json, std::uint64_t seed, int epoch,
                     const ModelParameters& params);

CheckpointInfo load_checkpoint_info(const std::string& dir);

// Loads tensors into an already-constructed parameter collection; names and
// shapes must match exactly.
void load_checkpoint_params(const std::string& dir, ModelParameters& params);

}  // namespace pslab
