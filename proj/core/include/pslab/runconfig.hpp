#pragma once

#include <string>
#include <vector>

#include "pslab/networks.hpp"
#include "pslab/optim.hpp"
#include "pslab/synth.hpp"
#include "pslab/train.hpp"

namespace pslab {

struct ModelConfig {
  std::string kind = "mask";  // mask | depth | spp
  std::uint64_t seed = 1;
  MaskNetConfig mask;
  DepthNetConfig depth;

  void validate() const;
};

struct ProtocolConfig {
  ProtocolKind kind = ProtocolKind::intra;
  std::string held_out;
};

struct AblateConfig {
  std::string label_kind = "mask";  // mask | depth
  std::vector<std::vector<int>> scale_sets;
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct VisualizeConfig {
  int count = 4;
};

// Whole-run configuration document. Parsing is strict: unknown keys are
// rejected with the offending key named, and every run writes its resolved
// form (all defaults filled in) next to its outputs.
struct RunConfig {
  SynthConfig synth;
  ModelConfig model;
  OptimConfig optim;
  LossConfig loss;
  ProtocolConfig protocol;
  MetricsConfig metrics;
  AblateConfig ablate;
  VisualizeConfig visualize;
  std::string output_dir = "out";
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

// The model section alone; used for checkpoint manifests.
ModelConfig parse_model_config(const std::string& json_text);
std::string model_config_to_json(const ModelConfig& cfg);

}  // namespace pslab
