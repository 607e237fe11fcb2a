#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "pslab/losses.hpp"
#include "pslab/ops.hpp"

namespace pslab {

// Named, stably ordered parameter collection. Tensor addresses are stable
// for the lifetime of the collection (graphs hold pointers into it).
class ModelParameters {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;
  size_t size() const { return items_.size(); }

  struct Item {
    std::string name;
    Tensor tensor;
  };
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  void zero_grads();
  std::int64_t count_values() const;

 private:
  std::deque<Item> items_;
};

// One mini-batch of supervision targets; models pick the fields they train
// on. Mask label maps are stacked per scale as [N,1,s,s].
struct TrainBatch {
  Tensor images;                     // [N,3,S,S]
  std::vector<Tensor> mask_pyramid;  // per model scale
  std::vector<Tensor> depth_pyramid; // per depth scale
  Tensor scalar_labels;              // [N,1], 1 = live
};

struct MaskNetConfig {
  int input_side = 64;
  int feature_channels = 64;
  std::vector<int> scales{8, 4, 2, 1};

  int feature_side() const { return input_side / 8; }
  int classifier_inputs() const;
  void validate() const;
};

struct DepthNetConfig {
  int input_side = 64;
  double theta = 0.7;
  std::vector<int> scales{32, 16};

  int output_side() const { return input_side / 2; }
  void validate() const;
};

// Pyramid-supervised mask network: a small three-stage backbone producing
// C x 8 x 8 features, per-scale average pooling + unshared 1x1 convolution
// + sigmoid mask heads, and a single linear classifier over the
// concatenated masks (higher score = more live).
class MaskNet {
 public:
  MaskNet(MaskNetConfig cfg, std::uint64_t seed);

  const MaskNetConfig& config() const { return cfg_; }
  ModelParameters& params() { return params_; }
  const ModelParameters& params() const { return params_; }
  static const char* kind() { return "mask"; }

  Var backbone(Graph& g, Var x);
  std::vector<Var> mask_pyramid(Graph& g, Var features);
  Var classify(Graph& g, const std::vector<Var>& masks);

  struct Forward {
    Var features;
    std::vector<Var> masks;
    Var score;
  };
  Forward forward(Graph& g, Var x);

  LossVars training_loss(Graph& g, const TrainBatch& batch, const LossConfig& loss_cfg);
  double score_image(const Tensor& image);

  // Per-scale predicted masks plus the final score for one image.
  struct Prediction {
    Pyramid masks;
    double score = 0.0;
  };
  Prediction predict(const Tensor& image);

 private:
  MaskNetConfig cfg_;
  ModelParameters params_;
};

// Spatial-pyramid-pooling baseline: same backbone, but the pooled raw
// features are concatenated directly (C * sum(s^2) values) and supervised
// only by the scalar label.
class SppNet {
 public:
  SppNet(MaskNetConfig cfg, std::uint64_t seed);

  const MaskNetConfig& config() const { return cfg_; }
  ModelParameters& params() { return params_; }
  const ModelParameters& params() const { return params_; }
  static const char* kind() { return "spp"; }

  Var forward(Graph& g, Var x);  // score
  LossVars training_loss(Graph& g, const TrainBatch& batch, const LossConfig& loss_cfg);
  double score_image(const Tensor& image);

 private:
  MaskNetConfig cfg_;
  ModelParameters params_;
};

// Depth-supervised fully convolutional network built from central
// difference convolutions; predicts a [0,1] depth map at input_side/2.
class DepthNet {
 public:
  DepthNet(DepthNetConfig cfg, std::uint64_t seed);

  const DepthNetConfig& config() const { return cfg_; }
  ModelParameters& params() { return params_; }
  const ModelParameters& params() const { return params_; }
  static const char* kind() { return "depth"; }

  // [3,S,S] -> [1,S/2,S/2]; batched input adds the leading dimension.
  Var forward(Graph& g, Var x);

  LossVars training_loss(Graph& g, const TrainBatch& batch, const LossConfig& loss_cfg);
  double score_image(const Tensor& image);
  Tensor predict_map(const Tensor& image);  // [S/2, S/2]

 private:
  DepthNetConfig cfg_;
  ModelParameters params_;
};

// Test-time depth score: mean over scales of the per-scale mean of the
// block-mean-decomposed map. With block-mean downsampling every scale's
// mean equals the base mean, so this equals mean(d_map); both facts are
// asserted in tests.
double depth_score(const Tensor& d_map, const std::vector<int>& scales);

}  // namespace pslab
