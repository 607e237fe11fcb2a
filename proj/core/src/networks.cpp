#include "pslab/networks.hpp"

#include <cmath>

#include "pslab/prng.hpp"

namespace pslab {

Tensor& ModelParameters::add(const std::string& name, Tensor t) {
  PSLAB_CHECK(!has(name), "duplicate parameter name " << name);
  items_.push_back({name, std::move(t)});
  items_.back().tensor.set_requires_grad(true);
  return items_.back().tensor;
}

Tensor& ModelParameters::at(const std::string& name) {
  for (auto& item : items_)
    if (item.name == name) return item.tensor;
  throw Error("unknown parameter " + name);
}

const Tensor& ModelParameters::at(const std::string& name) const {
  for (const auto& item : items_)
    if (item.name == name) return item.tensor;
  throw Error("unknown parameter " + name);
}

bool ModelParameters::has(const std::string& name) const {
  for (const auto& item : items_)
    if (item.name == name) return true;
  return false;
}

void ModelParameters::zero_grads() {
  for (auto& item : items_) item.tensor.zero_grad();
}

std::int64_t ModelParameters::count_values() const {
  std::int64_t n = 0;
  for (const auto& item : items_) n += item.tensor.numel();
  return n;
}

namespace {

// Uniform in [-gain*sqrt(1/fan_in), +gain*sqrt(1/fan_in)], one stream per
// parameter. Hidden convolutions use the Kaiming gain sqrt(6): without any
// normalization layers the plain 1/fan_in bound shrinks activations by
// ~6x per relu stage and the backbone output collapses to zero.
constexpr double kReluGain = 2.449489742783178;  // sqrt(6)

Tensor init_tensor(Shape shape, int fan_in, double gain, Prng rng) {
  Tensor t(std::move(shape));
  const double bound = gain * std::sqrt(1.0 / fan_in);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

void add_conv(ModelParameters& params, Prng& model_rng, const std::string& name, int c_out,
              int c_in, int k, double gain = 1.0) {
  const int fan_in = c_in * k * k;
  params.add(name + "_w",
             init_tensor({c_out, c_in, k, k}, fan_in, gain, model_rng.fork(key_of((name + "_w").c_str()))));
  params.add(name + "_b",
             init_tensor({c_out}, fan_in, 1.0, model_rng.fork(key_of((name + "_b").c_str()))));
}

void add_linear(ModelParameters& params, Prng& model_rng, const std::string& name, int m, int d) {
  params.add(name + "_w", init_tensor({m, d}, d, 1.0, model_rng.fork(key_of((name + "_w").c_str()))));
  params.add(name + "_b", init_tensor({m}, d, 1.0, model_rng.fork(key_of((name + "_b").c_str()))));
}

// Backbone shared by MaskNet and SppNet: three stages of
// [conv3x3 stride 2, relu, conv3x3 stride 1, relu], channels 3 -> 16 -> 32
// -> C, spatial side divided by 8.
const char* kStageNames[3][2] = {{"b1c1", "b1c2"}, {"b2c1", "b2c2"}, {"b3c1", "b3c2"}};

void add_backbone(ModelParameters& params, Prng& rng, int feature_channels) {
  const int chans[4] = {3, 16, 32, feature_channels};
  for (int s = 0; s < 3; ++s) {
    add_conv(params, rng, kStageNames[s][0], chans[s + 1], chans[s], 3, kReluGain);
    add_conv(params, rng, kStageNames[s][1], chans[s + 1], chans[s + 1], 3, kReluGain);
  }
}

Var conv_block(Graph& g, ModelParameters& params, const std::string& name, Var x, int stride) {
  Var y = ops::conv2d(g, x, g.parameter(params.at(name + "_w")), g.parameter(params.at(name + "_b")),
                      stride, 1);
  return ops::relu(g, y);
}

Var run_backbone(Graph& g, ModelParameters& params, Var x, const MaskNetConfig& cfg) {
  const Tensor& xv = g.value(x);
  const int side = xv.dim(xv.rank() - 1);
  PSLAB_CHECK_SHAPE(xv.dim(xv.rank() - 3) == 3 && xv.dim(xv.rank() - 2) == side &&
                        side == cfg.input_side,
                    "backbone expects [*,3," << cfg.input_side << "," << cfg.input_side << "], got "
                                             << shape_str(xv.shape()));
  Var h = x;
  for (int s = 0; s < 3; ++s) {
    h = conv_block(g, params, kStageNames[s][0], h, 2);
    h = conv_block(g, params, kStageNames[s][1], h, 1);
  }
  return h;
}

std::string head_name(int scale) { return "head" + std::to_string(scale); }

Tensor stack_scalar_labels(const TrainBatch& batch) { return batch.scalar_labels; }

}  // namespace

int MaskNetConfig::classifier_inputs() const {
  int n = 0;
  for (int s : scales) n += s * s;
  return n;
}

void MaskNetConfig::validate() const {
  if (input_side < 16 || input_side % 8 != 0)
    throw ConfigError("model.input_side must be a multiple of 8, got " + std::to_string(input_side));
  if (feature_channels < 1) throw ConfigError("model.feature_channels must be positive");
  try {
    validate_scales(scales, feature_side());
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("model.scales: ") + e.what());
  }
}

void DepthNetConfig::validate() const {
  if (input_side < 8 || input_side % 2 != 0)
    throw ConfigError("model.input_side must be even, got " + std::to_string(input_side));
  CdcTheta check(theta);  // range check
  try {
    validate_scales(scales, output_side());
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("model.scales: ") + e.what());
  }
}

MaskNet::MaskNet(MaskNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Prng rng(seed ^ key_of("masknet"));
  add_backbone(params_, rng, cfg_.feature_channels);
  for (int s : cfg_.scales) add_conv(params_, rng, head_name(s), 1, cfg_.feature_channels, 1);
  add_linear(params_, rng, "cls", 1, cfg_.classifier_inputs());
}

Var MaskNet::backbone(Graph& g, Var x) { return run_backbone(g, params_, x, cfg_); }

std::vector<Var> MaskNet::mask_pyramid(Graph& g, Var features) {
  const Tensor& fv = g.value(features);
  const int feat_side = fv.dim(fv.rank() - 1);
  PSLAB_CHECK_SHAPE(feat_side == cfg_.feature_side(),
                    "mask heads expect " << cfg_.feature_side() << "-wide features, got "
                                         << shape_str(fv.shape()));
  std::vector<Var> masks;
  for (int s : cfg_.scales) {
    const int k = feat_side / s;
    Var pooled = k == 1 ? features : ops::avgpool2d(g, features, k, k);
    Var logits = ops::conv2d(g, pooled, g.parameter(params_.at(head_name(s) + "_w")),
                             g.parameter(params_.at(head_name(s) + "_b")), 1, 0);
    masks.push_back(ops::sigmoid(g, logits));
  }
  return masks;
}

Var MaskNet::classify(Graph& g, const std::vector<Var>& masks) {
  PSLAB_CHECK_SHAPE(masks.size() == cfg_.scales.size(),
                    "classify: got " << masks.size() << " masks for " << cfg_.scales.size()
                                     << " scales");
  std::vector<Var> flat;
  for (size_t i = 0; i < masks.size(); ++i) {
    const Tensor& mv = g.value(masks[i]);
    const int s = cfg_.scales[i];
    PSLAB_CHECK_SHAPE(mv.dim(mv.rank() - 1) == s && mv.dim(mv.rank() - 2) == s,
                      "classify: mask " << i << " has shape " << shape_str(mv.shape())
                                        << ", expected side " << s);
    flat.push_back(mv.rank() == 4 ? ops::flatten_batch(g, masks[i]) : ops::flatten(g, masks[i]));
  }
  Var cat = ops::concat(g, flat);
  Var logits = ops::linear(g, cat, g.parameter(params_.at("cls_w")), g.parameter(params_.at("cls_b")));
  return ops::sigmoid(g, logits);
}

MaskNet::Forward MaskNet::forward(Graph& g, Var x) {
  Forward f;
  f.features = backbone(g, x);
  f.masks = mask_pyramid(g, f.features);
  f.score = classify(g, f.masks);
  return f;
}

LossVars MaskNet::training_loss(Graph& g, const TrainBatch& batch, const LossConfig& loss_cfg) {
  Forward f = forward(g, g.constant(batch.images));
  LossVars pyramid = pyramid_mask_loss(g, f.masks, cfg_.scales, batch.mask_pyramid, loss_cfg.reduction);
  return overall_mask_loss(g, pyramid, f.score, stack_scalar_labels(batch), loss_cfg.binary_weight);
}

double MaskNet::score_image(const Tensor& image) {
  Graph g;
  return g.scalar(forward(g, g.constant(image)).score);
}

MaskNet::Prediction MaskNet::predict(const Tensor& image) {
  Graph g;
  Forward f = forward(g, g.constant(image));
  Prediction p;
  p.masks.scales = cfg_.scales;
  for (size_t i = 0; i < f.masks.size(); ++i) {
    const Tensor& m = g.value(f.masks[i]);
    const int s = cfg_.scales[i];
    Tensor map({s, s});
    for (std::int64_t j = 0; j < map.numel(); ++j) map[j] = m[j];
    p.masks.maps.push_back(std::move(map));
  }
  p.score = g.scalar(f.score);
  return p;
}

SppNet::SppNet(MaskNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Prng rng(seed ^ key_of("sppnet"));
  add_backbone(params_, rng, cfg_.feature_channels);
  add_linear(params_, rng, "spp", 1, cfg_.feature_channels * cfg_.classifier_inputs());
}

Var SppNet::forward(Graph& g, Var x) {
  Var features = run_backbone(g, params_, x, cfg_);
  const int feat_side = cfg_.feature_side();
  std::vector<Var> flat;
  for (int s : cfg_.scales) {
    const int k = feat_side / s;
    Var pooled = k == 1 ? features : ops::avgpool2d(g, features, k, k);
    flat.push_back(g.value(pooled).rank() == 4 ? ops::flatten_batch(g, pooled)
                                               : ops::flatten(g, pooled));
  }
  Var cat = ops::concat(g, flat);
  Var logits = ops::linear(g, cat, g.parameter(params_.at("spp_w")), g.parameter(params_.at("spp_b")));
  return ops::sigmoid(g, logits);
}

LossVars SppNet::training_loss(Graph& g, const TrainBatch& batch, const LossConfig& loss_cfg) {
  Var score = forward(g, g.constant(batch.images));
  // Scalar-level supervision only: no pixel-wise term.
  LossVars out;
  Var binary = ops::bce(g, score, stack_scalar_labels(batch));
  if (loss_cfg.binary_weight != 1.0) binary = ops::scale(g, binary, loss_cfg.binary_weight);
  out.total = binary;
  out.value.total = g.scalar(binary);
  out.value.components["binary"] = out.value.total;
  return out;
}

double SppNet::score_image(const Tensor& image) {
  Graph g;
  return g.scalar(forward(g, g.constant(image)));
}

namespace {

struct DepthLayer {
  const char* name;
  int c_out, c_in, stride;
};

// Three CDC blocks with one stride-2 reduction, then two CDC layers mapping
// to a single channel.
constexpr DepthLayer kDepthLayers[5] = {
    {"cdc1", 32, 3, 1}, {"cdc2", 64, 32, 2}, {"cdc3", 64, 64, 1},
    {"cdc4", 32, 64, 1}, {"cdc5", 1, 32, 1},
};

}  // namespace

DepthNet::DepthNet(DepthNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Prng rng(seed ^ key_of("depthnet"));
  for (size_t i = 0; i < 5; ++i) {
    const auto& layer = kDepthLayers[i];
    add_conv(params_, rng, layer.name, layer.c_out, layer.c_in, 3, i + 1 < 5 ? kReluGain : 1.0);
  }
}

Var DepthNet::forward(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  const int side = xv.dim(xv.rank() - 1);
  PSLAB_CHECK_SHAPE(xv.dim(xv.rank() - 3) == 3 && xv.dim(xv.rank() - 2) == side &&
                        side == cfg_.input_side,
                    "depth net expects [*,3," << cfg_.input_side << "," << cfg_.input_side
                                              << "], got " << shape_str(xv.shape()));
  const CdcTheta theta(cfg_.theta);
  Var h = x;
  for (size_t i = 0; i < 5; ++i) {
    const auto& layer = kDepthLayers[i];
    h = ops::cdc_conv2d(g, h, g.parameter(params_.at(std::string(layer.name) + "_w")),
                        g.parameter(params_.at(std::string(layer.name) + "_b")), layer.stride, 1,
                        theta);
    h = i + 1 < 5 ? ops::relu(g, h) : ops::sigmoid(g, h);
  }
  return h;
}

LossVars DepthNet::training_loss(Graph& g, const TrainBatch& batch, const LossConfig&) {
  // Only the pyramid depth loss supervises training; the scalar label is
  // implicit in the depth targets.
  Var d = forward(g, g.constant(batch.images));
  return pyramid_depth_loss(g, d, cfg_.scales, batch.depth_pyramid);
}

double DepthNet::score_image(const Tensor& image) {
  return depth_score(predict_map(image), cfg_.scales);
}

Tensor DepthNet::predict_map(const Tensor& image) {
  Graph g;
  Var d = forward(g, g.constant(image));
  const Tensor& dv = g.value(d);
  const int side = cfg_.output_side();
  Tensor map({side, side});
  for (std::int64_t i = 0; i < map.numel(); ++i) map[i] = dv[i];
  return map;
}

double depth_score(const Tensor& d_map, const std::vector<int>& scales) {
  Tensor map = d_map;
  if (map.rank() == 3 && map.dim(0) == 1) {
    Tensor squeezed({map.dim(1), map.dim(2)}, map.values());
    map = std::move(squeezed);
  }
  DepthPyramid pyr = decompose_depth_pyramid(map, scales);
  double acc = 0.0;
  for (const Tensor& m : pyr.maps) {
    double s = 0.0;
    for (std::int64_t i = 0; i < m.numel(); ++i) s += m[i];
    acc += s / static_cast<double>(m.numel());
  }
  return acc / static_cast<double>(pyr.maps.size());
}

}  // namespace pslab
