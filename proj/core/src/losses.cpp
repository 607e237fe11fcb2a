#include "pslab/losses.hpp"

#include <json.hpp>

namespace pslab {

std::string LossValue::to_json() const {
  nlohmann::json j;
  j["total"] = total;
  j["per_scale"] = nlohmann::json::object();
  for (const auto& [scale, v] : per_scale) j["per_scale"][std::to_string(scale)] = v;
  j["components"] = nlohmann::json::object();
  for (const auto& [name, v] : components) j["components"][name] = v;
  return j.dump();
}

void LossValue::accumulate(const LossValue& other, double weight) {
  total += weight * other.total;
  for (const auto& [scale, v] : other.per_scale) per_scale[scale] += weight * v;
  for (const auto& [name, v] : other.components) components[name] += weight * v;
}

LossVars pyramid_mask_loss(Graph& g, const std::vector<Var>& pred_masks,
                           const std::vector<int>& scales, const std::vector<Tensor>& label_maps,
                           ops::Reduction reduction) {
  PSLAB_CHECK_SHAPE(pred_masks.size() == scales.size() && label_maps.size() == scales.size(),
                    "pyramid_mask_loss: scale mismatch (" << pred_masks.size() << " predictions, "
                                                          << scales.size() << " scales, "
                                                          << label_maps.size() << " labels)");
  LossVars out;
  out.value.components["pyramid"] = 0.0;
  Var acc;
  for (size_t i = 0; i < scales.size(); ++i) {
    Var term = ops::bce(g, pred_masks[i], label_maps[i], reduction);
    const double v = g.scalar(term);
    out.value.per_scale[scales[i]] = v;
    out.value.components["pyramid"] += v;
    acc = acc.valid() ? ops::add(g, acc, term) : term;
  }
  out.total = acc;
  out.value.total = g.scalar(acc);
  return out;
}

LossVars overall_mask_loss(Graph& g, const LossVars& pyramid, Var score, Tensor scalar_labels,
                           double binary_weight) {
  LossVars out;
  out.value = pyramid.value;
  Var binary = ops::bce(g, score, std::move(scalar_labels));
  if (binary_weight != 1.0) binary = ops::scale(g, binary, binary_weight);
  const double bv = g.scalar(binary);
  out.value.components["binary"] = bv;
  out.total = ops::add(g, pyramid.total, binary);
  out.value.total = g.scalar(out.total);
  return out;
}

LossVars pyramid_depth_loss(Graph& g, Var pred_d32, const std::vector<int>& scales,
                            const std::vector<Tensor>& label_maps) {
  PSLAB_CHECK_SHAPE(label_maps.size() == scales.size(),
                    "pyramid_depth_loss: scale mismatch (" << scales.size() << " scales, "
                                                           << label_maps.size() << " labels)");
  const int base_rank = g.value(pred_d32).rank();
  const int base_side = g.value(pred_d32).dim(base_rank - 1);
  PSLAB_CHECK_SHAPE(g.value(pred_d32).dim(base_rank - 2) == base_side,
                    "pyramid_depth_loss: map not square");
  validate_scales(scales, base_side);
  // Bare [H,W] maps are lifted to [1,H,W] so pooling applies uniformly.
  Var base = base_rank == 2 ? ops::reshape(g, pred_d32, {1, base_side, base_side}) : pred_d32;
  LossVars out;
  out.value.components["mse"] = 0.0;
  out.value.components["cdl"] = 0.0;
  Var acc;
  for (size_t i = 0; i < scales.size(); ++i) {
    const int s = scales[i];
    Var pred = s == base_side ? base : ops::avgpool2d(g, base, base_side / s, base_side / s);
    Tensor label = label_maps[i];
    if (label.shape() != g.value(pred).shape()) {
      PSLAB_CHECK_SHAPE(label.numel() == g.value(pred).numel(),
                        "pyramid_depth_loss: label at scale " << s << " has "
                                                              << label.numel() << " values");
      label = Tensor(g.value(pred).shape(), label.values());
    }
    Var m = ops::mse(g, pred, label);
    Var c = ops::cdl(g, pred, std::move(label));
    const double mv = g.scalar(m);
    const double cv = g.scalar(c);
    out.value.per_scale[s] = mv + cv;
    out.value.components["mse"] += mv;
    out.value.components["cdl"] += cv;
    Var term = ops::add(g, m, c);
    acc = acc.valid() ? ops::add(g, acc, term) : term;
  }
  out.total = acc;
  out.value.total = g.scalar(acc);
  return out;
}

double bce_value(const Tensor& pred, const Tensor& target, ops::Reduction reduction, double eps) {
  Graph g;
  return g.scalar(ops::bce(g, g.constant(pred), target, reduction, eps));
}

double mse_value(const Tensor& pred, const Tensor& target) {
  Graph g;
  return g.scalar(ops::mse(g, g.constant(pred), target));
}

double cdl_value(const Tensor& pred, const Tensor& target) {
  Graph g;
  return g.scalar(ops::cdl(g, g.constant(pred), target));
}

LossValue pyramid_mask_loss_value(const Pyramid& pred, const Pyramid& labels,
                                  ops::Reduction reduction) {
  PSLAB_CHECK_SHAPE(pred.scales == labels.scales, "pyramid_mask_loss: scale mismatch");
  Graph g;
  std::vector<Var> masks;
  for (const auto& m : pred.maps) masks.push_back(g.constant(m));
  return pyramid_mask_loss(g, masks, pred.scales, labels.maps, reduction).value;
}

LossValue overall_mask_loss_value(const LossValue& pyramid, double score, double scalar_label,
                                  double binary_weight) {
  LossValue out = pyramid;
  const double binary =
      binary_weight * bce_value(Tensor({1}, {score}), Tensor({1}, {scalar_label}));
  out.components["binary"] = binary;
  out.total = pyramid.total + binary;
  return out;
}

LossValue pyramid_depth_loss_value(const Tensor& pred_d32, const Pyramid& labels) {
  Graph g;
  return pyramid_depth_loss(g, g.constant(pred_d32), labels.scales, labels.maps).value;
}

}  // namespace pslab
