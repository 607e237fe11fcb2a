#pragma once

#include <map>
#include <string>
#include <vector>

#include "pslab/labels.hpp"
#include "pslab/ops.hpp"

namespace pslab {

// Scalar loss breakdown. `total` is always the documented combination of
// the component entries; per_scale holds the per-resolution terms.
struct LossValue {
  double total = 0.0;
  std::map<int, double> per_scale;
  std::map<std::string, double> components;

  // JSON object with keys total, per_scale.<n>, components.<name>.
  std::string to_json() const;

  // Weighted accumulation (used to average batch losses over an epoch).
  void accumulate(const LossValue& other, double weight);
};

struct LossConfig {
  ops::Reduction reduction = ops::Reduction::mean;
  double binary_weight = 1.0;  // weight of the final-score BCE term
};

// Graph-building loss: differentiable total plus its reported breakdown.
struct LossVars {
  Var total;
  LossValue value;
};

// Sum over scales of the BCE between predicted and label maps at that
// scale. Per-scale reduction is the mean over positions by default (see
// LossConfig::reduction).
LossVars pyramid_mask_loss(Graph& g, const std::vector<Var>& pred_masks,
                           const std::vector<int>& scales, const std::vector<Tensor>& label_maps,
                           ops::Reduction reduction = ops::Reduction::mean);

// pyramid total + binary_weight * BCE(score, scalar label).
LossVars overall_mask_loss(Graph& g, const LossVars& pyramid, Var score, Tensor scalar_labels,
                           double binary_weight = 1.0);

// Per scale: MSE + contrastive depth loss between the block-mean-decomposed
// prediction and the matching label map; summed over scales. `pred_d32` is
// the network's base-resolution prediction ([H,W], [1,H,W] or [N,1,H,W]);
// label_maps must be decomposed to the same scales and batch layout.
LossVars pyramid_depth_loss(Graph& g, Var pred_d32, const std::vector<int>& scales,
                            const std::vector<Tensor>& label_maps);

// Value-only forms over plain tensors (evaluation, oracles).
double bce_value(const Tensor& pred, const Tensor& target,
                 ops::Reduction reduction = ops::Reduction::mean, double eps = 1e-7);
double mse_value(const Tensor& pred, const Tensor& target);
double cdl_value(const Tensor& pred, const Tensor& target);

LossValue pyramid_mask_loss_value(const Pyramid& pred, const Pyramid& labels,
                                  ops::Reduction reduction = ops::Reduction::mean);
LossValue overall_mask_loss_value(const LossValue& pyramid, double score, double scalar_label,
                                  double binary_weight = 1.0);
LossValue pyramid_depth_loss_value(const Tensor& pred_d32, const Pyramid& labels);

}  // namespace pslab
