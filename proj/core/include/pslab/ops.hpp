#pragma once

#include <vector>

#include "pslab/graph.hpp"

namespace pslab {

// Central-difference mixing factor, valid in [0, 1]. theta = 0 degenerates
// to vanilla convolution.
class CdcTheta {
 public:
  explicit CdcTheta(double v) : value_(v) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("cdc theta must lie in [0, 1]");
  }
  double value() const { return value_; }

 private:
  double value_;
};

namespace ops {

enum class Reduction { mean, sum };

Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double s);
Var add_scalar(Graph& g, Var a, double c);
Var relu(Graph& g, Var x);
Var sigmoid(Graph& g, Var x);
Var sum(Graph& g, Var x);
Var mean(Graph& g, Var x);

// Reshape to [numel] / [batch, rest] / an explicit shape with the same
// element count. Values are copied; gradient is the identity map.
Var flatten(Graph& g, Var x);
Var flatten_batch(Graph& g, Var x);
Var reshape(Graph& g, Var x, Shape shape);

// Concatenate along the last axis. All parts rank 1, or all rank 2 with the
// same leading dimension.
Var concat(Graph& g, const std::vector<Var>& parts);

// y = x W^T + b with x [D] or [N,D], W [M,D], b [M].
Var linear(Graph& g, Var x, Var w, Var b);

// Cross-correlation with zero padding. x [C,H,W] or [N,C,H,W], w
// [Co,Ci,k,k] (k odd), b [Co]. Output spatial side floor((H+2p-k)/stride)+1
// must be >= 1.
Var conv2d(Graph& g, Var x, Var w, Var b, int stride, int padding);

// Central difference convolution:
//   y(p0) = sum_pn w(pn) x(p0+pn) - theta * x(p0) * sum_pn w(pn) + bias
// where the center term pairs each input channel's center value with that
// channel's kernel-tap sum. theta = 0 is exactly conv2d.
Var cdc_conv2d(Graph& g, Var x, Var w, Var b, int stride, int padding, CdcTheta theta);

// Non-overlapping average pooling; requires kernel == stride and spatial
// sides divisible by the stride.
Var avgpool2d(Graph& g, Var x, int kernel, int stride);

// Binary cross-entropy against a constant target, predictions clamped to
// [eps, 1-eps]. Default reduction is the mean over positions.
Var bce(Graph& g, Var pred, Tensor target, Reduction reduction = Reduction::mean,
        double eps = 1e-7);

// Mean squared error against a constant target.
Var mse(Graph& g, Var pred, Tensor target);

// Contrastive depth loss: for each of the 8 neighbor directions d, a 3x3
// contrast kernel (+1 at the neighbor, -1 at the center) is applied to both
// maps over the valid (unpadded) region; the per-direction MSEs are summed.
// Invariant to global offsets of either map.
Var cdl(Graph& g, Var pred, Tensor target);

}  // namespace ops
}  // namespace pslab
