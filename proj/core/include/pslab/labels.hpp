#pragma once

#include <cstdint>
#include <vector>

#include "pslab/tensor.hpp"

namespace pslab {

enum class ScalarLabel { live, spoof };

// Pixel-wise binary label: 1 = bonafide pixel, 0 = attack pixel. The same
// polarity (1 = live) is used for scalar labels, masks and scores
// everywhere in the library.
struct MaskLabel {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;  // row-major, each 0 or 1

  std::uint8_t at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
  std::uint8_t& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
};

// Per-scale square maps, coarsest last. Holds {0,1} values for labels and
// [0,1] values for predictions.
struct Pyramid {
  std::vector<int> scales;  // strictly decreasing side lengths
  std::vector<Tensor> maps; // maps[i] has shape [scales[i], scales[i]]
};

using MaskPyramid = Pyramid;
using DepthPyramid = Pyramid;

void validate_scales(const std::vector<int>& scales, int base_side);

// Constant map of the scalar label (all ones for live, all zeros for spoof).
MaskLabel fill_binary_mask(ScalarLabel label, int height, int width);

Tensor mask_to_tensor(const MaskLabel& mask);

// Decomposes a binary base mask into coarse scales: a coarse cell is 0
// (attack) iff any base pixel in its aligned block is 0.
MaskPyramid decompose_mask_pyramid(const MaskLabel& base, const std::vector<int>& scales);

// Block-mean downsampling to one square side.
Tensor block_mean_downsample(const Tensor& map, int out_side);

// Decomposes a real-valued square map (label or prediction) into coarse
// scales by block averaging.
DepthPyramid decompose_depth_pyramid(const Tensor& base, const std::vector<int>& scales);

// Multi-class variant: small integer class ids, 0 = live, >= 1 = attack
// classes.
struct ClassMask {
  int height = 0;
  int width = 0;
  int class_count = 0;
  std::vector<int> values;

  int at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

ClassMask multiclass_mask(int class_id, int class_count, int height, int width);

// Majority vote per block; when classes tie, an attack class wins over
// live, and among tied attack classes the lowest id wins.
ClassMask decompose_multiclass(const ClassMask& base, int scale);
std::vector<ClassMask> decompose_multiclass_pyramid(const ClassMask& base,
                                                    const std::vector<int>& scales);

}  // namespace pslab
