#include "pslab/labels.hpp"

#include <algorithm>

namespace pslab {

void validate_scales(const std::vector<int>& scales, int base_side) {
  PSLAB_CHECK_SHAPE(!scales.empty(), "empty scale list");
  int prev = base_side + 1;
  for (int s : scales) {
    PSLAB_CHECK_SHAPE(s >= 1 && s <= base_side, "scale " << s << " out of range for base side " << base_side);
    PSLAB_CHECK_SHAPE(s < prev, "scales must be strictly decreasing");
    PSLAB_CHECK_SHAPE(base_side % s == 0, "base side " << base_side << " not divisible by scale " << s);
    prev = s;
  }
}

MaskLabel fill_binary_mask(ScalarLabel label, int height, int width) {
  PSLAB_CHECK_SHAPE(height > 0 && width > 0, "mask resolution must be positive");
  MaskLabel m;
  m.height = height;
  m.width = width;
  m.values.assign(static_cast<size_t>(height) * width, label == ScalarLabel::live ? 1 : 0);
  return m;
}

Tensor mask_to_tensor(const MaskLabel& mask) {
  Tensor t({mask.height, mask.width});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = mask.values[static_cast<size_t>(i)];
  return t;
}

MaskPyramid decompose_mask_pyramid(const MaskLabel& base, const std::vector<int>& scales) {
  PSLAB_CHECK_SHAPE(base.height == base.width, "mask must be square for pyramid decomposition");
  validate_scales(scales, base.height);
  MaskPyramid pyr;
  pyr.scales = scales;
  for (int s : scales) {
    const int block = base.height / s;
    Tensor map({s, s});
    for (int cy = 0; cy < s; ++cy)
      for (int cx = 0; cx < s; ++cx) {
        std::uint8_t v = 1;
        for (int y = cy * block; v && y < (cy + 1) * block; ++y)
          for (int x = cx * block; x < (cx + 1) * block; ++x)
            if (base.at(y, x) == 0) {
              v = 0;
              break;
            }
        map.at({cy, cx}) = v;
      }
    pyr.maps.push_back(std::move(map));
  }
  return pyr;
}

Tensor block_mean_downsample(const Tensor& map, int out_side) {
  PSLAB_CHECK_SHAPE(map.rank() == 2 && map.dim(0) == map.dim(1), "expected a square 2-d map");
  const int side = map.dim(0);
  PSLAB_CHECK_SHAPE(out_side >= 1 && side % out_side == 0,
                    "side " << side << " not divisible by target " << out_side);
  const int block = side / out_side;
  const double inv = 1.0 / (static_cast<double>(block) * block);
  Tensor out({out_side, out_side});
  for (int cy = 0; cy < out_side; ++cy)
    for (int cx = 0; cx < out_side; ++cx) {
      double acc = 0.0;
      for (int y = cy * block; y < (cy + 1) * block; ++y)
        for (int x = cx * block; x < (cx + 1) * block; ++x) acc += map.at({y, x});
      out.at({cy, cx}) = acc * inv;
    }
  return out;
}

DepthPyramid decompose_depth_pyramid(const Tensor& base, const std::vector<int>& scales) {
  PSLAB_CHECK_SHAPE(base.rank() == 2 && base.dim(0) == base.dim(1), "expected a square 2-d map");
  validate_scales(scales, base.dim(0));
  DepthPyramid pyr;
  pyr.scales = scales;
  for (int s : scales) pyr.maps.push_back(block_mean_downsample(base, s));
  return pyr;
}

ClassMask multiclass_mask(int class_id, int class_count, int height, int width) {
  PSLAB_CHECK(class_count >= 1, "class count must be positive");
  if (class_id < 0 || class_id >= class_count)
    throw ConfigError("unknown class id " + std::to_string(class_id) + " for " +
                      std::to_string(class_count) + " classes");
  PSLAB_CHECK_SHAPE(height > 0 && width > 0, "mask resolution must be positive");
  ClassMask m;
  m.height = height;
  m.width = width;
  m.class_count = class_count;
  m.values.assign(static_cast<size_t>(height) * width, class_id);
  return m;
}

ClassMask decompose_multiclass(const ClassMask& base, int scale) {
  PSLAB_CHECK_SHAPE(base.height == base.width, "mask must be square");
  validate_scales({scale}, base.height);
  const int block = base.height / scale;
  ClassMask out;
  out.height = out.width = scale;
  out.class_count = base.class_count;
  out.values.assign(static_cast<size_t>(scale) * scale, 0);
  std::vector<int> counts(static_cast<size_t>(base.class_count));
  for (int cy = 0; cy < scale; ++cy)
    for (int cx = 0; cx < scale; ++cx) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int y = cy * block; y < (cy + 1) * block; ++y)
        for (int x = cx * block; x < (cx + 1) * block; ++x) ++counts[static_cast<size_t>(base.at(y, x))];
      const int top = *std::max_element(counts.begin(), counts.end());
      // Lowest attack class among the tied leaders wins; live only wins a
      // cell when no attack class reaches the top count.
      int winner = 0;
      for (int c = 1; c < base.class_count; ++c)
        if (counts[static_cast<size_t>(c)] == top) {
          winner = c;
          break;
        }
      out.values[static_cast<size_t>(cy) * scale + cx] = winner;
    }
  return out;
}

std::vector<ClassMask> decompose_multiclass_pyramid(const ClassMask& base,
                                                    const std::vector<int>& scales) {
  validate_scales(scales, base.height);
  std::vector<ClassMask> out;
  for (int s : scales) out.push_back(decompose_multiclass(base, s));
  return out;
}

}  // namespace pslab
