#pragma once

#include <string>

#include "pslab/labels.hpp"
#include "pslab/tensor.hpp"

namespace pslab {

// Binary PPM (P6) / PGM (P5), maxval 255. Real values in [0,1] are
// quantized with round-half-up: byte = floor(255*v + 0.5).

void write_ppm(const std::string& path, const Tensor& image);  // [3,H,W]
Tensor read_ppm(const std::string& path);

void write_pgm(const std::string& path, const Tensor& map);  // [H,W]
Tensor read_pgm(const std::string& path);

// Mask convention: live = 255, attack = 0.
void write_mask_pgm(const std::string& path, const MaskLabel& mask);

std::uint8_t quantize_byte(double v);

}  // namespace pslab
