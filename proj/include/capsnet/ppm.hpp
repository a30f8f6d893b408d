#pragma once

#include <string>
#include <vector>

#include "capsnet/tensor.hpp"

namespace capsnet {

// Minimal binary PPM (P6) writer. pixels are RGB triples in row-major order,
// values in [0,1]; each channel is written as round(value*255).
void write_ppm(const std::string& path, int width, int height,
               const std::vector<float>& rgb_pixels);

// Lay out a 2-row image grid: originals on top, reconstructions below.
// Images are [C,H,W] with C in {1,3}; grayscale is replicated to RGB.
void write_comparison_grid(const std::string& path, const std::vector<Tensor<float>>& originals,
                           const std::vector<Tensor<float>>& reconstructions);

}  // namespace capsnet
