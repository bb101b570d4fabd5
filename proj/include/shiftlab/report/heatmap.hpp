#pragma once

#include <string>

#include "shiftlab/harness/train.hpp"

namespace shiftlab {

/// Canvas-resolution image of a density grid: piecewise-bilinear interpolation
/// between the grid's probe centers, clamped (constant) outside the probed
/// area, so the value at a probe center pixel equals that cell's accuracy.
Tensor<float> heatmap_image(const DensityGrid& grid);

/// Grayscale binary PGM (P5), 0 -> black, 1 -> white, deterministic bytes.
void render_heatmap(const DensityGrid& grid, const std::string& pgm_path);

/// Same image as an uncompressed 8-bit grayscale PNG.
void render_heatmap_png(const DensityGrid& grid, const std::string& png_path);

}  // namespace shiftlab
