#pragma once

#include <string>

#include "shiftlab/data/glyphs.hpp"

namespace shiftlab {

/// Parses a big-endian IDX image/label file pair (magic 2051 for images,
/// 2049 for labels, uint8 payload scaled to [0,1]).
GlyphDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes a dataset in the same IDX format (used for fixtures and to exchange
/// glyph sources with IDX-consuming tools). Pixels are quantized to uint8.
void write_idx(const GlyphDataset& data, const std::string& images_path,
               const std::string& labels_path);

}  // namespace shiftlab
