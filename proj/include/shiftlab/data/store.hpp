#pragma once

#include <string>

#include "shiftlab/data/dataset.hpp"

namespace shiftlab {

/// Persists a glyph source as a directory: manifest.json (kind "glyphs",
/// name, classes, provenance) plus SHB1 blobs for pixels and labels.
void save_glyphs(const std::string& dir, const GlyphDataset& data, double jitter,
                 std::uint64_t seed);

GlyphDataset load_glyphs(const std::string& dir);

/// Persists placed canvases: manifest.json (kind "placed", source, policy,
/// seed, geometry) plus SHB1 blobs.
void save_placed(const std::string& dir, const PlacedDataset& data);

PlacedDataset load_placed(const std::string& dir);

}  // namespace shiftlab
