#pragma once

#include <string>
#include <vector>

#include "shiftlab/core/rng.hpp"
#include "shiftlab/core/tensor.hpp"

namespace shiftlab {

/// One grayscale item: pixels in [0,1], label within the dataset class count.
struct GlyphSample {
    int class_id = 0;
    Tensor<float> pixels;  // rank 2
};

/// In-memory item source (procedural glyphs or an ingested IDX file).
struct GlyphDataset {
    std::string id;
    int n_classes = 0;
    std::vector<GlyphSample> samples;

    /// Indices of all samples with the given class.
    std::vector<int> class_index(int class_id) const;
    void validate() const;
};

/// Bilinear resampling with the half-pixel center convention; used both for
/// item resizing and for heatmap upscaling.
Tensor<float> bilinear_resize(const Tensor<float>& src, int out_h, int out_w);

/// The first `n_classes` classes of a dataset as a dataset of their own.
GlyphDataset take_classes(const GlyphDataset& source, int n_classes);

/// Procedural glyph source: per class a random filled polygon on a 28x28
/// field, plus per-sample jitter (rotation up to 15 degrees, scale within
/// 10%, additive pixel noise), all scaled by `intra_class_jitter` in [0,1].
/// jitter 0 makes every sample of a class bit-identical to its base glyph
/// (single-exemplar mode). Sample streams derive from (seed, class, index),
/// so generation order does not matter.
GlyphDataset synth_glyphs(int n_classes, int samples_per_class, double intra_class_jitter,
                          std::uint64_t seed);

}  // namespace shiftlab
