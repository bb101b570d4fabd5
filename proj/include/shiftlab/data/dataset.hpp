#pragma once

#include <string>
#include <vector>

#include "shiftlab/data/placement.hpp"

namespace shiftlab {

/// Canvases ready for training: N x 1 x S x S images plus labels, tagged with
/// the provenance needed to regenerate them bit-exactly.
struct PlacedDataset {
    Tensor<float> images;  // N x 1 x S x S
    std::vector<int> labels;
    std::vector<PositionTheta> positions;
    int n_classes = 0;
    Geometry geom;
    std::string source_id;
    std::string policy_desc;
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(labels.size()); }
};

/// Composes item selection, position sampling and pasting: n_per_class
/// samples per policy-covered class, deterministic in (source id, policy,
/// seed) and independent of generation order.
PlacedDataset build_split(const GlyphDataset& source, const PlacementPolicy& policy,
                          int n_per_class, std::uint64_t seed);

/// Classes the policy places at all (grid9 covers only its paired classes).
std::vector<int> covered_classes(const PlacementPolicy& policy, int n_classes);

/// Resolves a dataset path: absolute paths and existing relative paths are
/// used as is; otherwise the SHIFTLAB_DATA_ROOT environment variable (if set)
/// is prepended.
std::string resolve_data_path(const std::string& path);

}  // namespace shiftlab
