#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftlab/data/geometry.hpp"
#include "shiftlab/data/glyphs.hpp"
#include "shiftlab/models/zoo.hpp"

namespace shiftlab {

/// Cosine similarity between two equal-length activation vectors, accumulated
/// in double. Bit-identical vectors score exactly 1. A zero vector scores 0
/// and sets `zero_flag` instead of aborting the profile.
double cosine_sim(const std::vector<double>& a, const std::vector<double>& b,
                  bool* zero_flag = nullptr);

/// Normalized invariance I = (T - U) / (1 - U). T = U gives exactly 0 and
/// T = 1 gives exactly 1. U within 1e-6 of 1 means the representation is
/// similar for everything and the metric is undefined.
double invariance_metric(double t, double u);

struct InvarianceProbeConfig {
    PositionTheta base;                        // reference placement
    std::vector<PositionTheta> displacements;  // probed placements
    std::string layer;                         // empty -> model's penultimate
    int R = 100;                               // items for the translation term
    int N = 1000;                              // cross-item pairs for the baseline
    std::uint64_t seed = 0;
};

struct ThetaInvariance {
    PositionTheta theta;
    double T = 0;
    double U = 0;
    double I = 0;
};

struct InvarianceResult {
    std::vector<ThetaInvariance> entries;
    double mean_I = 0;
    int zero_vector_count = 0;  // cosine evaluations that hit a zero vector
    std::string model_desc;
    std::string dataset_id;
    std::string layer;
};

/// The horizontal probe sweep: 18 centers from the base x to the far edge in
/// steps of canvas/22, at the base height.
std::vector<PositionTheta> horizontal_sweep(const Geometry& geom);

/// Probes how similar the layer's representation of an item stays when the
/// item moves from the base position to each displacement, baselined by the
/// similarity across different items.
InvarianceResult invariance_profile(Model& model, const GlyphDataset& items,
                                    const Geometry& geom, const InvarianceProbeConfig& config);

}  // namespace shiftlab
