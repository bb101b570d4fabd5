#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftlab/core/adam.hpp"
#include "shiftlab/data/dataset.hpp"
#include "shiftlab/models/zoo.hpp"

namespace shiftlab {

/// Optimization settings plus the convergence rule: training stops once the
/// epoch accuracy holds the target for `sustain` consecutive epochs, or when
/// the epoch budget runs out (flagged, not fatal).
struct TrainConfig {
    AdamConfig<float> adam;
    int batch_size = 64;
    int max_epochs = 100;
    double target_acc = 0.95;
    int sustain = 3;
    std::uint64_t seed = 0;
    bool freeze_bn_stats = false;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0;
    double accuracy = 0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    bool converged = false;
    double final_accuracy = 0;
};

TrainLog train(Model& model, const PlacedDataset& data, const TrainConfig& config);

/// Fraction of argmax-correct predictions in eval mode (ties break to the
/// lowest class index).
double evaluate(Model& model, const PlacedDataset& data);

/// Per-class accuracy; classes absent from the dataset get count 0.
struct PerClassAccuracy {
    std::vector<double> accuracy;
    std::vector<int> count;
};
PerClassAccuracy evaluate_per_class(Model& model, const PlacedDataset& data);

/// Accuracy across a G x G grid of item centers spanning the admissible
/// range; the same probe items are re-placed at every grid point so cell
/// differences reflect location only.
struct DensityGrid {
    int G = 0;
    Geometry geom;
    std::vector<int> xs, ys;     // center coordinate per grid index
    std::vector<double> acc;     // row-major [gy][gx]
    int probe_count = 0;
    double at(int gy, int gx) const { return acc[static_cast<std::size_t>(gy * G + gx)]; }
    double mean() const;
};

DensityGrid density_map(Model& model, const GlyphDataset& probe, const Geometry& geom, int G = 19);

/// Deterministic held-in subset: the first n items of every class.
GlyphDataset probe_subset(const GlyphDataset& source, int n_per_class);

}  // namespace shiftlab
