#include "shiftlab/data/dataset.hpp"

#include <cstdlib>
#include <filesystem>

namespace shiftlab {

std::vector<int> covered_classes(const PlacementPolicy& policy, int n_classes) {
    std::vector<int> out;
    if (policy.mode == PlacementMode::grid9) {
        const int covered = 2 * policy.grid9_pairs;
        if (n_classes < covered)
            throw ConfigError("grid9 needs " + std::to_string(covered) + " classes, source has " +
                              std::to_string(n_classes));
        for (int c = 0; c < covered; ++c) out.push_back(c);
        return out;
    }
    if (policy.mode == PlacementMode::region) {
        for (const auto& [cls, rect] : policy.regions)
            if (cls < n_classes) out.push_back(cls);
        if (out.empty()) throw ConfigError("region policy covers no class of the source");
        return out;
    }
    for (int c = 0; c < n_classes; ++c) out.push_back(c);
    return out;
}

PlacedDataset build_split(const GlyphDataset& source, const PlacementPolicy& policy,
                          int n_per_class, std::uint64_t seed) {
    if (source.samples.empty()) throw ConfigError("build_split: empty source dataset");
    if (n_per_class < 1) throw ConfigError("build_split: n_per_class must be positive");

    const std::vector<int> classes = covered_classes(policy, source.n_classes);
    const Geometry g = policy.geom;

    PlacedDataset out;
    out.n_classes = source.n_classes;
    out.geom = g;
    out.source_id = source.id;
    out.policy_desc = policy.describe();
    out.seed = seed;
    const int total = static_cast<int>(classes.size()) * n_per_class;
    out.images = Tensor<float>({total, 1, g.canvas, g.canvas});
    out.labels.reserve(static_cast<std::size_t>(total));
    out.positions.reserve(static_cast<std::size_t>(total));

    const Eigen::Index plane = static_cast<Eigen::Index>(g.canvas) * g.canvas;
    int row = 0;
    for (int cls : classes) {
        const std::vector<int> pool = source.class_index(cls);
        if (pool.empty())
            throw ConfigError("build_split: source has no samples for class " +
                              std::to_string(cls));
        for (int i = 0; i < n_per_class; ++i, ++row) {
            // one stream per (class, index): parallel and serial generation agree
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls),
                                static_cast<std::uint64_t>(i)));
            const int pick = pool[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
            const PositionTheta theta = sample_position(policy, cls, rng);
            const Tensor<float> canvas =
                place(source.samples[static_cast<std::size_t>(pick)], g.canvas, g.item, theta);
            std::copy_n(canvas.data(), plane, out.images.data() + row * plane);
            out.labels.push_back(cls);
            out.positions.push_back(theta);
        }
    }
    return out;
}

std::string resolve_data_path(const std::string& path) {
    namespace fs = std::filesystem;
    if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) return path;
    if (const char* root = std::getenv("SHIFTLAB_DATA_ROOT"); root && *root)
        return (fs::path(root) / path).string();
    return path;
}

}  // namespace shiftlab
