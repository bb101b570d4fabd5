#include "shiftlab/metric/invariance.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "shiftlab/core/error.hpp"
#include "shiftlab/data/placement.hpp"

namespace shiftlab {

double cosine_sim(const std::vector<double>& a, const std::vector<double>& b, bool* zero_flag) {
    if (a.size() != b.size())
        throw ShapeError("cosine_sim: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " differ");
    if (a.empty()) throw ShapeError("cosine_sim: empty vectors");
    if (a == b) {
        double norm = 0;
        for (double x : a) norm += x * x;
        if (norm == 0) {
            if (zero_flag) *zero_flag = true;
            return 0;
        }
        return 1.0;
    }
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) {
        if (zero_flag) *zero_flag = true;
        return 0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double invariance_metric(double t, double u) {
    if (u >= 1.0 - 1e-6)
        throw NumericsError(
            "uniformity " + std::to_string(u) +
            " is ~1: the representation is similar for everything, invariance is undefined");
    if (t == u) return 0.0;
    if (t == 1.0) return (1.0 - u) / (1.0 - u);
    return (t - u) / (1.0 - u);
}

std::vector<PositionTheta> horizontal_sweep(const Geometry& geom) {
    const PositionTheta base = geom.base_theta();
    const double step = geom.canvas / 22.0;
    std::vector<PositionTheta> out;
    for (int k = 0; k < 18; ++k) {
        const int x = std::min(geom.max_center(),
                               static_cast<int>(std::lround(base.cx + k * step)));
        out.push_back({x, base.cy});
    }
    return out;
}

namespace {

/// Activations of the given items placed at theta, flattened per item,
/// evaluated in fixed-size chunks (eval forwards are per-sample exact, so
/// chunking does not change any value).
std::vector<std::vector<double>> activations_at(Model& model, const GlyphDataset& items,
                                                const std::vector<int>& indices,
                                                const Geometry& geom, PositionTheta theta,
                                                const std::string& layer) {
    std::vector<std::vector<double>> out(indices.size());
    const int chunk = 32;
    for (std::size_t start = 0; start < indices.size(); start += chunk) {
        const int n = static_cast<int>(std::min<std::size_t>(chunk, indices.size() - start));
        Tensor<float> batch({n, 1, geom.canvas, geom.canvas});
        for (int i = 0; i < n; ++i) {
            const Tensor<float> canvas =
                place(items.samples[static_cast<std::size_t>(indices[start + static_cast<std::size_t>(i)])],
                      geom.canvas, geom.item, theta);
            std::copy_n(canvas.data(), canvas.numel(),
                        batch.data() + static_cast<Eigen::Index>(i) * canvas.numel());
        }
        Tape<float> tape;
        const ForwardResult r = model.forward(tape, batch, false, layer);
        const Tensor<float>& act = r.captured.value();
        const Eigen::Index per = act.numel() / n;
        for (int i = 0; i < n; ++i) {
            std::vector<double>& row = out[start + static_cast<std::size_t>(i)];
            row.resize(static_cast<std::size_t>(per));
            for (Eigen::Index j = 0; j < per; ++j)
                row[static_cast<std::size_t>(j)] = act[static_cast<Eigen::Index>(i) * per + j];
        }
    }
    return out;
}

}  // namespace

InvarianceResult invariance_profile(Model& model, const GlyphDataset& items, const Geometry& geom,
                                    const InvarianceProbeConfig& config) {
    const int M = static_cast<int>(items.samples.size());
    if (config.R < 2) throw ConfigError("invariance probe needs R >= 2 items");
    if (config.N < 2) throw ConfigError("invariance probe needs N >= 2 pairs");
    if (M < 2) throw ConfigError("invariance probe needs at least 2 items");
    if (config.R > M)
        throw ConfigError("invariance probe wants R=" + std::to_string(config.R) +
                          " items but the dataset has " + std::to_string(M));
    if (config.displacements.empty()) throw ConfigError("invariance probe has no displacements");
    auto check_admissible = [&](PositionTheta t, const char* what) {
        if (!geom.admissible(t))
            throw ConfigError(std::string(what) + " (" + std::to_string(t.cx) + "," +
                              std::to_string(t.cy) + ") clips the item on canvas " +
                              std::to_string(geom.canvas));
    };
    check_admissible(config.base, "base position");
    for (const PositionTheta& t : config.displacements) check_admissible(t, "displacement");

    const std::string layer = config.layer.empty() ? model.penultimate_layer() : config.layer;

    // R distinct probe items
    Rng item_rng(derive_seed(config.seed, 0xA11));
    std::vector<int> pool(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int i = M - 1; i > 0; --i)
        std::swap(pool[static_cast<std::size_t>(i)],
                  pool[static_cast<std::size_t>(item_rng.uniform_int(0, i))]);
    const std::vector<int> probe(pool.begin(), pool.begin() + config.R);

    // N cross-item pairs with distinct identities
    Rng pair_rng(derive_seed(config.seed, 0xB22));
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(config.N));
    for (int n = 0; n < config.N; ++n) {
        const int u = pair_rng.uniform_int(0, M - 1);
        int v = pair_rng.uniform_int(0, M - 2);
        if (v >= u) ++v;
        pairs.emplace_back(u, v);
    }

    // every index needed at the base / at each displacement
    std::set<int> base_set(probe.begin(), probe.end());
    std::set<int> disp_set(probe.begin(), probe.end());
    for (const auto& [u, v] : pairs) {
        base_set.insert(u);
        disp_set.insert(v);
    }
    const std::vector<int> base_idx(base_set.begin(), base_set.end());
    const std::vector<int> disp_idx(disp_set.begin(), disp_set.end());
    auto position_of = [](const std::vector<int>& sorted, int value) {
        return static_cast<std::size_t>(
            std::lower_bound(sorted.begin(), sorted.end(), value) - sorted.begin());
    };

    const std::vector<std::vector<double>> base_act =
        activations_at(model, items, base_idx, geom, config.base, layer);

    InvarianceResult res;
    res.layer = layer;
    res.dataset_id = items.id;
    res.model_desc = family_name(model.spec().family) + "-s" + std::to_string(model.spec().seed);

    for (const PositionTheta& theta : config.displacements) {
        const std::vector<std::vector<double>> disp_act =
            activations_at(model, items, disp_idx, geom, theta, layer);
        bool zero = false;
        double t_sum = 0;
        for (int r : probe) {
            bool z = false;
            t_sum += cosine_sim(base_act[position_of(base_idx, r)],
                                disp_act[position_of(disp_idx, r)], &z);
            if (z) {
                ++res.zero_vector_count;
                zero = true;
            }
        }
        double u_sum = 0;
        for (const auto& [u, v] : pairs) {
            bool z = false;
            u_sum += cosine_sim(base_act[position_of(base_idx, u)],
                                disp_act[position_of(disp_idx, v)], &z);
            if (z) {
                ++res.zero_vector_count;
                zero = true;
            }
        }
        (void)zero;
        ThetaInvariance e;
        e.theta = theta;
        e.T = t_sum / config.R;
        e.U = u_sum / config.N;
        e.I = invariance_metric(e.T, e.U);
        res.entries.push_back(e);
    }

    double sum = 0;
    for (const ThetaInvariance& e : res.entries) sum += e.I;
    res.mean_I = sum / static_cast<double>(res.entries.size());
    return res;
}

}  // namespace shiftlab
