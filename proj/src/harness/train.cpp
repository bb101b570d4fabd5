#include "shiftlab/harness/train.hpp"

#include <algorithm>
#include <cmath>

#include "shiftlab/core/error.hpp"
#include "shiftlab/data/placement.hpp"

namespace shiftlab {

namespace {

Tensor<float> gather_images(const PlacedDataset& data, const std::vector<int>& idx) {
    const int S = data.geom.canvas;
    Tensor<float> batch({static_cast<int>(idx.size()), 1, S, S});
    const Eigen::Index plane = static_cast<Eigen::Index>(S) * S;
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(data.images.data() + idx[i] * plane, plane,
                    batch.data() + static_cast<Eigen::Index>(i) * plane);
    return batch;
}

std::vector<int> gather_labels(const PlacedDataset& data, const std::vector<int>& idx) {
    std::vector<int> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        labels[i] = data.labels[static_cast<std::size_t>(idx[i])];
    return labels;
}

}  // namespace

TrainLog train(Model& model, const PlacedDataset& data, const TrainConfig& config) {
    if (data.n_classes != model.spec().n_classes)
        throw ConfigError("dataset has " + std::to_string(data.n_classes) +
                          " classes but the model head expects " +
                          std::to_string(model.spec().n_classes));
    if (data.size() < 2) throw ConfigError("training needs at least 2 samples");
    if (config.batch_size < 2) throw ConfigError("batch size must be >= 2");
    if (config.max_epochs < 1) throw ConfigError("epoch budget must be >= 1");
    if (config.adam.lr < 0) throw ConfigError("learning rate must be >= 0");

    TrainLog log;
    int streak = 0;
    std::vector<int> order(static_cast<std::size_t>(data.size()));
    for (int i = 0; i < data.size(); ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
        for (int i = data.size() - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.uniform_int(0, i))]);

        double loss_sum = 0;
        int correct = 0, seen = 0;
        for (int start = 0; start < data.size(); start += config.batch_size) {
            const int n = std::min(config.batch_size, data.size() - start);
            if (n < 2) break;  // batch-norm needs statistics; the sample returns next epoch
            const std::vector<int> idx(order.begin() + start, order.begin() + start + n);
            const Tensor<float> images = gather_images(data, idx);
            const std::vector<int> labels = gather_labels(data, idx);

            Tape<float> tape;
            const ForwardResult fr =
                model.forward(tape, images, true, "", config.freeze_bn_stats);
            const Var<float> loss = softmax_cross_entropy(fr.logits, labels);

            const std::vector<int> pred = argmax_rows(fr.logits.value());
            for (int i = 0; i < n; ++i)
                correct += pred[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)];
            seen += n;
            loss_sum += static_cast<double>(loss.value()[0]) * n;

            tape.backward(loss);
            auto& params = model.params();
            for (std::size_t p = 0; p < params.size(); ++p) {
                if (params[p].adam.m.numel() == 0)
                    params[p].adam = AdamState<float>(params[p].value.shape());
                adam_step(params[p].value, tape.grad(fr.param_ids[p]), params[p].adam,
                          config.adam);
            }
        }
        if (seen == 0) throw ConfigError("no trainable batch (dataset too small for batch-norm)");

        const double acc = static_cast<double>(correct) / seen;
        log.epochs.push_back({epoch, loss_sum / seen, acc});
        log.final_accuracy = acc;
        streak = acc >= config.target_acc ? streak + 1 : 0;
        if (streak >= config.sustain) {
            log.converged = true;
            break;
        }
    }
    return log;
}

namespace {

std::vector<int> predictions(Model& model, const PlacedDataset& data) {
    std::vector<int> pred;
    pred.reserve(static_cast<std::size_t>(data.size()));
    const int chunk = 64;
    std::vector<int> idx;
    for (int start = 0; start < data.size(); start += chunk) {
        const int n = std::min(chunk, data.size() - start);
        idx.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = start + i;
        Tape<float> tape;
        const ForwardResult fr = model.forward(tape, gather_images(data, idx), false);
        for (int p : argmax_rows(fr.logits.value())) pred.push_back(p);
    }
    return pred;
}

}  // namespace

double evaluate(Model& model, const PlacedDataset& data) {
    if (data.size() == 0) throw ConfigError("evaluation dataset is empty");
    const std::vector<int> pred = predictions(model, data);
    int correct = 0;
    for (int i = 0; i < data.size(); ++i)
        correct += pred[static_cast<std::size_t>(i)] == data.labels[static_cast<std::size_t>(i)];
    return static_cast<double>(correct) / data.size();
}

PerClassAccuracy evaluate_per_class(Model& model, const PlacedDataset& data) {
    if (data.size() == 0) throw ConfigError("evaluation dataset is empty");
    const std::vector<int> pred = predictions(model, data);
    PerClassAccuracy out;
    out.accuracy.assign(static_cast<std::size_t>(data.n_classes), 0.0);
    out.count.assign(static_cast<std::size_t>(data.n_classes), 0);
    for (int i = 0; i < data.size(); ++i) {
        const std::size_t c = static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)]);
        out.count[c] += 1;
        out.accuracy[c] += pred[static_cast<std::size_t>(i)] == static_cast<int>(c);
    }
    for (std::size_t c = 0; c < out.accuracy.size(); ++c)
        if (out.count[c] > 0) out.accuracy[c] /= out.count[c];
    return out;
}

double DensityGrid::mean() const {
    double s = 0;
    for (double a : acc) s += a;
    return acc.empty() ? 0.0 : s / static_cast<double>(acc.size());
}

DensityGrid density_map(Model& model, const GlyphDataset& probe, const Geometry& geom, int G) {
    if (G < 2) throw ConfigError("density grid needs G >= 2");
    if (probe.samples.empty()) throw ConfigError("density probe set is empty");
    DensityGrid grid;
    grid.G = G;
    grid.geom = geom;
    grid.probe_count = static_cast<int>(probe.samples.size());
    const int lo = geom.min_center(), hi = geom.max_center();
    std::vector<int> centers(static_cast<std::size_t>(G));
    for (int i = 0; i < G; ++i)
        centers[static_cast<std::size_t>(i)] =
            lo + static_cast<int>(std::lround(static_cast<double>(i) * (hi - lo) / (G - 1)));

    const int M = grid.probe_count;
    std::vector<int> labels(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) labels[static_cast<std::size_t>(i)] = probe.samples[static_cast<std::size_t>(i)].class_id;

    for (int gy = 0; gy < G; ++gy)
        for (int gx = 0; gx < G; ++gx) {
            const PositionTheta theta{centers[static_cast<std::size_t>(gx)],
                                      centers[static_cast<std::size_t>(gy)]};
            if (!geom.admissible(theta))
                throw ConfigError("density grid center (" + std::to_string(theta.cx) + "," +
                                  std::to_string(theta.cy) + ") clips the item");
            int correct = 0;
            const int chunk = 64;
            for (int start = 0; start < M; start += chunk) {
                const int n = std::min(chunk, M - start);
                Tensor<float> batch({n, 1, geom.canvas, geom.canvas});
                for (int i = 0; i < n; ++i) {
                    const Tensor<float> canvas = place(
                        probe.samples[static_cast<std::size_t>(start + i)], geom.canvas,
                        geom.item, theta);
                    std::copy_n(canvas.data(), canvas.numel(),
                                batch.data() + static_cast<Eigen::Index>(i) * canvas.numel());
                }
                Tape<float> tape;
                const std::vector<int> pred =
                    argmax_rows(model.forward(tape, batch, false).logits.value());
                for (int i = 0; i < n; ++i)
                    correct += pred[static_cast<std::size_t>(i)] ==
                               labels[static_cast<std::size_t>(start + i)];
            }
            grid.xs.push_back(theta.cx);
            grid.ys.push_back(theta.cy);
            grid.acc.push_back(static_cast<double>(correct) / M);
        }
    return grid;
}

GlyphDataset probe_subset(const GlyphDataset& source, int n_per_class) {
    if (n_per_class < 1) throw ConfigError("probe subset needs n >= 1 per class");
    GlyphDataset out;
    out.id = source.id + "-probe" + std::to_string(n_per_class);
    out.n_classes = source.n_classes;
    for (int c = 0; c < source.n_classes; ++c) {
        const std::vector<int> idx = source.class_index(c);
        const int take = std::min<int>(n_per_class, static_cast<int>(idx.size()));
        for (int i = 0; i < take; ++i)
            out.samples.push_back(source.samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    }
    return out;
}

}  // namespace shiftlab
