#include "shiftlab/models/zoo.hpp"

#include <algorithm>
#include <numeric>

#include "shiftlab/core/error.hpp"
#include "shiftlab/core/init.hpp"

namespace shiftlab {

namespace {

const char* kFamilyNames[] = {"plain",      "plain_bn",  "gap_head",
                              "anti_aliased", "full_conv", "dense_connect"};

bool has_batchnorm(Family f) {
    return f == Family::plain_bn || f == Family::anti_aliased || f == Family::full_conv ||
           f == Family::dense_connect;
}

bool is_conv_family(Family f) {
    return f == Family::plain || f == Family::plain_bn || f == Family::anti_aliased ||
           f == Family::full_conv;
}

std::vector<int> block_widths(const ArchSpec& spec) {
    std::vector<int> w = spec.family == Family::gap_head ? std::vector<int>{8, 12, 16}
                                                         : std::vector<int>{16, 32, 64, 64};
    for (int& x : w) x *= spec.width_mult;
    return w;
}

std::string block_name(int b, const char* suffix) {
    return "b" + std::to_string(b) + "." + suffix;
}

}  // namespace

Family family_from_name(const std::string& name) {
    for (std::size_t i = 0; i < std::size(kFamilyNames); ++i)
        if (name == kFamilyNames[i]) return static_cast<Family>(i);
    std::string all;
    for (const char* n : kFamilyNames) all += std::string(all.empty() ? "" : ", ") + n;
    throw ConfigError("unknown family '" + name + "' (expected one of: " + all + ")");
}

std::string family_name(Family family) {
    return kFamilyNames[static_cast<std::size_t>(family)];
}

std::vector<std::string> family_names() {
    return {std::begin(kFamilyNames), std::end(kFamilyNames)};
}

Model::Model(const ArchSpec& spec) : spec_(spec) {
    if (spec.n_classes < 2) throw ConfigError("model needs at least 2 classes");
    if (spec.width_mult < 1) throw ConfigError("width multiplier must be >= 1");
    if (spec.in_channels < 1) throw ConfigError("input channels must be >= 1");
    if (spec.family == Family::gap_head) {
        if (spec.canvas < 8) throw ConfigError("gap_head canvas must be >= 8");
    } else if (spec.canvas < 16 || spec.canvas % 16 != 0) {
        throw ConfigError("canvas " + std::to_string(spec.canvas) +
                          " is not divisible through the four pooling stages "
                          "(must be a multiple of 16)");
    }

    Rng rng(spec.seed);
    const std::vector<int> widths = block_widths(spec);

    auto add_conv = [&](const std::string& name, int cin, int cout) {
        params_.push_back({name + ".w", kaiming_init<float>({cout, cin, 3, 3}, rng), {}});
        params_.push_back({name + ".b", Tensor<float>::zeros({cout}), {}});
    };
    auto add_bn = [&](const std::string& name, int c) {
        params_.push_back({name + ".gamma", Tensor<float>::full({c}, 1.0f), {}});
        params_.push_back({name + ".beta", Tensor<float>::zeros({c}), {}});
        bn_names_.push_back(name);
        bn_.push_back(BatchNormState<float>(c));
    };
    auto add_linear = [&](const std::string& name, int fin, int fout) {
        params_.push_back({name + ".w", kaiming_init<float>({fout, fin}, rng), {}});
        params_.push_back({name + ".b", Tensor<float>::zeros({fout}), {}});
    };

    if (is_conv_family(spec.family)) {
        int cin = spec.in_channels;
        int s = spec.canvas;
        for (std::size_t b = 1; b <= widths.size(); ++b) {
            for (int c = 1; c <= 2; ++c) {
                add_conv(block_name(static_cast<int>(b), ("conv" + std::to_string(c)).c_str()),
                         cin, widths[b - 1]);
                if (has_batchnorm(spec.family))
                    add_bn(block_name(static_cast<int>(b), ("bn" + std::to_string(c)).c_str()),
                           widths[b - 1]);
                cin = widths[b - 1];
                if (spec.family == Family::full_conv) s += 2;
            }
            s = (s - 2) / 2 + 1;
        }
        add_linear("fc1", cin * s * s, 128 * spec.width_mult);
        add_linear("logits", 128 * spec.width_mult, spec.n_classes);
    } else if (spec.family == Family::gap_head) {
        int cin = spec.in_channels;
        for (std::size_t b = 1; b <= widths.size(); ++b) {
            for (int c = 1; c <= 2; ++c) {
                add_conv(block_name(static_cast<int>(b), ("conv" + std::to_string(c)).c_str()),
                         cin, widths[b - 1]);
                cin = widths[b - 1];
            }
        }
        add_linear("logits", widths.back(), spec.n_classes);
    } else {  // dense_connect
        int seen = 0;
        for (std::size_t b = 1; b <= widths.size(); ++b) {
            const int cin = b == 1 ? spec.in_channels : spec.in_channels + seen;
            add_conv(block_name(static_cast<int>(b), "conv1"), cin, widths[b - 1]);
            add_bn(block_name(static_cast<int>(b), "bn1"), widths[b - 1]);
            seen += widths[b - 1];
        }
        add_linear("logits", widths.back(), spec.n_classes);
    }
}

ForwardResult Model::forward(Tape<float>& tape, const Tensor<float>& images, bool train,
                             const std::string& capture, bool freeze_bn_stats) {
    return forward_impl(tape, images, train, capture, freeze_bn_stats, nullptr);
}

ForwardResult Model::forward_impl(Tape<float>& tape, const Tensor<float>& images, bool train,
                                  const std::string& capture, bool freeze_bn_stats,
                                  std::vector<LayerInfo>* trace) {
    require_rank(images, 4, "model input");
    if (images.dim(1) != spec_.in_channels || images.dim(2) != spec_.canvas ||
        images.dim(3) != spec_.canvas)
        throw ShapeError("model input " + shape_str(images.shape()) + " does not match geometry " +
                         std::to_string(spec_.in_channels) + "x" + std::to_string(spec_.canvas) +
                         "x" + std::to_string(spec_.canvas));

    ForwardResult res;
    res.param_ids.reserve(params_.size());
    std::vector<Var<float>> pv;
    pv.reserve(params_.size());
    for (Param& p : params_) {
        pv.push_back(tape.leaf(p.value, train));
        res.param_ids.push_back(pv.back().id);
    }
    auto P = [&](const std::string& name) -> Var<float> {
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_[i].name == name) return pv[i];
        throw Error("internal: missing parameter " + name);
    };
    auto BN = [&](const std::string& name) -> BatchNormState<float>& {
        for (std::size_t i = 0; i < bn_names_.size(); ++i)
            if (bn_names_[i] == name) return bn_[i];
        throw Error("internal: missing batchnorm state " + name);
    };
    auto owned = [&](const std::string& layer) {
        std::int64_t n = 0;
        const std::string prefix = layer + ".";
        for (const Param& p : params_)
            if (p.name.rfind(prefix, 0) == 0) n += p.value.numel();
        return n;
    };

    std::vector<std::string> seen;
    auto note = [&](const std::string& name, const char* type, const Var<float>& v) {
        seen.push_back(name);
        if (trace) trace->push_back({name, type, v.shape(), owned(name)});
        if (!capture.empty() && name == capture) {
            res.captured = v;
            res.has_capture = true;
        }
    };

    const float momentum = freeze_bn_stats ? 0.0f : 0.1f;
    const std::vector<int> widths = block_widths(spec_);
    Var<float> x = tape.leaf(images, false);

    if (is_conv_family(spec_.family)) {
        const int pad = spec_.family == Family::full_conv ? 2 : 1;
        for (std::size_t b = 1; b <= widths.size(); ++b) {
            for (int c = 1; c <= 2; ++c) {
                const std::string conv = block_name(static_cast<int>(b), ("conv" + std::to_string(c)).c_str());
                x = conv2d(x, P(conv + ".w"), P(conv + ".b"), 1, pad);
                note(conv, "conv3x3", x);
                if (has_batchnorm(spec_.family)) {
                    const std::string bn = block_name(static_cast<int>(b), ("bn" + std::to_string(c)).c_str());
                    x = batchnorm(x, P(bn + ".gamma"), P(bn + ".beta"), BN(bn), train, momentum);
                    note(bn, "batchnorm", x);
                }
                x = relu(x);
                note(block_name(static_cast<int>(b), ("relu" + std::to_string(c)).c_str()), "relu", x);
            }
            x = spec_.family == Family::anti_aliased ? blurpool2d(x, 2, 2) : maxpool2d(x, 2, 2);
            note(block_name(static_cast<int>(b), "pool"),
                 spec_.family == Family::anti_aliased ? "blurpool2" : "maxpool2", x);
        }
        x = flatten(x);
        note("flatten", "flatten", x);
        x = linear(x, P("fc1.w"), P("fc1.b"));
        note("fc1", "linear", x);
        x = relu(x);
        note("fc1.relu", "relu", x);
        x = linear(x, P("logits.w"), P("logits.b"));
        note("logits", "linear", x);
    } else if (spec_.family == Family::gap_head) {
        for (std::size_t b = 1; b <= widths.size(); ++b) {
            for (int c = 1; c <= 2; ++c) {
                const std::string conv = block_name(static_cast<int>(b), ("conv" + std::to_string(c)).c_str());
                x = conv2d(x, P(conv + ".w"), P(conv + ".b"), 1, 1);
                note(conv, "conv3x3", x);
                x = relu(x);
                note(block_name(static_cast<int>(b), ("relu" + std::to_string(c)).c_str()), "relu", x);
            }
        }
        x = global_avg_pool(x);
        note("gap", "global_avg_pool", x);
        x = linear(x, P("logits.w"), P("logits.b"));
        note("logits", "linear", x);
    } else {  // dense_connect: block b sees the input and all earlier blocks,
              // pooled down to its working resolution
        const Var<float> input = x;
        std::vector<Var<float>> outs;
        for (std::size_t b = 1; b <= widths.size(); ++b) {
            const int d = static_cast<int>(b) - 1;
            if (d > 0) {
                std::vector<Var<float>> parts;
                const int f = 1 << d;
                parts.push_back(maxpool2d(input, f, f));
                for (int e = 0; e < d; ++e) {
                    const int g = 1 << (d - 1 - e);
                    parts.push_back(g > 1 ? maxpool2d(outs[static_cast<std::size_t>(e)], g, g)
                                          : outs[static_cast<std::size_t>(e)]);
                }
                x = concat_channels(parts);
                note(block_name(static_cast<int>(b), "concat"), "concat", x);
            } else {
                x = input;
            }
            const std::string conv = block_name(static_cast<int>(b), "conv1");
            const std::string bn = block_name(static_cast<int>(b), "bn1");
            x = conv2d(x, P(conv + ".w"), P(conv + ".b"), 1, 1);
            note(conv, "conv3x3", x);
            x = batchnorm(x, P(bn + ".gamma"), P(bn + ".beta"), BN(bn), train, momentum);
            note(bn, "batchnorm", x);
            x = relu(x);
            note(block_name(static_cast<int>(b), "relu1"), "relu", x);
            x = maxpool2d(x, 2, 2);
            note(block_name(static_cast<int>(b), "pool"), "maxpool2", x);
            outs.push_back(x);
        }
        x = global_avg_pool(x);
        note("gap", "global_avg_pool", x);
        x = linear(x, P("logits.w"), P("logits.b"));
        note("logits", "linear", x);
    }

    res.logits = x;
    if (!capture.empty() && !res.has_capture) {
        std::string all;
        for (const std::string& n : seen) all += (all.empty() ? "" : ", ") + n;
        throw ConfigError("unknown layer '" + capture + "' for family " + family_name(spec_.family) +
                          " (layers: " + all + ")");
    }
    return res;
}

std::string Model::penultimate_layer() const {
    // The last hidden representation feeding the final linear layer: the
    // hidden fully-connected activation for the conv families, the pooled
    // channel vector for the GAP-headed ones.
    return is_conv_family(spec_.family) ? "fc1.relu" : "gap";
}

std::vector<LayerInfo> Model::describe() {
    std::vector<LayerInfo> out;
    Tape<float> tape;
    const Tensor<float> dummy =
        Tensor<float>::zeros({1, spec_.in_channels, spec_.canvas, spec_.canvas});
    forward_impl(tape, dummy, false, "", false, &out);
    return out;
}

std::vector<std::string> Model::layer_names() {
    std::vector<std::string> names;
    for (const LayerInfo& l : describe()) names.push_back(l.name);
    return names;
}

std::int64_t Model::param_total() const {
    std::int64_t n = 0;
    for (const Param& p : params_) n += p.value.numel();
    return n;
}

std::vector<std::pair<std::string, BatchNormState<float>*>> Model::bn_states() {
    std::vector<std::pair<std::string, BatchNormState<float>*>> out;
    for (std::size_t i = 0; i < bn_.size(); ++i) out.emplace_back(bn_names_[i], &bn_[i]);
    return out;
}

}  // namespace shiftlab
