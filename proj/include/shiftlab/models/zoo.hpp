#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shiftlab/core/adam.hpp"
#include "shiftlab/core/ops.hpp"
#include "shiftlab/core/rng.hpp"
#include "shiftlab/core/tape.hpp"
#include "shiftlab/core/tensor.hpp"

namespace shiftlab {

/// The six network families under study. The four conv families share one
/// block layout (two 3x3 convs + pool, widths 16/32/64/64); gap_head is a
/// stride-1 network closed by global average pooling; dense_connect feeds
/// every block the pooled outputs of all earlier blocks plus the input.
enum class Family { plain, plain_bn, gap_head, anti_aliased, full_conv, dense_connect };

Family family_from_name(const std::string& name);
std::string family_name(Family family);
std::vector<std::string> family_names();

struct ArchSpec {
    Family family = Family::plain;
    int canvas = 96;
    int in_channels = 1;
    int n_classes = 10;
    int width_mult = 1;
    std::uint64_t seed = 0;
};

/// A named trainable tensor plus its optimizer slots.
struct Param {
    std::string name;
    Tensor<float> value;
    AdamState<float> adam;
};

/// One row of describe(): layer name, op kind, output shape for a single
/// sample, and the number of parameters owned by the layer.
struct LayerInfo {
    std::string name;
    std::string type;
    Shape out_shape;
    std::int64_t param_count = 0;
};

/// Everything a caller needs after one forward pass: the logits node, the
/// optionally captured intermediate, and the tape ids of the parameter
/// leaves (parallel to Model::params()) for reading gradients back.
struct ForwardResult {
    Var<float> logits;
    Var<float> captured;
    bool has_capture = false;
    std::vector<int> param_ids;
};

class Model {
public:
    explicit Model(const ArchSpec& spec);

    const ArchSpec& spec() const { return spec_; }
    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }

    /// Runs the network on an N x C x S x S batch. `capture` names an
    /// intermediate layer whose activation node is returned alongside the
    /// logits; unknown names raise ConfigError listing the valid ones.
    /// In train mode every parameter requires a gradient and batch-norm
    /// updates its running statistics unless `freeze_bn_stats` is set.
    ForwardResult forward(Tape<float>& tape, const Tensor<float>& images, bool train,
                          const std::string& capture = "", bool freeze_bn_stats = false);

    /// Layer right before the classifier head; the default probe point of
    /// the invariance metric.
    std::string penultimate_layer() const;

    /// Layer table from a single-sample dry run (name, type, shape, params).
    std::vector<LayerInfo> describe();
    std::vector<std::string> layer_names();

    std::int64_t param_total() const;

    std::vector<std::pair<std::string, BatchNormState<float>*>> bn_states();

private:
    friend struct ZooBuilder;
    ForwardResult forward_impl(Tape<float>& tape, const Tensor<float>& images, bool train,
                               const std::string& capture, bool freeze_bn_stats,
                               std::vector<LayerInfo>* trace);

    ArchSpec spec_;
    std::vector<Param> params_;
    std::vector<std::string> bn_names_;
    std::vector<BatchNormState<float>> bn_;
};

inline Model build_model(const ArchSpec& spec) { return Model(spec); }

}  // namespace shiftlab
