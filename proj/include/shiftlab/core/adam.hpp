#pragma once

#include <cmath>

#include "shiftlab/core/tensor.hpp"

namespace shiftlab {

/// First/second moment estimates for one parameter tensor.
template <typename Scalar>
struct AdamState {
    Tensor<Scalar> m;
    Tensor<Scalar> v;
    long step = 0;

    AdamState() = default;
    explicit AdamState(const Shape& shape) : m(shape), v(shape) {}
};

template <typename Scalar>
struct AdamConfig {
    Scalar lr = Scalar(0.001);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);
};

/// One bias-corrected Adam update in place.
template <typename Scalar>
void adam_step(Tensor<Scalar>& param, const Tensor<Scalar>& grad, AdamState<Scalar>& state,
               const AdamConfig<Scalar>& cfg) {
    require_shape(grad, param.shape(), "adam_step gradient");
    require_shape(state.m, param.shape(), "adam_step state");
    require_finite(grad, "adam_step gradient");
    state.step += 1;
    state.m.array() = cfg.beta1 * state.m.array() + (Scalar(1) - cfg.beta1) * grad.array();
    state.v.array() =
        cfg.beta2 * state.v.array() + (Scalar(1) - cfg.beta2) * grad.array() * grad.array();
    const Scalar c1 = Scalar(1) - std::pow(cfg.beta1, static_cast<Scalar>(state.step));
    const Scalar c2 = Scalar(1) - std::pow(cfg.beta2, static_cast<Scalar>(state.step));
    param.array() -=
        cfg.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.eps);
    require_finite(param, "adam_step parameter");
}

}  // namespace shiftlab
