#pragma once

#include <cmath>

#include "shiftlab/core/rng.hpp"
#include "shiftlab/core/tensor.hpp"

namespace shiftlab {

/// He-style normal init, N(0, 2/fan_in), for layers followed by rectifiers.
/// Conv kernels (rank 4) use fan_in = in_channels * kH * kW; linear weights
/// (rank 2) use fan_in = in_features.
template <typename Scalar>
Tensor<Scalar> kaiming_init(const Shape& shape, Rng& rng) {
    long fan_in = 0;
    if (shape.size() == 4)
        fan_in = static_cast<long>(shape[1]) * shape[2] * shape[3];
    else if (shape.size() == 2)
        fan_in = shape[1];
    else
        throw ShapeError("kaiming_init: expected rank 2 or 4, got " + shape_str(shape));
    if (fan_in <= 0) throw ShapeError("kaiming_init: non-positive fan-in for " + shape_str(shape));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor<Scalar> out(shape);
    for (Eigen::Index i = 0; i < out.numel(); ++i)
        out[i] = static_cast<Scalar>(rng.normal(0.0, stddev));
    return out;
}

}  // namespace shiftlab
