#pragma once

// Reference implementations used to check the engine. Everything here is
// written as directly as possible (nested loops, no shared helpers with the
// library) so that agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "shiftlab/core/rng.hpp"
#include "shiftlab/core/tape.hpp"

namespace oracle {

using shiftlab::Shape;
using shiftlab::Tensor;

/// Cross-correlation by seven nested loops.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& in, const Tensor<Scalar>& k, const Tensor<Scalar>& b,
                      int stride, int pad) {
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int O = k.dim(0), kH = k.dim(2), kW = k.dim(3);
    const int outH = (H + 2 * pad - kH) / stride + 1;
    const int outW = (W + 2 * pad - kW) / stride + 1;
    Tensor<Scalar> out({N, O, outH, outW});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o)
            for (int oy = 0; oy < outH; ++oy)
                for (int ox = 0; ox < outW; ++ox) {
                    Scalar acc = b[o];
                    for (int c = 0; c < C; ++c)
                        for (int ky = 0; ky < kH; ++ky)
                            for (int kx = 0; kx < kW; ++kx) {
                                const int iy = oy * stride - pad + ky;
                                const int ix = ox * stride - pad + kx;
                                if (iy >= 0 && iy < H && ix >= 0 && ix < W)
                                    acc += in.at(n, c, iy, ix) * k.at(o, c, ky, kx);
                            }
                    out.at(n, o, oy, ox) = acc;
                }
    return out;
}

/// Sliding-window max scan.
template <typename Scalar>
Tensor<Scalar> maxpool2d(const Tensor<Scalar>& in, int window, int stride) {
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int outH = (H - window) / stride + 1;
    const int outW = (W - window) / stride + 1;
    Tensor<Scalar> out({N, C, outH, outW});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int oy = 0; oy < outH; ++oy)
                for (int ox = 0; ox < outW; ++ox) {
                    Scalar best = in.at(n, c, oy * stride, ox * stride);
                    for (int dy = 0; dy < window; ++dy)
                        for (int dx = 0; dx < window; ++dx)
                            best = std::max(best, in.at(n, c, oy * stride + dy, ox * stride + dx));
                    out.at(n, c, oy, ox) = best;
                }
    return out;
}

/// Mirror-without-repeat border index (…2,1,0,1,2… for an edge at 0).
inline int mirror(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

/// Three-stage blur pooling: stride-1 max pool, explicit binomial blur with
/// mirrored borders, strided slice starting at offset 0.
template <typename Scalar>
Tensor<Scalar> blurpool2d(const Tensor<Scalar>& in, int window, int subsample) {
    const int N = in.dim(0), C = in.dim(1);
    Tensor<Scalar> mp = maxpool2d(in, window, 1);
    const int H1 = mp.dim(2), W1 = mp.dim(3);
    Tensor<Scalar> blurred({N, C, H1, W1});
    const Scalar w[3] = {Scalar(1) / 4, Scalar(1) / 2, Scalar(1) / 4};
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H1; ++y)
                for (int x = 0; x < W1; ++x) {
                    Scalar acc = 0;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx)
                            acc += w[dy + 1] * w[dx + 1] *
                                   mp.at(n, c, mirror(y + dy, H1), mirror(x + dx, W1));
                    blurred.at(n, c, y, x) = acc;
                }
    const int outH = (H1 - 1) / subsample + 1;
    const int outW = (W1 - 1) / subsample + 1;
    Tensor<Scalar> out({N, C, outH, outW});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < outH; ++y)
                for (int x = 0; x < outW; ++x)
                    out.at(n, c, y, x) = blurred.at(n, c, y * subsample, x * subsample);
    return out;
}

/// Direct per-channel statistics over (N,H,W).
template <typename Scalar>
Tensor<Scalar> batchnorm_train(const Tensor<Scalar>& in, const Tensor<Scalar>& gamma,
                               const Tensor<Scalar>& beta, Scalar eps) {
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    Tensor<Scalar> out(in.shape());
    for (int c = 0; c < C; ++c) {
        double sum = 0;
        for (int n = 0; n < N; ++n)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) sum += in.at(n, c, y, x);
        const double mean = sum / (static_cast<double>(N) * H * W);
        double var = 0;
        for (int n = 0; n < N; ++n)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const double d = in.at(n, c, y, x) - mean;
                    var += d * d;
                }
        var /= static_cast<double>(N) * H * W;
        for (int n = 0; n < N; ++n)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    out.at(n, c, y, x) = static_cast<Scalar>(
                        gamma[c] * (in.at(n, c, y, x) - mean) / std::sqrt(var + eps) + beta[c]);
    }
    return out;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& in) {
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    Tensor<Scalar> out({N, C});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            double s = 0;
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) s += in.at(n, c, y, x);
            out.at(n, c) = static_cast<Scalar>(s / (static_cast<double>(H) * W));
        }
    return out;
}

template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& in, const Tensor<Scalar>& w, const Tensor<Scalar>& b) {
    const int N = in.dim(0), F = in.dim(1), G = w.dim(0);
    Tensor<Scalar> out({N, G});
    for (int n = 0; n < N; ++n)
        for (int g = 0; g < G; ++g) {
            double acc = b[g];
            for (int f = 0; f < F; ++f) acc += static_cast<double>(in.at(n, f)) * w.at(g, f);
            out.at(n, g) = static_cast<Scalar>(acc);
        }
    return out;
}

/// Mean negative log softmax probability of the labeled class, in double.
template <typename Scalar>
double softmax_cross_entropy(const Tensor<Scalar>& logits, const std::vector<int>& labels) {
    const int N = logits.dim(0), K = logits.dim(1);
    double total = 0;
    for (int n = 0; n < N; ++n) {
        double mx = logits.at(n, 0);
        for (int k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(logits.at(n, k)));
        double denom = 0;
        for (int k = 0; k < K; ++k) denom += std::exp(static_cast<double>(logits.at(n, k)) - mx);
        total -= (static_cast<double>(logits.at(n, labels[static_cast<std::size_t>(n)])) - mx) -
                 std::log(denom);
    }
    return total / N;
}

/// Independent two-step Adam recurrence used to pin adam_step.
template <typename Scalar>
void adam_reference(std::vector<Scalar>& param, const std::vector<std::vector<Scalar>>& grads,
                    Scalar lr, Scalar b1, Scalar b2, Scalar eps) {
    std::vector<double> m(param.size(), 0.0), v(param.size(), 0.0);
    for (std::size_t t = 1; t <= grads.size(); ++t) {
        const auto& g = grads[t - 1];
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / (1.0 - std::pow(static_cast<double>(b1), static_cast<double>(t)));
            const double vhat = v[i] / (1.0 - std::pow(static_cast<double>(b2), static_cast<double>(t)));
            param[i] -= static_cast<Scalar>(lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

/// Central finite-difference check of d(loss)/d(inputs) for every element of
/// every input tensor, in double precision. `f` rebuilds the graph from leaf
/// values and returns the scalar loss. Returns the worst relative error.
inline double gradcheck(const std::vector<Tensor<double>>& inputs,
                        const std::function<shiftlab::Var<double>(
                            shiftlab::Tape<double>&, std::vector<shiftlab::Var<double>>&)>& f,
                        double h = 1e-4) {
    auto eval = [&](const std::vector<Tensor<double>>& vals) {
        shiftlab::Tape<double> tape;
        std::vector<shiftlab::Var<double>> vars;
        for (const auto& v : vals) vars.push_back(tape.leaf(v, false));
        return f(tape, vars).value()[0];
    };

    shiftlab::Tape<double> tape;
    std::vector<shiftlab::Var<double>> vars;
    for (const auto& v : inputs) vars.push_back(tape.leaf(v, true));
    auto loss = f(tape, vars);
    tape.backward(loss);

    double worst = 0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const Tensor<double>& analytic = vars[t].grad();
        for (Eigen::Index i = 0; i < inputs[t].numel(); ++i) {
            std::vector<Tensor<double>> bumped = inputs;
            bumped[t][i] += h;
            const double up = eval(bumped);
            bumped[t][i] -= 2 * h;
            const double down = eval(bumped);
            const double numeric = (up - down) / (2 * h);
            const double denom = std::max({1e-4, std::abs(analytic[i]), std::abs(numeric)});
            worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
        }
    }
    return worst;
}

template <typename Scalar>
Tensor<Scalar> random_tensor(const Shape& shape, shiftlab::Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
    Tensor<Scalar> t(shape);
    for (Eigen::Index i = 0; i < t.numel(); ++i) t[i] = static_cast<Scalar>(rng.uniform(lo, hi));
    return t;
}

}  // namespace oracle
