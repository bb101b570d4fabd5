#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "shiftlab/core/tape.hpp"

namespace shiftlab {

// Layer inventory for the network families in models/. Convolution uses
// cross-correlation semantics (no kernel flip); all other conventions are
// documented on the op.

namespace detail {

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

/// reflect-101 index map; degenerates to index 0 for size-1 dims.
inline int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0)
            i = -i;
        else
            i = 2 * n - 2 - i;
    }
    return i;
}

template <typename Scalar>
using DynMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Fills `col` (C*kH*kW rows by outH*outW cols, column-major) with the patch
/// matrix of one sample, zero-padded `pad` on each side.
template <typename Scalar>
void im2col(const Scalar* in, int C, int H, int W, int kH, int kW, int stride, int pad, int outH,
            int outW, DynMatrix<Scalar>& col) {
    const Eigen::Index rows = col.rows();
    for (int c = 0; c < C; ++c) {
        const Scalar* plane = in + static_cast<std::ptrdiff_t>(c) * H * W;
        for (int ky = 0; ky < kH; ++ky) {
            for (int kx = 0; kx < kW; ++kx) {
                const int row = (c * kH + ky) * kW + kx;
                for (int oy = 0; oy < outH; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    Scalar* dst = col.data() + static_cast<std::ptrdiff_t>(oy) * outW * rows + row;
                    if (iy < 0 || iy >= H) {
                        for (int ox = 0; ox < outW; ++ox) dst[static_cast<std::ptrdiff_t>(ox) * rows] = Scalar(0);
                        continue;
                    }
                    int lo = 0;
                    while (lo < outW && lo * stride - pad + kx < 0) ++lo;
                    int hi = outW;
                    while (hi > lo && (hi - 1) * stride - pad + kx >= W) --hi;
                    for (int ox = 0; ox < lo; ++ox) dst[static_cast<std::ptrdiff_t>(ox) * rows] = Scalar(0);
                    const Scalar* src = plane + static_cast<std::ptrdiff_t>(iy) * W;
                    for (int ox = lo; ox < hi; ++ox)
                        dst[static_cast<std::ptrdiff_t>(ox) * rows] = src[ox * stride - pad + kx];
                    for (int ox = hi; ox < outW; ++ox) dst[static_cast<std::ptrdiff_t>(ox) * rows] = Scalar(0);
                }
            }
        }
    }
}

/// Adjoint of im2col: scatter-adds patch-matrix gradients back onto the input.
template <typename Scalar>
void col2im(const DynMatrix<Scalar>& col, int C, int H, int W, int kH, int kW, int stride, int pad,
            int outH, int outW, Scalar* din) {
    const Eigen::Index rows = col.rows();
    for (int c = 0; c < C; ++c) {
        Scalar* plane = din + static_cast<std::ptrdiff_t>(c) * H * W;
        for (int ky = 0; ky < kH; ++ky) {
            for (int kx = 0; kx < kW; ++kx) {
                const int row = (c * kH + ky) * kW + kx;
                for (int oy = 0; oy < outH; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    const Scalar* src = col.data() + static_cast<std::ptrdiff_t>(oy) * outW * rows + row;
                    Scalar* dst = plane + static_cast<std::ptrdiff_t>(iy) * W;
                    for (int ox = 0; ox < outW; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < W) dst[ix] += src[static_cast<std::ptrdiff_t>(ox) * rows];
                    }
                }
            }
        }
    }
}

/// 3x3 binomial blur [1,2,1]x[1,2,1]/16 with reflect-101 borders, one plane.
template <typename Scalar>
void blur3(const Scalar* src, Scalar* dst, int H, int W) {
    const Scalar k[3] = {Scalar(0.25), Scalar(0.5), Scalar(0.25)};
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            Scalar acc = Scalar(0);
            for (int dy = -1; dy <= 1; ++dy) {
                const Scalar* row = src + static_cast<std::ptrdiff_t>(reflect(y + dy, H)) * W;
                Scalar racc = Scalar(0);
                for (int dx = -1; dx <= 1; ++dx) racc += k[dx + 1] * row[reflect(x + dx, W)];
                acc += k[dy + 1] * racc;
            }
            dst[static_cast<std::ptrdiff_t>(y) * W + x] = acc;
        }
    }
}

template <typename Scalar>
void blur3_adjoint(const Scalar* dout, Scalar* dsrc, int H, int W) {
    const Scalar k[3] = {Scalar(0.25), Scalar(0.5), Scalar(0.25)};
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const Scalar g = dout[static_cast<std::ptrdiff_t>(y) * W + x];
            for (int dy = -1; dy <= 1; ++dy) {
                Scalar* row = dsrc + static_cast<std::ptrdiff_t>(reflect(y + dy, H)) * W;
                for (int dx = -1; dx <= 1; ++dx) row[reflect(x + dx, W)] += k[dy + 1] * k[dx + 1] * g;
            }
        }
    }
}

/// Max pool over square windows, recording row-major-first argmax positions.
template <typename Scalar>
void maxpool_plane(const Scalar* in, int planes, int H, int W, int window, int stride, int outH,
                   int outW, Scalar* out, std::int32_t* arg) {
    for (int p = 0; p < planes; ++p) {
        const Scalar* plane = in + static_cast<std::ptrdiff_t>(p) * H * W;
        Scalar* oplane = out + static_cast<std::ptrdiff_t>(p) * outH * outW;
        std::int32_t* aplane = arg + static_cast<std::ptrdiff_t>(p) * outH * outW;
        for (int oy = 0; oy < outH; ++oy) {
            for (int ox = 0; ox < outW; ++ox) {
                const int y0 = oy * stride;
                const int x0 = ox * stride;
                Scalar best = plane[static_cast<std::ptrdiff_t>(y0) * W + x0];
                std::int32_t besti = y0 * W + x0;
                for (int dy = 0; dy < window; ++dy) {
                    const Scalar* row = plane + static_cast<std::ptrdiff_t>(y0 + dy) * W;
                    for (int dx = 0; dx < window; ++dx) {
                        const Scalar v = row[x0 + dx];
                        if (v > best) {
                            best = v;
                            besti = (y0 + dy) * W + x0 + dx;
                        }
                    }
                }
                oplane[static_cast<std::ptrdiff_t>(oy) * outW + ox] = best;
                aplane[static_cast<std::ptrdiff_t>(oy) * outW + ox] = besti;
            }
        }
    }
}

inline void check_pool_args(const Shape& s, int window, int stride, const char* who) {
    if (s.size() != 4) throw ShapeError(std::string(who) + ": expected rank 4, got " + shape_str(s));
    if (stride <= 0) throw ConfigError(std::string(who) + ": stride must be positive");
    if (window <= 0) throw ConfigError(std::string(who) + ": window must be positive");
    if (window > s[2] || window > s[3])
        throw ShapeError(std::string(who) + ": window " + std::to_string(window) +
                         " larger than input " + shape_str(s));
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> input, Var<Scalar> kernel, Var<Scalar> bias, int stride, int zero_pad) {
    Tape<Scalar>& tape = *input.tape;
    const Tensor<Scalar>& in = input.value();
    const Tensor<Scalar>& k = kernel.value();
    const Tensor<Scalar>& b = bias.value();
    require_rank(in, 4, "conv2d input");
    require_rank(k, 4, "conv2d kernel");
    if (stride <= 0) throw ConfigError("conv2d: stride must be positive");
    if (zero_pad < 0) throw ConfigError("conv2d: zero_pad must be non-negative");
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int O = k.dim(0), kH = k.dim(2), kW = k.dim(3);
    if (k.dim(1) != C)
        throw ShapeError("conv2d: kernel channels " + std::to_string(k.dim(1)) +
                         " do not match input channels " + std::to_string(C));
    if (b.numel() != O) throw ShapeError("conv2d: bias length does not match output channels");
    if (kH > H + 2 * zero_pad || kW > W + 2 * zero_pad)
        throw ShapeError("conv2d: kernel " + shape_str(k.shape()) + " larger than padded input " +
                         shape_str(in.shape()));
    const int outH = detail::conv_out_dim(H, kH, stride, zero_pad);
    const int outW = detail::conv_out_dim(W, kW, stride, zero_pad);
    const int patch = C * kH * kW;
    const Eigen::Index plane = static_cast<Eigen::Index>(outH) * outW;

    Tensor<Scalar> out({N, O, outH, outW});
    {
        detail::DynMatrix<Scalar> col(patch, plane);
        auto kmat = k.matrix(O, patch);
        for (int n = 0; n < N; ++n) {
            detail::im2col(in.data() + static_cast<std::ptrdiff_t>(n) * C * H * W, C, H, W, kH, kW,
                           stride, zero_pad, outH, outW, col);
            auto omat = out.matrix(static_cast<Eigen::Index>(N) * O, plane)
                            .middleRows(static_cast<Eigen::Index>(n) * O, O);
            omat.noalias() = kmat * col;
            for (int o = 0; o < O; ++o) omat.row(o).array() += b[o];
        }
    }

    const int in_id = input.id, k_id = kernel.id, b_id = bias.id;
    return tape.record(
        std::move(out), {in_id, k_id, b_id},
        [=](Tape<Scalar>& t, int self) {
            const Tensor<Scalar>& gout = t.grad(self);
            const Tensor<Scalar>& inv = t.value(in_id);
            const Tensor<Scalar>& kv = t.value(k_id);
            Tensor<Scalar> din({N, C, H, W});
            Tensor<Scalar> dk(kv.shape());
            Tensor<Scalar> db({O});
            auto kmat = kv.matrix(O, patch);
            auto dkmat = dk.matrix(O, patch);
            detail::DynMatrix<Scalar> col(patch, plane);
            detail::DynMatrix<Scalar> dcol(patch, plane);
            for (int n = 0; n < N; ++n) {
                // the patch matrix is recomputed here instead of kept alive
                detail::im2col(inv.data() + static_cast<std::ptrdiff_t>(n) * C * H * W, C, H, W, kH,
                               kW, stride, zero_pad, outH, outW, col);
                auto gmat = gout.matrix(static_cast<Eigen::Index>(N) * O, plane)
                                .middleRows(static_cast<Eigen::Index>(n) * O, O);
                dkmat.noalias() += gmat * col.transpose();
                for (int o = 0; o < O; ++o) db[o] += gmat.row(o).sum();
                dcol.noalias() = kmat.transpose() * gmat;
                detail::col2im(dcol, C, H, W, kH, kW, stride, zero_pad, outH, outW,
                               din.data() + static_cast<std::ptrdiff_t>(n) * C * H * W);
            }
            t.accumulate(in_id, din);
            t.accumulate(k_id, dk);
            t.accumulate(b_id, db);
        });
}

template <typename Scalar>
Var<Scalar> maxpool2d(Var<Scalar> input, int window, int stride) {
    Tape<Scalar>& tape = *input.tape;
    const Tensor<Scalar>& in = input.value();
    detail::check_pool_args(in.shape(), window, stride, "maxpool2d");
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int outH = (H - window) / stride + 1;
    const int outW = (W - window) / stride + 1;
    Tensor<Scalar> out({N, C, outH, outW});
    std::vector<std::int32_t> arg(static_cast<std::size_t>(out.numel()));
    detail::maxpool_plane(in.data(), N * C, H, W, window, stride, outH, outW, out.data(), arg.data());

    const int in_id = input.id;
    return tape.record(std::move(out), {in_id},
                       [=, arg = std::move(arg)](Tape<Scalar>& t, int self) {
                           const Tensor<Scalar>& gout = t.grad(self);
                           Tensor<Scalar> din({N, C, H, W});
                           const Eigen::Index oplane = static_cast<Eigen::Index>(outH) * outW;
                           const Eigen::Index iplane = static_cast<Eigen::Index>(H) * W;
                           for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(N) * C; ++p)
                               for (Eigen::Index i = 0; i < oplane; ++i)
                                   din[p * iplane + arg[static_cast<std::size_t>(p * oplane + i)]] +=
                                       gout[p * oplane + i];
                           t.accumulate(in_id, din);
                       });
}

/// Anti-aliased pooling: max-pool at stride 1, normalized 3x3 binomial blur
/// (reflect borders), then subsampling every `subsample` pixels from offset 0.
template <typename Scalar>
Var<Scalar> blurpool2d(Var<Scalar> input, int window, int subsample) {
    Tape<Scalar>& tape = *input.tape;
    const Tensor<Scalar>& in = input.value();
    detail::check_pool_args(in.shape(), window, subsample, "blurpool2d");
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int H1 = H - window + 1, W1 = W - window + 1;
    const int outH = (H1 - 1) / subsample + 1;
    const int outW = (W1 - 1) / subsample + 1;
    const Eigen::Index planes = static_cast<Eigen::Index>(N) * C;

    std::vector<std::int32_t> arg(static_cast<std::size_t>(planes) * H1 * W1);
    Tensor<Scalar> mp({N, C, H1, W1});
    detail::maxpool_plane(in.data(), N * C, H, W, window, 1, H1, W1, mp.data(), arg.data());

    Tensor<Scalar> out({N, C, outH, outW});
    std::vector<Scalar> blurred(static_cast<std::size_t>(H1) * W1);
    for (Eigen::Index p = 0; p < planes; ++p) {
        detail::blur3(mp.data() + p * H1 * W1, blurred.data(), H1, W1);
        Scalar* oplane = out.data() + p * outH * outW;
        for (int oy = 0; oy < outH; ++oy)
            for (int ox = 0; ox < outW; ++ox)
                oplane[static_cast<std::ptrdiff_t>(oy) * outW + ox] =
                    blurred[static_cast<std::size_t>(oy) * subsample * W1 + static_cast<std::size_t>(ox) * subsample];
    }

    const int in_id = input.id;
    return tape.record(std::move(out), {in_id},
                       [=, arg = std::move(arg)](Tape<Scalar>& t, int self) {
                           const Tensor<Scalar>& gout = t.grad(self);
                           Tensor<Scalar> din({N, C, H, W});
                           std::vector<Scalar> dblur(static_cast<std::size_t>(H1) * W1);
                           std::vector<Scalar> dmp(static_cast<std::size_t>(H1) * W1);
                           const Eigen::Index oplane = static_cast<Eigen::Index>(outH) * outW;
                           const Eigen::Index mplane = static_cast<Eigen::Index>(H1) * W1;
                           const Eigen::Index iplane = static_cast<Eigen::Index>(H) * W;
                           for (Eigen::Index p = 0; p < planes; ++p) {
                               std::fill(dblur.begin(), dblur.end(), Scalar(0));
                               std::fill(dmp.begin(), dmp.end(), Scalar(0));
                               const Scalar* g = gout.data() + p * oplane;
                               for (int oy = 0; oy < outH; ++oy)
                                   for (int ox = 0; ox < outW; ++ox)
                                       dblur[static_cast<std::size_t>(oy) * subsample * W1 +
                                             static_cast<std::size_t>(ox) * subsample] +=
                                           g[static_cast<std::ptrdiff_t>(oy) * outW + ox];
                               detail::blur3_adjoint(dblur.data(), dmp.data(), H1, W1);
                               Scalar* dplane = din.data() + p * iplane;
                               const std::int32_t* aplane = arg.data() + p * mplane;
                               for (Eigen::Index i = 0; i < mplane; ++i)
                                   dplane[aplane[i]] += dmp[static_cast<std::size_t>(i)];
                           }
                           t.accumulate(in_id, din);
                       });
}

/// Per-channel running statistics owned by a batchnorm layer.
template <typename Scalar>
struct BatchNormState {
    Tensor<Scalar> running_mean;
    Tensor<Scalar> running_var;

    explicit BatchNormState(int channels = 0)
        : running_mean({channels}), running_var(Tensor<Scalar>::full({channels}, Scalar(1))) {}
};

/// Batch normalization over (N,H,W) per channel. Train mode normalizes by
/// batch statistics and updates `state` by EMA (running variance unbiased);
/// eval mode normalizes by the running statistics.
template <typename Scalar>
Var<Scalar> batchnorm(Var<Scalar> input, Var<Scalar> gamma, Var<Scalar> beta,
                      BatchNormState<Scalar>& state, bool train, Scalar momentum = Scalar(0.1),
                      Scalar eps = Scalar(1e-5)) {
    Tape<Scalar>& tape = *input.tape;
    const Tensor<Scalar>& in = input.value();
    require_rank(in, 4, "batchnorm input");
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    if (gamma.value().numel() != C || beta.value().numel() != C)
        throw ShapeError("batchnorm: gamma/beta length does not match channels");
    if (state.running_mean.numel() != C)
        throw ShapeError("batchnorm: running stats do not match channels");
    if (train && N < 2) throw ShapeError("batchnorm: train mode needs a batch of at least 2");

    const Eigen::Index m = static_cast<Eigen::Index>(N) * H * W;
    const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
    Tensor<Scalar> mean({C}), inv_std({C});
    const Tensor<Scalar>& g = gamma.value();
    const Tensor<Scalar>& bt = beta.value();

    if (train) {
        Tensor<Scalar> var({C});
        for (int c = 0; c < C; ++c) {
            Scalar s = 0, s2 = 0;
            for (int n = 0; n < N; ++n) {
                const Scalar* p = in.data() + (static_cast<Eigen::Index>(n) * C + c) * plane;
                for (Eigen::Index i = 0; i < plane; ++i) {
                    s += p[i];
                    s2 += p[i] * p[i];
                }
            }
            const Scalar mu = s / static_cast<Scalar>(m);
            Scalar v = s2 / static_cast<Scalar>(m) - mu * mu;
            if (v < 0) v = 0;  // guard accumulation round-off
            mean[c] = mu;
            var[c] = v;
            inv_std[c] = Scalar(1) / std::sqrt(v + eps);
        }
        const Scalar unbias = m > 1 ? static_cast<Scalar>(m) / static_cast<Scalar>(m - 1) : Scalar(1);
        state.running_mean.array() =
            (Scalar(1) - momentum) * state.running_mean.array() + momentum * mean.array();
        state.running_var.array() =
            (Scalar(1) - momentum) * state.running_var.array() + momentum * unbias * var.array();
    } else {
        for (int c = 0; c < C; ++c) {
            mean[c] = state.running_mean[c];
            inv_std[c] = Scalar(1) / std::sqrt(state.running_var[c] + eps);
        }
    }

    Tensor<Scalar> out(in.shape());
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const Scalar* p = in.data() + (static_cast<Eigen::Index>(n) * C + c) * plane;
            Scalar* q = out.data() + (static_cast<Eigen::Index>(n) * C + c) * plane;
            const Scalar a = g[c] * inv_std[c];
            const Scalar b = bt[c] - a * mean[c];
            for (Eigen::Index i = 0; i < plane; ++i) q[i] = a * p[i] + b;
        }

    const int in_id = input.id, g_id = gamma.id, b_id = beta.id;
    return tape.record(
        std::move(out), {in_id, g_id, b_id},
        [=](Tape<Scalar>& t, int self) {
            const Tensor<Scalar>& gout = t.grad(self);
            const Tensor<Scalar>& inv = t.value(in_id);
            const Tensor<Scalar>& gv = t.value(g_id);
            Tensor<Scalar> din(inv.shape());
            Tensor<Scalar> dgamma({C}), dbeta({C});
            for (int c = 0; c < C; ++c) {
                Scalar sum_g = 0, sum_gx = 0;
                for (int n = 0; n < N; ++n) {
                    const Scalar* go = gout.data() + (static_cast<Eigen::Index>(n) * C + c) * plane;
                    const Scalar* x = inv.data() + (static_cast<Eigen::Index>(n) * C + c) * plane;
                    for (Eigen::Index i = 0; i < plane; ++i) {
                        sum_g += go[i];
                        sum_gx += go[i] * (x[i] - mean[c]) * inv_std[c];
                    }
                }
                dbeta[c] = sum_g;
                dgamma[c] = sum_gx;
                const Scalar a = gv[c] * inv_std[c];
                for (int n = 0; n < N; ++n) {
                    const Scalar* go = gout.data() + (static_cast<Eigen::Index>(n) * C + c) * plane;
                    const Scalar* x = inv.data() + (static_cast<Eigen::Index>(n) * C + c) * plane;
                    Scalar* dx = din.data() + (static_cast<Eigen::Index>(n) * C + c) * plane;
                    if (train) {
                        for (Eigen::Index i = 0; i < plane; ++i) {
                            const Scalar xhat = (x[i] - mean[c]) * inv_std[c];
                            dx[i] = a * (go[i] - sum_g / static_cast<Scalar>(m) -
                                         xhat * sum_gx / static_cast<Scalar>(m));
                        }
                    } else {
                        for (Eigen::Index i = 0; i < plane; ++i) dx[i] = a * go[i];
                    }
                }
            }
            t.accumulate(in_id, din);
            t.accumulate(g_id, dgamma);
            t.accumulate(b_id, dbeta);
        });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> input) {
    Tape<Scalar>& tape = *input.tape;
    Tensor<Scalar> out = input.value();
    out.array() = out.array().max(Scalar(0));
    const int in_id = input.id;
    return tape.record(std::move(out), {in_id}, [=](Tape<Scalar>& t, int self) {
        const Tensor<Scalar>& gout = t.grad(self);
        const Tensor<Scalar>& inv = t.value(in_id);
        Tensor<Scalar> din(inv.shape());
        din.array() = (inv.array() > Scalar(0)).select(gout.array(), Scalar(0));
        t.accumulate(in_id, din);
    });
}

/// Spatial mean per channel: N*C*H*W -> N*C.
template <typename Scalar>
Var<Scalar> global_avg_pool(Var<Scalar> input) {
    Tape<Scalar>& tape = *input.tape;
    const Tensor<Scalar>& in = input.value();
    require_rank(in, 4, "global_avg_pool input");
    const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    if (H < 1 || W < 1) throw ShapeError("global_avg_pool: empty spatial dims");
    const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
    Tensor<Scalar> out({N, C});
    for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(N) * C; ++p) {
        const Scalar* src = in.data() + p * plane;
        Scalar s = 0;
        for (Eigen::Index i = 0; i < plane; ++i) s += src[i];
        out[p] = s / static_cast<Scalar>(plane);
    }
    const int in_id = input.id;
    return tape.record(std::move(out), {in_id}, [=](Tape<Scalar>& t, int self) {
        const Tensor<Scalar>& gout = t.grad(self);
        Tensor<Scalar> din({N, C, H, W});
        for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(N) * C; ++p) {
            const Scalar g = gout[p] / static_cast<Scalar>(plane);
            Scalar* dst = din.data() + p * plane;
            for (Eigen::Index i = 0; i < plane; ++i) dst[i] = g;
        }
        t.accumulate(in_id, din);
    });
}

/// N*... -> N*(product of the rest).
template <typename Scalar>
Var<Scalar> flatten(Var<Scalar> input) {
    Tape<Scalar>& tape = *input.tape;
    const Tensor<Scalar>& in = input.value();
    if (in.rank() < 2) throw ShapeError("flatten: expected rank >= 2, got " + shape_str(in.shape()));
    const int N = in.dim(0);
    const int rest = static_cast<int>(in.numel() / N);
    Tensor<Scalar> out = in.reshaped({N, rest});
    const int in_id = input.id;
    Shape in_shape = in.shape();
    return tape.record(std::move(out), {in_id}, [=](Tape<Scalar>& t, int self) {
        t.accumulate(in_id, t.grad(self).reshaped(in_shape));
    });
}

/// Affine map: input N*F, weight G*F, bias G -> N*G.
template <typename Scalar>
Var<Scalar> linear(Var<Scalar> input, Var<Scalar> weight, Var<Scalar> bias) {
    Tape<Scalar>& tape = *input.tape;
    const Tensor<Scalar>& in = input.value();
    const Tensor<Scalar>& w = weight.value();
    const Tensor<Scalar>& b = bias.value();
    require_rank(in, 2, "linear input");
    require_rank(w, 2, "linear weight");
    const int N = in.dim(0), F = in.dim(1), G = w.dim(0);
    if (w.dim(1) != F)
        throw ShapeError("linear: weight " + shape_str(w.shape()) + " does not match input " +
                         shape_str(in.shape()));
    if (b.numel() != G) throw ShapeError("linear: bias length does not match output features");

    Tensor<Scalar> out({N, G});
    out.matrix(N, G).noalias() = in.matrix(N, F) * w.matrix(G, F).transpose();
    for (int n = 0; n < N; ++n)
        for (int g = 0; g < G; ++g) out.at(n, g) += b[g];

    const int in_id = input.id, w_id = weight.id, b_id = bias.id;
    return tape.record(std::move(out), {in_id, w_id, b_id}, [=](Tape<Scalar>& t, int self) {
        const Tensor<Scalar>& gout = t.grad(self);
        const Tensor<Scalar>& inv = t.value(in_id);
        const Tensor<Scalar>& wv = t.value(w_id);
        Tensor<Scalar> din({N, F}), dw({G, F}), db({G});
        din.matrix(N, F).noalias() = gout.matrix(N, G) * wv.matrix(G, F);
        dw.matrix(G, F).noalias() = gout.matrix(N, G).transpose() * inv.matrix(N, F);
        for (int n = 0; n < N; ++n)
            for (int g = 0; g < G; ++g) db[g] += gout.at(n, g);
        t.accumulate(in_id, din);
        t.accumulate(w_id, dw);
        t.accumulate(b_id, db);
    });
}

/// Channel concatenation of rank-4 tensors with identical N,H,W.
template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    Tape<Scalar>& tape = *parts.front().tape;
    const Tensor<Scalar>& first = parts.front().value();
    require_rank(first, 4, "concat_channels input");
    const int N = first.dim(0), H = first.dim(2), W = first.dim(3);
    int C = 0;
    std::vector<int> parents;
    std::vector<int> widths;
    for (const auto& p : parts) {
        const Tensor<Scalar>& v = p.value();
        require_rank(v, 4, "concat_channels input");
        if (v.dim(0) != N || v.dim(2) != H || v.dim(3) != W)
            throw ShapeError("concat_channels: mismatched shapes " + shape_str(first.shape()) +
                             " vs " + shape_str(v.shape()));
        parents.push_back(p.id);
        widths.push_back(v.dim(1));
        C += v.dim(1);
    }
    const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
    Tensor<Scalar> out({N, C, H, W});
    for (int n = 0; n < N; ++n) {
        Eigen::Index coff = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const Tensor<Scalar>& v = parts[i].value();
            std::copy_n(v.data() + static_cast<Eigen::Index>(n) * widths[i] * plane,
                        static_cast<Eigen::Index>(widths[i]) * plane,
                        out.data() + (static_cast<Eigen::Index>(n) * C + coff) * plane);
            coff += widths[i];
        }
    }
    return tape.record(std::move(out), parents, [=](Tape<Scalar>& t, int self) {
        const Tensor<Scalar>& gout = t.grad(self);
        for (std::size_t i = 0; i < parents.size(); ++i) {
            Eigen::Index coff = 0;
            for (std::size_t j = 0; j < i; ++j) coff += widths[j];
            Tensor<Scalar> dpart({N, widths[i], H, W});
            for (int n = 0; n < N; ++n)
                std::copy_n(gout.data() + (static_cast<Eigen::Index>(n) * C + coff) * plane,
                            static_cast<Eigen::Index>(widths[i]) * plane,
                            dpart.data() + static_cast<Eigen::Index>(n) * widths[i] * plane);
            t.accumulate(parents[i], dpart);
        }
    });
}

/// Mean cross-entropy of softmax(logits) against integer labels,
/// max-subtracted for stability. Returns a scalar variable.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(Var<Scalar> logits, const std::vector<int>& labels) {
    Tape<Scalar>& tape = *logits.tape;
    const Tensor<Scalar>& z = logits.value();
    require_rank(z, 2, "softmax_cross_entropy logits");
    const int N = z.dim(0), K = z.dim(1);
    if (static_cast<int>(labels.size()) != N)
        throw ShapeError("softmax_cross_entropy: label count does not match batch");
    for (int lab : labels)
        if (lab < 0 || lab >= K)
            throw ConfigError("softmax_cross_entropy: label " + std::to_string(lab) +
                              " out of range [0," + std::to_string(K) + ")");

    Tensor<Scalar> probs({N, K});
    Scalar loss = 0;
    for (int n = 0; n < N; ++n) {
        const Scalar* row = z.data() + static_cast<Eigen::Index>(n) * K;
        Scalar mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        Scalar sum = 0;
        for (int k = 0; k < K; ++k) {
            const Scalar e = std::exp(row[k] - mx);
            probs.at(n, k) = e;
            sum += e;
        }
        for (int k = 0; k < K; ++k) probs.at(n, k) /= sum;
        loss += std::log(sum) - (row[labels[static_cast<std::size_t>(n)]] - mx);
    }
    loss /= static_cast<Scalar>(N);

    const int z_id = logits.id;
    return tape.record(Tensor<Scalar>::scalar(loss), {z_id},
                       [=, probs = std::move(probs), labels = labels](Tape<Scalar>& t, int self) {
                           const Scalar g = t.grad(self)[0] / static_cast<Scalar>(N);
                           Tensor<Scalar> dz({N, K});
                           for (int n = 0; n < N; ++n)
                               for (int k = 0; k < K; ++k)
                                   dz.at(n, k) =
                                       g * (probs.at(n, k) -
                                            (labels[static_cast<std::size_t>(n)] == k ? Scalar(1) : Scalar(0)));
                           t.accumulate(z_id, dz);
                       });
}

/// Sum of all elements, as a scalar variable.
template <typename Scalar>
Var<Scalar> sum(Var<Scalar> input) {
    Tape<Scalar>& tape = *input.tape;
    const int in_id = input.id;
    Shape in_shape = input.value().shape();
    return tape.record(Tensor<Scalar>::scalar(input.value().array().sum()), {in_id},
                       [=](Tape<Scalar>& t, int self) {
                           const Scalar g = t.grad(self)[0];
                           t.accumulate(in_id, Tensor<Scalar>::full(in_shape, g));
                       });
}

/// Argmax per row with lowest-index tie break.
template <typename Scalar>
std::vector<int> argmax_rows(const Tensor<Scalar>& t) {
    require_rank(t, 2, "argmax_rows");
    const int N = t.dim(0), K = t.dim(1);
    std::vector<int> out(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        int best = 0;
        for (int k = 1; k < K; ++k)
            if (t.at(n, k) > t.at(n, best)) best = k;
        out[static_cast<std::size_t>(n)] = best;
    }
    return out;
}

}  // namespace shiftlab
