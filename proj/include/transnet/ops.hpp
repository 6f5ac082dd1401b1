#pragma once

#include <algorithm>
#include <cmath>

#include "transnet/tensor.hpp"

// Differentiable primitives the model is composed of: 2D cross-correlation
// with "same" zero padding and stride 1, non-overlapping 2x2 average pooling,
// global average pooling, a fully-connected map, ReLU, and softmax
// cross-entropy. Stride-1 odd-kernel "same" convolution and mean pooling are
// the variants that commute exactly with the dihedral transforms; see
// dihedral.hpp.

namespace transnet {

namespace detail {

inline void check_conv_shapes(const Tensor& input, const Tensor& kernels, const Tensor* bias) {
    check_rank(input, 3, "conv2d input");
    check_rank(kernels, 4, "conv2d kernels");
    if (input.dim(1) != input.dim(2))
        throw shape_error("conv2d: input spatial dims must be square, got " + input.shape_str());
    if (kernels.dim(2) != kernels.dim(3))
        throw shape_error("conv2d: kernel spatial dims must be square, got " + kernels.shape_str());
    if (kernels.dim(2) % 2 == 0)
        throw shape_error("conv2d: kernel size must be odd, got " + std::to_string(kernels.dim(2)));
    if (kernels.dim(1) != input.dim(0))
        throw shape_error("conv2d: kernel in-channels " + std::to_string(kernels.dim(1)) +
                          " do not match input channels " + std::to_string(input.dim(0)));
    if (bias) {
        check_rank(*bias, 1, "conv2d bias");
        if (bias->dim(0) != kernels.dim(0))
            throw shape_error("conv2d: bias length does not match out-channels");
    }
}

}  // namespace detail

/// Cross-correlation with zero "same" padding, stride 1, per-channel bias.
/// input: C_in x H x W (H == W), kernels: C_out x C_in x k x k (k odd).
inline Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    detail::check_conv_shapes(input, kernels, &bias);
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = kernels.dim(0), ks = kernels.dim(2), pad = (ks - 1) / 2;

    Tensor out({c_out, h, w});
    for (int co = 0; co < c_out; ++co) {
        double* out_ch = &out(co, 0, 0);
        const double b = bias(co);
        for (int i = 0; i < h * w; ++i) out_ch[i] = b;
        for (int ci = 0; ci < c_in; ++ci) {
            const double* in_ch = &input(ci, 0, 0);
            for (int ky = 0; ky < ks; ++ky) {
                const int dy = ky - pad;
                const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                for (int kx = 0; kx < ks; ++kx) {
                    const double wk = kernels(co, ci, ky, kx);
                    if (wk == 0.0) continue;
                    const int dx = kx - pad;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    for (int y = y0; y < y1; ++y) {
                        const double* in_row = in_ch + (y + dy) * w + (x0 + dx);
                        double* out_row = out_ch + y * w + x0;
                        for (int i = 0; i < x1 - x0; ++i) out_row[i] += wk * in_row[i];
                    }
                }
            }
        }
    }
    return out;
}

struct Conv2dGrads {
    Tensor grad_input;
    Tensor grad_kernels;
    Tensor grad_bias;
};

/// Exact adjoint of conv2d_forward.
inline Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels,
                                   const Tensor& grad_out) {
    detail::check_conv_shapes(input, kernels, nullptr);
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = kernels.dim(0), ks = kernels.dim(2), pad = (ks - 1) / 2;
    if (grad_out.shape != std::vector<int>{c_out, h, w})
        throw shape_error("conv2d_backward: grad_out shape " + grad_out.shape_str() +
                          " does not match forward output");

    Conv2dGrads g{Tensor({c_in, h, w}), Tensor({c_out, c_in, ks, ks}), Tensor({c_out})};
    // separate reduction (grad_kernels) and scatter (grad_input) passes; the
    // reduction accumulates elementwise into a scratch row first so the
    // inner loops vectorize without reassociating a single scalar chain
    std::vector<double> scratch(static_cast<std::size_t>(w));
    for (int co = 0; co < c_out; ++co) {
        const double* go_ch = &grad_out(co, 0, 0);
        double acc = 0.0;
        for (int i = 0; i < h * w; ++i) acc += go_ch[i];
        g.grad_bias(co) = acc;

        for (int ci = 0; ci < c_in; ++ci) {
            const double* in_ch = &input(ci, 0, 0);
            double* gi_ch = &g.grad_input(ci, 0, 0);
            for (int ky = 0; ky < ks; ++ky) {
                const int dy = ky - pad;
                const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                for (int kx = 0; kx < ks; ++kx) {
                    const int dx = kx - pad;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    const int n = x1 - x0;
                    std::fill(scratch.begin(), scratch.begin() + n, 0.0);
                    for (int y = y0; y < y1; ++y) {
                        const double* in_row = in_ch + (y + dy) * w + (x0 + dx);
                        const double* go_row = go_ch + y * w + x0;
                        for (int i = 0; i < n; ++i) scratch[static_cast<std::size_t>(i)] += go_row[i] * in_row[i];
                    }
                    double gw = 0.0;
                    for (int i = 0; i < n; ++i) gw += scratch[static_cast<std::size_t>(i)];
                    g.grad_kernels(co, ci, ky, kx) = gw;

                    const double wk = kernels(co, ci, ky, kx);
                    if (wk == 0.0) continue;
                    for (int y = y0; y < y1; ++y) {
                        double* gi_row = gi_ch + (y + dy) * w + (x0 + dx);
                        const double* go_row = go_ch + y * w + x0;
                        for (int i = 0; i < n; ++i) gi_row[i] += wk * go_row[i];
                    }
                }
            }
        }
    }
    return g;
}

/// Mean over non-overlapping 2x2 blocks. The block sum is ordered as
/// (a+d)+(b+c) over the two diagonals, which every dihedral element either
/// preserves or swaps, so pooling commutes with the group bitwise.
inline Tensor avgpool2x2_forward(const Tensor& input) {
    check_rank(input, 3, "avgpool2x2 input");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (h % 2 != 0 || w % 2 != 0)
        throw shape_error("avgpool2x2: spatial extents must be even, got " + input.shape_str());
    Tensor out({c, h / 2, w / 2});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h / 2; ++y)
            for (int x = 0; x < w / 2; ++x) {
                const double a = input(ch, 2 * y, 2 * x);
                const double b = input(ch, 2 * y, 2 * x + 1);
                const double cc = input(ch, 2 * y + 1, 2 * x);
                const double d = input(ch, 2 * y + 1, 2 * x + 1);
                out(ch, y, x) = ((a + d) + (b + cc)) * 0.25;
            }
    return out;
}

inline Tensor avgpool2x2_backward(int in_h, int in_w, const Tensor& grad_out) {
    check_rank(grad_out, 3, "avgpool2x2 grad_out");
    const int c = grad_out.dim(0);
    if (grad_out.dim(1) * 2 != in_h || grad_out.dim(2) * 2 != in_w)
        throw shape_error("avgpool2x2_backward: grad_out does not match input size");
    Tensor g({c, in_h, in_w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < in_h / 2; ++y)
            for (int x = 0; x < in_w / 2; ++x) {
                const double v = grad_out(ch, y, x) * 0.25;
                g(ch, 2 * y, 2 * x) = v;
                g(ch, 2 * y, 2 * x + 1) = v;
                g(ch, 2 * y + 1, 2 * x) = v;
                g(ch, 2 * y + 1, 2 * x + 1) = v;
            }
    return g;
}

/// Per-channel spatial mean (pairwise summation).
inline Tensor gap_forward(const Tensor& input) {
    check_rank(input, 3, "gap input");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    Tensor out({c});
    const double denom = static_cast<double>(h) * w;
    for (int ch = 0; ch < c; ++ch) {
        std::span<const double> slice(&input(ch, 0, 0), static_cast<std::size_t>(h) * w);
        out(ch) = pairwise_sum(slice) / denom;
    }
    return out;
}

inline Tensor gap_backward(int in_h, int in_w, const Tensor& grad_out) {
    check_rank(grad_out, 1, "gap grad_out");
    const int c = grad_out.dim(0);
    Tensor g({c, in_h, in_w});
    const double denom = static_cast<double>(in_h) * in_w;
    for (int ch = 0; ch < c; ++ch) {
        const double v = grad_out(ch) / denom;
        double* row = &g(ch, 0, 0);
        for (int i = 0; i < in_h * in_w; ++i) row[i] = v;
    }
    return g;
}

/// weight (K x C) * input (C) + bias (K).
inline Tensor fc_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    check_rank(input, 1, "fc input");
    check_rank(weight, 2, "fc weight");
    check_rank(bias, 1, "fc bias");
    const int k = weight.dim(0), c = weight.dim(1);
    if (input.dim(0) != c)
        throw shape_error("fc: input length " + std::to_string(input.dim(0)) +
                          " does not match weight columns " + std::to_string(c));
    if (bias.dim(0) != k) throw shape_error("fc: bias length does not match weight rows");
    Tensor out({k});
    for (int i = 0; i < k; ++i) {
        const double* wr = &weight(i, 0);
        double acc = bias(i);
        for (int j = 0; j < c; ++j) acc += wr[j] * input(j);
        out(i) = acc;
    }
    return out;
}

struct FcGrads {
    Tensor grad_input;
    Tensor grad_weight;
    Tensor grad_bias;
};

inline FcGrads fc_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out) {
    const int k = weight.dim(0), c = weight.dim(1);
    if (grad_out.shape != std::vector<int>{k})
        throw shape_error("fc_backward: grad_out shape mismatch");
    FcGrads g{Tensor({c}), Tensor({k, c}), Tensor({k})};
    for (int i = 0; i < k; ++i) {
        const double go = grad_out(i);
        g.grad_bias(i) = go;
        const double* wr = &weight(i, 0);
        double* gwr = &g.grad_weight(i, 0);
        for (int j = 0; j < c; ++j) {
            gwr[j] = go * input(j);
            g.grad_input(j) += wr[j] * go;
        }
    }
    return g;
}

inline Tensor relu_forward(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

/// Needs the pre-activation input for the mask.
inline Tensor relu_backward(const Tensor& preact, const Tensor& grad_out) {
    if (!preact.same_shape(grad_out)) throw shape_error("relu_backward: shape mismatch");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (preact.data[i] <= 0.0) g.data[i] = 0.0;
    return g;
}

struct SoftmaxCrossEntropy {
    double loss;
    Tensor grad_logits;  // softmax - one_hot(label)
};

inline SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, int label) {
    check_rank(logits, 1, "softmax_cross_entropy logits");
    const int k = logits.dim(0);
    if (label < 0 || label >= k)
        throw input_error("softmax_cross_entropy: label " + std::to_string(label) +
                          " out of range [0, " + std::to_string(k) + ")");
    double zmax = logits(0);
    for (int i = 1; i < k; ++i) zmax = std::max(zmax, logits(i));
    double sum = 0.0;
    Tensor g({k});
    for (int i = 0; i < k; ++i) {
        g(i) = std::exp(logits(i) - zmax);
        sum += g(i);
    }
    const double loss = std::log(sum) - (logits(label) - zmax);
    const double inv = 1.0 / sum;
    for (int i = 0; i < k; ++i) g(i) *= inv;
    g(label) -= 1.0;
    return {loss, g};
}

}  // namespace transnet
