#pragma once

#include <cmath>
#include <functional>

#include "transnet/rng.hpp"
#include "transnet/tensor.hpp"

// Independent oracles for the numeric tests. Everything here recomputes
// results from first principles and must not share code with the library
// paths it checks.

namespace testutil {

using transnet::Rng;
using transnet::Tensor;

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

/// Brute-force cross-correlation with "same" zero padding and stride 1:
/// a direct five-loop transcription of the definition.
inline Tensor naive_conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = kernels.dim(0), ks = kernels.dim(2), pad = (ks - 1) / 2;
    Tensor out({c_out, h, w});
    for (int co = 0; co < c_out; ++co)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = bias(co);
                for (int ci = 0; ci < c_in; ++ci)
                    for (int ky = 0; ky < ks; ++ky)
                        for (int kx = 0; kx < ks; ++kx) {
                            const int iy = y + ky - pad;
                            const int ix = x + kx - pad;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += kernels(co, ci, ky, kx) * input(ci, iy, ix);
                        }
                out(co, y, x) = acc;
            }
    return out;
}

/// Central finite differences of a scalar function with respect to one
/// tensor argument. step defaults to the spec'd 1e-5.
inline Tensor finite_difference_grad(Tensor& arg, const std::function<double()>& loss,
                                     double step = 1e-5) {
    Tensor grad(arg.shape);
    for (std::size_t i = 0; i < arg.data.size(); ++i) {
        const double orig = arg.data[i];
        arg.data[i] = orig + step;
        const double up = loss();
        arg.data[i] = orig - step;
        const double down = loss();
        arg.data[i] = orig;
        grad.data[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

/// Worst relative error between an analytic gradient and its
/// finite-difference estimate, guarded against tiny denominators.
inline double max_rel_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-4) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.data.size(); ++i) {
        const double denom = std::max({std::abs(analytic.data[i]), std::abs(numeric.data[i]), floor});
        worst = std::max(worst, std::abs(analytic.data[i] - numeric.data[i]) / denom);
    }
    return worst;
}

}  // namespace testutil
