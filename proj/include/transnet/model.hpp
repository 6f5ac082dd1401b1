#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "transnet/dihedral.hpp"
#include "transnet/ops.hpp"
#include "transnet/rng.hpp"
#include "transnet/tensor.hpp"

// The base CNN (conv stack -> GAP -> fully-connected) and its multi-head
// TransNet extension. Each head is an independent FC layer fed by the shared
// backbone and associated with one input transformation; head j classifies
// inputs pre-transformed by transforms[j].

namespace transnet {

struct ConvLayer {
    Tensor kernels;  // C_out x C_in x k x k
    Tensor bias;     // C_out
    bool relu_after = true;
    bool pool_after = false;
};

struct Head {
    Tensor weight;  // K x C_last
    Tensor bias;    // K
};

struct ModelParams {
    std::vector<ConvLayer> conv_layers;
    std::vector<Head> heads;
};

inline void validate_params(const ModelParams& p) {
    if (p.conv_layers.empty()) throw input_error("model must have at least one conv layer");
    if (p.heads.empty()) throw input_error("model must have at least one head");
    int channels = p.conv_layers.front().kernels.dim(1);
    for (std::size_t l = 0; l < p.conv_layers.size(); ++l) {
        const ConvLayer& cl = p.conv_layers[l];
        check_rank(cl.kernels, 4, "conv layer kernels");
        check_rank(cl.bias, 1, "conv layer bias");
        if (cl.kernels.dim(1) != channels)
            throw shape_error("conv layer " + std::to_string(l) + " expects " +
                              std::to_string(cl.kernels.dim(1)) + " input channels, previous layer provides " +
                              std::to_string(channels));
        if (cl.bias.dim(0) != cl.kernels.dim(0))
            throw shape_error("conv layer " + std::to_string(l) + ": bias/out-channel mismatch");
        channels = cl.kernels.dim(0);
    }
    const Head& h0 = p.heads.front();
    for (const Head& h : p.heads) {
        check_rank(h.weight, 2, "head weight");
        check_rank(h.bias, 1, "head bias");
        if (h.weight.dim(1) != channels)
            throw shape_error("head expects " + std::to_string(h.weight.dim(1)) +
                              " features, backbone provides " + std::to_string(channels));
        if (h.weight.shape != h0.weight.shape || h.bias.shape != h0.bias.shape)
            throw shape_error("all heads must have identical shape");
        if (h.bias.dim(0) != h.weight.dim(0))
            throw shape_error("head bias/row mismatch");
    }
}

struct TransNetModel {
    ModelParams params;
    TransformationSet transforms;  // one element per head
};

inline void validate_model(const TransNetModel& m) {
    validate_params(m.params);
    if (m.params.heads.size() != m.transforms.size())
        throw input_error("model must have one transformation per head");
}

/// Architecture descriptor used for construction and checkpoints.
struct ArchSpec {
    struct Layer {
        int out_channels = 0;
        int kernel_size = 3;
        bool relu_after = true;
        bool pool_after = false;
    };
    int in_channels = 3;
    int num_classes = 10;
    std::vector<Layer> layers;
};

/// Desk-scale default: 4 conv layers (32, 64, 128, 128 channels, 3x3, ReLU),
/// pooling after layers 1 and 2, GAP, heads.
inline ArchSpec default_arch(int in_channels = 3, int num_classes = 10) {
    ArchSpec a;
    a.in_channels = in_channels;
    a.num_classes = num_classes;
    a.layers = {{32, 3, true, true}, {64, 3, true, true}, {128, 3, true, false}, {128, 3, true, false}};
    return a;
}

/// Kernels and FC weights drawn uniformly from +-1/sqrt(fan_in), biases zero.
inline ModelParams init_params(const ArchSpec& arch, int num_heads, Rng& rng) {
    if (num_heads < 1) throw input_error("init_params: need at least one head");
    if (arch.layers.empty()) throw input_error("init_params: architecture has no conv layers");
    ModelParams p;
    int channels = arch.in_channels;
    for (const ArchSpec::Layer& spec : arch.layers) {
        ConvLayer cl;
        cl.kernels = Tensor({spec.out_channels, channels, spec.kernel_size, spec.kernel_size});
        const double bound = 1.0 / std::sqrt(static_cast<double>(channels) * spec.kernel_size * spec.kernel_size);
        for (double& v : cl.kernels.data) v = rng.uniform(-bound, bound);
        cl.bias = Tensor({spec.out_channels});
        cl.relu_after = spec.relu_after;
        cl.pool_after = spec.pool_after;
        p.conv_layers.push_back(std::move(cl));
        channels = spec.out_channels;
    }
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(channels));
    for (int h = 0; h < num_heads; ++h) {
        Head head;
        head.weight = Tensor({arch.num_classes, channels});
        for (double& v : head.weight.data) v = rng.uniform(-head_bound, head_bound);
        head.bias = Tensor({arch.num_classes});
        p.heads.push_back(std::move(head));
    }
    validate_params(p);
    return p;
}

inline TransNetModel make_model(const ArchSpec& arch, TransformationSet transforms, Rng& rng) {
    TransNetModel m{init_params(arch, static_cast<int>(transforms.size()), rng), std::move(transforms)};
    validate_model(m);
    return m;
}

inline ArchSpec arch_of(const TransNetModel& m) {
    ArchSpec a;
    a.in_channels = m.params.conv_layers.front().kernels.dim(1);
    a.num_classes = m.params.heads.front().weight.dim(0);
    for (const ConvLayer& cl : m.params.conv_layers)
        a.layers.push_back({cl.kernels.dim(0), cl.kernels.dim(2), cl.relu_after, cl.pool_after});
    return a;
}

/// t acts on every convolutional kernel's spatial slice; conv biases and the
/// fully-connected heads are untouched.
inline ModelParams apply_to_params(DihedralElement t, const ModelParams& p) {
    ModelParams out = p;
    for (ConvLayer& cl : out.conv_layers) cl.kernels = apply_spatial(t, cl.kernels);
    return out;
}

/// Compiles input transformation t into the weights: h_params(t(x)) equals
/// h_{compile(params, t)}(x) because the last conv layer feeds GAP, which is
/// dihedral-invariant.
inline ModelParams compile_transformation(const ModelParams& p, DihedralElement t) {
    return apply_to_params(inverse(t), p);
}

struct ForwardTrace {
    std::vector<Tensor> conv_inputs;           // input fed to each conv layer
    std::vector<Tensor> preacts;               // conv output before ReLU (empty tensor when no ReLU)
    std::vector<std::pair<int, int>> pool_dims;  // spatial size fed into pooling (0,0 when none)
    int gap_h = 0, gap_w = 0;
    Tensor features;                           // GAP output
};

/// Shared backbone f: conv stack + GAP. Returns the feature vector.
inline Tensor forward_backbone(const ModelParams& p, const Tensor& x, ForwardTrace* trace = nullptr) {
    check_rank(x, 3, "model input");
    Tensor cur = x;
    for (const ConvLayer& cl : p.conv_layers) {
        if (trace) trace->conv_inputs.push_back(cur);
        Tensor z = conv2d_forward(cur, cl.kernels, cl.bias);
        if (cl.relu_after) {
            if (trace) trace->preacts.push_back(z);
            z = relu_forward(z);
        } else if (trace) {
            trace->preacts.emplace_back();
        }
        if (cl.pool_after) {
            if (trace) trace->pool_dims.emplace_back(z.dim(1), z.dim(2));
            z = avgpool2x2_forward(z);
        } else if (trace) {
            trace->pool_dims.emplace_back(0, 0);
        }
        cur = std::move(z);
    }
    Tensor feats = gap_forward(cur);
    if (trace) {
        trace->gap_h = cur.dim(1);
        trace->gap_w = cur.dim(2);
        trace->features = feats;
    }
    return feats;
}

/// Logits of one head on an input the caller has already transformed.
inline Tensor forward_head(const TransNetModel& m, int head_index, const Tensor& x,
                           ForwardTrace* trace = nullptr) {
    if (head_index < 0 || head_index >= static_cast<int>(m.params.heads.size()))
        throw input_error("forward_head: head index " + std::to_string(head_index) +
                          " out of range");
    const Tensor feats = forward_backbone(m.params, x, trace);
    const Head& h = m.params.heads[static_cast<std::size_t>(head_index)];
    return fc_forward(feats, h.weight, h.bias);
}

inline Tensor softmax(const Tensor& logits) {
    double zmax = logits.data[0];
    for (double v : logits.data) zmax = std::max(zmax, v);
    Tensor p = logits;
    double sum = 0.0;
    for (double& v : p.data) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : p.data) v /= sum;
    return p;
}

/// Mean over heads j of head j applied to transforms[j](x): the Tm-CNN
/// predictor. Averages logits by default; probabilities when
/// average_probabilities is set.
inline Tensor forward_full(const TransNetModel& m, const Tensor& x,
                           bool average_probabilities = false) {
    const int nheads = static_cast<int>(m.params.heads.size());
    std::vector<Tensor> outs;
    outs.reserve(static_cast<std::size_t>(nheads));
    for (int j = 0; j < nheads; ++j) {
        Tensor o = forward_head(m, j, apply_spatial(m.transforms[static_cast<std::size_t>(j)], x));
        if (average_probabilities) o = softmax(o);
        outs.push_back(std::move(o));
    }
    const int k = outs.front().dim(0);
    Tensor mean({k});
    std::vector<double> vals(static_cast<std::size_t>(nheads));
    for (int c = 0; c < k; ++c) {
        for (int j = 0; j < nheads; ++j) vals[static_cast<std::size_t>(j)] = outs[static_cast<std::size_t>(j)](c);
        mean(c) = pairwise_sum(vals) / nheads;
    }
    return mean;
}

/// Test-time protocol: mean of the model's output on the original image and
/// a horizontally flipped version.
inline Tensor predict_with_flip_averaging(const TransNetModel& m, const Tensor& x,
                                          bool average_probabilities = false) {
    const Tensor a = forward_full(m, x, average_probabilities);
    const Tensor b = forward_full(m, apply_spatial(kHorizontalFlip, x), average_probabilities);
    Tensor out({a.dim(0)});
    for (int i = 0; i < a.dim(0); ++i) out(i) = 0.5 * (a(i) + b(i));
    return out;
}

/// Keeps one head. With compile set, the kept head's transformation is
/// folded into the kernels so the result consumes untransformed inputs;
/// the pruned model is architecturally identical to the base CNN.
inline TransNetModel prune(const TransNetModel& m, int keep_head, bool compile) {
    if (keep_head < 0 || keep_head >= static_cast<int>(m.params.heads.size()))
        throw input_error("prune: head index " + std::to_string(keep_head) + " out of range");
    TransNetModel out;
    const DihedralElement t = m.transforms[static_cast<std::size_t>(keep_head)];
    if (compile && !(t == kIdentity)) {
        out.params.conv_layers = compile_transformation(m.params, t).conv_layers;
        out.transforms = {kIdentity};
    } else {
        out.params.conv_layers = m.params.conv_layers;
        out.transforms = {compile ? kIdentity : t};
    }
    out.params.heads = {m.params.heads[static_cast<std::size_t>(keep_head)]};
    return out;
}

inline std::int64_t count_parameters(const ModelParams& p) {
    std::int64_t n = 0;
    for (const ConvLayer& cl : p.conv_layers)
        n += static_cast<std::int64_t>(cl.kernels.numel()) + static_cast<std::int64_t>(cl.bias.numel());
    for (const Head& h : p.heads)
        n += static_cast<std::int64_t>(h.weight.numel()) + static_cast<std::int64_t>(h.bias.numel());
    return n;
}

inline std::int64_t count_parameters(const TransNetModel& m) { return count_parameters(m.params); }

/// Extra parameters added per head: K x C_last + K.
inline std::int64_t per_head_overhead(const ModelParams& p) {
    const Head& h = p.heads.front();
    return static_cast<std::int64_t>(h.weight.numel()) + static_cast<std::int64_t>(h.bias.numel());
}

/// Multiply-accumulate count of one forward evaluation (conv + FC heads),
/// used for the time-complexity audit of pruned models.
inline std::int64_t count_forward_macs(const ModelParams& p, int input_size) {
    std::int64_t macs = 0;
    int size = input_size;
    for (const ConvLayer& cl : p.conv_layers) {
        const std::int64_t per_pos = static_cast<std::int64_t>(cl.kernels.dim(1)) *
                                     cl.kernels.dim(2) * cl.kernels.dim(3);
        macs += static_cast<std::int64_t>(size) * size * cl.kernels.dim(0) * per_pos;
        if (cl.pool_after) size /= 2;
    }
    for (const Head& h : p.heads) macs += static_cast<std::int64_t>(h.weight.numel());
    return macs;
}

/// Gradient accumulator mirroring ModelParams.
struct ParamGrads {
    struct LayerGrads {
        Tensor kernels, bias;
    };
    struct HeadGrads {
        Tensor weight, bias;
    };
    std::vector<LayerGrads> conv_layers;
    std::vector<HeadGrads> heads;

    static ParamGrads zeros_like(const ModelParams& p) {
        ParamGrads g;
        for (const ConvLayer& cl : p.conv_layers)
            g.conv_layers.push_back({Tensor(cl.kernels.shape), Tensor(cl.bias.shape)});
        for (const Head& h : p.heads)
            g.heads.push_back({Tensor(h.weight.shape), Tensor(h.bias.shape)});
        return g;
    }

    void add(const ParamGrads& o) {
        for (std::size_t l = 0; l < conv_layers.size(); ++l) {
            for (std::size_t i = 0; i < conv_layers[l].kernels.data.size(); ++i)
                conv_layers[l].kernels.data[i] += o.conv_layers[l].kernels.data[i];
            for (std::size_t i = 0; i < conv_layers[l].bias.data.size(); ++i)
                conv_layers[l].bias.data[i] += o.conv_layers[l].bias.data[i];
        }
        for (std::size_t h = 0; h < heads.size(); ++h) {
            for (std::size_t i = 0; i < heads[h].weight.data.size(); ++i)
                heads[h].weight.data[i] += o.heads[h].weight.data[i];
            for (std::size_t i = 0; i < heads[h].bias.data.size(); ++i)
                heads[h].bias.data[i] += o.heads[h].bias.data[i];
        }
    }

    void scale(double s) {
        for (LayerGrads& lg : conv_layers) {
            for (double& v : lg.kernels.data) v *= s;
            for (double& v : lg.bias.data) v *= s;
        }
        for (HeadGrads& hg : heads) {
            for (double& v : hg.weight.data) v *= s;
            for (double& v : hg.bias.data) v *= s;
        }
    }
};

/// Backpropagates grad_logits through head head_index and the backbone,
/// accumulating into grads (+=). The trace must come from the forward pass
/// of the same input.
inline void backward_head(const ModelParams& p, int head_index, const ForwardTrace& trace,
                          const Tensor& grad_logits, ParamGrads& grads) {
    const Head& h = p.heads[static_cast<std::size_t>(head_index)];
    FcGrads fg = fc_backward(trace.features, h.weight, grad_logits);
    {
        ParamGrads::HeadGrads& hg = grads.heads[static_cast<std::size_t>(head_index)];
        for (std::size_t i = 0; i < fg.grad_weight.data.size(); ++i)
            hg.weight.data[i] += fg.grad_weight.data[i];
        for (std::size_t i = 0; i < fg.grad_bias.data.size(); ++i)
            hg.bias.data[i] += fg.grad_bias.data[i];
    }
    Tensor grad = gap_backward(trace.gap_h, trace.gap_w, fg.grad_input);
    for (int l = static_cast<int>(p.conv_layers.size()) - 1; l >= 0; --l) {
        const ConvLayer& cl = p.conv_layers[static_cast<std::size_t>(l)];
        if (cl.pool_after) {
            const auto [ph, pw] = trace.pool_dims[static_cast<std::size_t>(l)];
            grad = avgpool2x2_backward(ph, pw, grad);
        }
        if (cl.relu_after) grad = relu_backward(trace.preacts[static_cast<std::size_t>(l)], grad);
        Conv2dGrads cg = conv2d_backward(trace.conv_inputs[static_cast<std::size_t>(l)], cl.kernels, grad);
        ParamGrads::LayerGrads& lg = grads.conv_layers[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < cg.grad_kernels.data.size(); ++i)
            lg.kernels.data[i] += cg.grad_kernels.data[i];
        for (std::size_t i = 0; i < cg.grad_bias.data.size(); ++i)
            lg.bias.data[i] += cg.grad_bias.data[i];
        grad = std::move(cg.grad_input);
    }
}

}  // namespace transnet
