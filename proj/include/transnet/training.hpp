#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "transnet/dataset.hpp"
#include "transnet/model.hpp"
#include "transnet/threading.hpp"

// The TransNet training loop: SGD with momentum / weight decay / step-decay
// schedule minimizing the transformation loss
//   L_T(h_T, B) = (1/m) sum_t (1/b) sum_k ce(h_t, t(x_k), y_k).
// Gradients are accumulated per sample and reduced in a fixed order, so a
// run is bitwise reproducible for any worker count.

namespace transnet {

class training_diverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TrainMode { base, transnet, single_head, arch_only };

inline std::string mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::base: return "base";
        case TrainMode::transnet: return "transnet";
        case TrainMode::single_head: return "single-head";
        case TrainMode::arch_only: return "arch-only";
    }
    return "?";
}

inline TrainMode parse_mode(const std::string& s) {
    for (TrainMode m : {TrainMode::base, TrainMode::transnet, TrainMode::single_head,
                        TrainMode::arch_only})
        if (mode_name(m) == s) return m;
    throw input_error("unknown training mode: '" + s + "'");
}

struct AugmentConfig {
    double horizontal_flip_prob = 0.5;
    int pad_crop = 4;  // zero-pad each border then crop back at a random offset
};

struct TrainingConfig {
    int batch_size = 64;
    int epochs = 60;
    double learning_rate = 0.05;
    std::vector<int> lr_milestones = {30, 45};  // lr *= lr_decay once this many epochs completed
    double lr_decay = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    bool decay_biases = true;
    std::uint64_t seed = 1;
    TrainMode mode = TrainMode::base;
    int heads = 1;  // m; forced to 1 for base and 2 for arch-only
    AugmentConfig augment;
    bool average_probabilities = false;  // head averaging on probabilities instead of logits
    bool flip_eval = true;               // test-time horizontal-flip averaging for final metrics

    void validate() const {
        if (batch_size < 1) throw input_error("batch_size must be >= 1");
        if (epochs < 0) throw input_error("epochs must be >= 0");
        if (learning_rate <= 0.0) throw input_error("learning_rate must be > 0");
        for (std::size_t i = 1; i < lr_milestones.size(); ++i)
            if (lr_milestones[i] <= lr_milestones[i - 1])
                throw input_error("lr_milestones must be strictly increasing");
        if (heads < 1 || heads > 4) throw input_error("heads must be in [1, 4]");
    }

    double lr_at_epoch(int epoch) const {
        double lr = learning_rate;
        for (int m : lr_milestones)
            if (epoch >= m) lr *= lr_decay;
        return lr;
    }
};

/// Head transformations implied by the mode: base {id}; transnet the first m
/// rotations; arch-only the {id, id} multi-set; single-head one identity
/// head (its loss averages over the rotations separately).
inline TransformationSet transforms_for_mode(TrainMode mode, int heads) {
    switch (mode) {
        case TrainMode::base: return {kIdentity};
        case TrainMode::transnet: return rotations_prefix(heads);
        case TrainMode::arch_only: return TransformationSet(static_cast<std::size_t>(std::max(heads, 2)), kIdentity);
        case TrainMode::single_head: return {kIdentity};
    }
    return {kIdentity};
}

struct Batch {
    Tensor inputs;  // b x C x H x W
    std::vector<int> labels;

    int size() const { return static_cast<int>(labels.size()); }

    Tensor sample(int i) const {
        const int c = inputs.dim(1), h = inputs.dim(2), w = inputs.dim(3);
        Tensor out({c, h, w});
        const std::size_t n = out.numel();
        std::copy_n(inputs.data.begin() + static_cast<std::ptrdiff_t>(n) * i, n, out.data.begin());
        return out;
    }
};

/// One (head, transformation) pair the loss averages over.
using LossTerm = std::pair<int, DihedralElement>;

inline std::vector<LossTerm> loss_terms(const TransNetModel& model, TrainMode mode,
                                        const TransformationSet& single_head_transforms) {
    std::vector<LossTerm> terms;
    if (mode == TrainMode::single_head) {
        if (model.params.heads.size() != 1)
            throw input_error("single-head mode requires exactly one head");
        for (DihedralElement t : single_head_transforms) terms.emplace_back(0, t);
    } else {
        for (std::size_t j = 0; j < model.transforms.size(); ++j)
            terms.emplace_back(static_cast<int>(j), model.transforms[j]);
    }
    if (terms.empty()) throw input_error("loss has no terms");
    return terms;
}

namespace detail {

/// Per-sample cross-entropies for every loss term, evaluated in parallel
/// over samples. ce[k * terms + j] is term j on sample k.
inline std::vector<double> per_sample_term_ce(const TransNetModel& model,
                                              const std::vector<LossTerm>& terms,
                                              const Tensor& inputs, const std::vector<int>& labels) {
    const int n = static_cast<int>(labels.size());
    const int c = inputs.dim(1), h = inputs.dim(2), w = inputs.dim(3);
    const std::size_t stride = static_cast<std::size_t>(c) * h * w;
    std::vector<double> ce(static_cast<std::size_t>(n) * terms.size());
    parallel_for(n, [&](int k) {
        Tensor x({c, h, w});
        std::copy_n(inputs.data.begin() + static_cast<std::ptrdiff_t>(stride) * k, stride,
                    x.data.begin());
        for (std::size_t j = 0; j < terms.size(); ++j) {
            const Tensor logits =
                forward_head(model, terms[j].first, apply_spatial(terms[j].second, x));
            ce[static_cast<std::size_t>(k) * terms.size() + j] =
                softmax_cross_entropy(logits, labels[static_cast<std::size_t>(k)]).loss;
        }
    });
    return ce;
}

inline double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace detail

/// Alg. 1 lines 5-7 on one batch: mean over terms of the per-term batch mean.
inline double transformation_loss_terms(const TransNetModel& model,
                                        const std::vector<LossTerm>& terms, const Tensor& inputs,
                                        const std::vector<int>& labels) {
    const std::vector<double> ce = detail::per_sample_term_ce(model, terms, inputs, labels);
    const int n = static_cast<int>(labels.size());
    std::vector<double> term_losses(terms.size());
    std::vector<double> col(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < terms.size(); ++j) {
        for (int k = 0; k < n; ++k) col[static_cast<std::size_t>(k)] = ce[static_cast<std::size_t>(k) * terms.size() + j];
        term_losses[j] = detail::mean_of(col);
    }
    return detail::mean_of(term_losses);
}

/// The sampled transformation loss L_T(h_T, B) over the model's own heads.
inline double transformation_loss(const TransNetModel& model, const Batch& batch) {
    return transformation_loss_terms(model, loss_terms(model, TrainMode::transnet, {}),
                                     batch.inputs, batch.labels);
}

inline double transformation_loss(const TransNetModel& model, const LabeledData& data) {
    return transformation_loss_terms(model, loss_terms(model, TrainMode::transnet, {}),
                                     data.inputs, data.labels);
}

/// SGD with momentum and (decoupled-from-nothing, classic) L2 weight decay:
///   v <- momentum * v + g + weight_decay * p;  p <- p - lr * v
inline void sgd_update_tensor(Tensor& param, Tensor& velocity, const Tensor& grad, double lr,
                              double momentum, double weight_decay) {
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        velocity.data[i] = momentum * velocity.data[i] + grad.data[i] + weight_decay * param.data[i];
        param.data[i] -= lr * velocity.data[i];
    }
}

struct SgdState {
    ParamGrads velocity;

    static SgdState zeros_like(const ModelParams& p) { return {ParamGrads::zeros_like(p)}; }
};

inline void sgd_update(ModelParams& params, SgdState& state, const ParamGrads& grads, double lr,
                       double momentum, double weight_decay, bool decay_biases) {
    const double bias_decay = decay_biases ? weight_decay : 0.0;
    for (std::size_t l = 0; l < params.conv_layers.size(); ++l) {
        sgd_update_tensor(params.conv_layers[l].kernels, state.velocity.conv_layers[l].kernels,
                          grads.conv_layers[l].kernels, lr, momentum, weight_decay);
        sgd_update_tensor(params.conv_layers[l].bias, state.velocity.conv_layers[l].bias,
                          grads.conv_layers[l].bias, lr, momentum, bias_decay);
    }
    for (std::size_t h = 0; h < params.heads.size(); ++h) {
        sgd_update_tensor(params.heads[h].weight, state.velocity.heads[h].weight,
                          grads.heads[h].weight, lr, momentum, weight_decay);
        sgd_update_tensor(params.heads[h].bias, state.velocity.heads[h].bias, grads.heads[h].bias,
                          lr, momentum, bias_decay);
    }
}

/// Reusable per-sample gradient buffers so the step loop does not churn
/// allocations. Slot k holds sample k's gradient; the batch reduction always
/// runs in index order, which keeps results independent of the worker count.
struct GradWorkspace {
    std::vector<ParamGrads> slots;
    std::vector<double> sample_loss_sums;

    void prepare(const ModelParams& params, int batch_size) {
        while (static_cast<int>(slots.size()) < batch_size)
            slots.push_back(ParamGrads::zeros_like(params));
        sample_loss_sums.assign(static_cast<std::size_t>(batch_size), 0.0);
    }

    static void zero(ParamGrads& g) {
        for (auto& lg : g.conv_layers) {
            std::fill(lg.kernels.data.begin(), lg.kernels.data.end(), 0.0);
            std::fill(lg.bias.data.begin(), lg.bias.data.end(), 0.0);
        }
        for (auto& hg : g.heads) {
            std::fill(hg.weight.data.begin(), hg.weight.data.end(), 0.0);
            std::fill(hg.bias.data.begin(), hg.bias.data.end(), 0.0);
        }
    }
};

/// Gradient of the sampled transformation loss. Per-sample gradients are
/// produced in parallel and reduced over the batch in index order; the 1/m
/// factor is applied once, from the loss average.
inline double compute_gradients(const TransNetModel& model, const std::vector<LossTerm>& terms,
                                const Batch& batch, ParamGrads& grads,
                                GradWorkspace* workspace = nullptr) {
    const int b = batch.size();
    const int m = static_cast<int>(terms.size());
    GradWorkspace local;
    GradWorkspace& ws = workspace ? *workspace : local;
    ws.prepare(model.params, b);

    parallel_for(b, [&](int k) {
        GradWorkspace::zero(ws.slots[static_cast<std::size_t>(k)]);
        const Tensor x = batch.sample(k);
        double ce_sum = 0.0;
        for (const LossTerm& term : terms) {
            ForwardTrace trace;
            const Tensor logits =
                forward_head(model, term.first, apply_spatial(term.second, x), &trace);
            const auto sce = softmax_cross_entropy(logits, batch.labels[static_cast<std::size_t>(k)]);
            ce_sum += sce.loss;
            backward_head(model.params, term.first, trace, sce.grad_logits, ws.slots[static_cast<std::size_t>(k)]);
        }
        ws.sample_loss_sums[static_cast<std::size_t>(k)] = ce_sum;
    });

    grads = ParamGrads::zeros_like(model.params);
    for (int k = 0; k < b; ++k) grads.add(ws.slots[static_cast<std::size_t>(k)]);
    grads.scale(1.0 / (static_cast<double>(b) * m));
    return pairwise_sum(ws.sample_loss_sums) / (static_cast<double>(b) * m);
}

/// One optimization step of Alg. 1. Returns the sampled loss; aborts with a
/// diagnostic when the loss stops being finite.
inline double train_step(TransNetModel& model, const Batch& batch, SgdState& state,
                         const TrainingConfig& cfg, double lr,
                         const TransformationSet& single_head_transforms = {},
                         GradWorkspace* workspace = nullptr) {
    const std::vector<LossTerm> terms = loss_terms(model, cfg.mode, single_head_transforms);
    ParamGrads grads;
    const double loss = compute_gradients(model, terms, batch, grads, workspace);
    if (!std::isfinite(loss))
        throw training_diverged("non-finite training loss " + std::to_string(loss));
    sgd_update(model.params, state, grads, lr, cfg.momentum, cfg.weight_decay, cfg.decay_biases);
    return loss;
}

/// Deterministic augmentation core: optional horizontal flip, zero-pad by
/// `pad` on every border, crop back at offset (off_y, off_x) in [0, 2*pad].
inline Tensor augment_with(const Tensor& x, bool flip, int off_y, int off_x, int pad) {
    Tensor cur = flip ? apply_spatial(kHorizontalFlip, x) : x;
    if (pad <= 0) return cur;
    const int c = cur.dim(0), h = cur.dim(1), w = cur.dim(2);
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y) {
            const int sy = y + off_y - pad;
            if (sy < 0 || sy >= h) continue;
            for (int x2 = 0; x2 < w; ++x2) {
                const int sx = x2 + off_x - pad;
                if (sx < 0 || sx >= w) continue;
                out(ch, y, x2) = cur(ch, sy, sx);
            }
        }
    return out;
}

/// Appendix-style augmentation: flip with probability p, pad by `pad_crop`
/// pixels and crop back uniformly.
inline Tensor augment(const Tensor& x, Rng& rng, const AugmentConfig& cfg) {
    const bool flip = cfg.horizontal_flip_prob > 0.0 && rng.bernoulli(cfg.horizontal_flip_prob);
    int off_y = cfg.pad_crop, off_x = cfg.pad_crop;
    if (cfg.pad_crop > 0) {
        off_y = static_cast<int>(rng.integer(static_cast<std::uint64_t>(2 * cfg.pad_crop + 1)));
        off_x = static_cast<int>(rng.integer(static_cast<std::uint64_t>(2 * cfg.pad_crop + 1)));
    }
    return augment_with(x, flip, off_y, off_x, cfg.pad_crop);
}

struct UnbiasednessResult {
    double empirical_mean = 0.0;
    double full_loss = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    int n_batches = 0;
};

/// Lemma-style check that the sampled loss estimates the full transformation
/// loss: batches are drawn i.i.d. uniformly with replacement and the batch
/// losses' mean is compared to the full loss via a z-score.
inline UnbiasednessResult unbiasedness_check(const TransNetModel& model, const LabeledData& data,
                                             int batch_size, int n_batches, Rng& rng) {
    if (data.size() == 0) throw input_error("unbiasedness_check: empty dataset");
    const std::vector<LossTerm> terms = loss_terms(model, TrainMode::transnet, {});

    std::vector<int> indices(static_cast<std::size_t>(n_batches) * batch_size);
    for (int& i : indices) i = static_cast<int>(rng.integer(static_cast<std::uint64_t>(data.size())));

    const int c = data.inputs.dim(1), h = data.inputs.dim(2), w = data.inputs.dim(3);
    const std::size_t stride = static_cast<std::size_t>(c) * h * w;
    std::vector<double> losses(static_cast<std::size_t>(n_batches));
    parallel_for(n_batches, [&](int bi) {
        Batch batch;
        batch.inputs = Tensor({batch_size, c, h, w});
        batch.labels.resize(static_cast<std::size_t>(batch_size));
        for (int k = 0; k < batch_size; ++k) {
            const int src = indices[static_cast<std::size_t>(bi) * batch_size + k];
            std::copy_n(data.inputs.data.begin() + static_cast<std::ptrdiff_t>(stride) * src, stride,
                        batch.inputs.data.begin() + static_cast<std::ptrdiff_t>(stride) * k);
            batch.labels[static_cast<std::size_t>(k)] = data.labels[static_cast<std::size_t>(src)];
        }
        // sequential per-batch loss; the outer loop owns the parallelism
        std::vector<double> term_losses(terms.size());
        std::vector<double> col(static_cast<std::size_t>(batch_size));
        for (std::size_t j = 0; j < terms.size(); ++j) {
            for (int k = 0; k < batch_size; ++k) {
                const Tensor x = batch.sample(k);
                const Tensor logits =
                    forward_head(model, terms[j].first, apply_spatial(terms[j].second, x));
                col[static_cast<std::size_t>(k)] =
                    softmax_cross_entropy(logits, batch.labels[static_cast<std::size_t>(k)]).loss;
            }
            term_losses[j] = detail::mean_of(col);
        }
        losses[static_cast<std::size_t>(bi)] = detail::mean_of(term_losses);
    });

    UnbiasednessResult r;
    r.n_batches = n_batches;
    r.full_loss = transformation_loss(model, data);
    r.empirical_mean = detail::mean_of(losses);
    double sq = 0.0;
    for (double v : losses) sq += (v - r.empirical_mean) * (v - r.empirical_mean);
    const double var = n_batches > 1 ? sq / (n_batches - 1) : 0.0;
    r.std_error = std::sqrt(var / n_batches);
    r.z = r.std_error > 0.0 ? (r.empirical_mean - r.full_loss) / r.std_error : 0.0;
    return r;
}

enum class PredictorKind { identity_head, full_model };

struct GenRatio {
    double ratio = 0.0;
    double train_loss = 0.0;
    double test_loss = 0.0;
};

/// Test/train cross-entropy ratio; lower indicates better generalization.
/// identity_head scores head 0 on untransformed inputs (the pruned model's
/// predictor); full_model scores the head-averaged logits.
inline GenRatio generalization_ratio(const TransNetModel& model, const LabeledData& train,
                                     const LabeledData& test, PredictorKind kind,
                                     bool average_probabilities = false) {
    if (train.size() == 0 || test.size() == 0)
        throw input_error("generalization_ratio: empty split");
    auto mean_ce = [&](const LabeledData& data) {
        const int n = data.size();
        std::vector<double> ce(static_cast<std::size_t>(n));
        parallel_for(n, [&](int k) {
            const Tensor x = data.sample(k);
            const Tensor logits = kind == PredictorKind::identity_head
                                      ? forward_head(model, 0, x)
                                      : forward_full(model, x, average_probabilities);
            ce[static_cast<std::size_t>(k)] =
                softmax_cross_entropy(logits, data.labels[static_cast<std::size_t>(k)]).loss;
        });
        return detail::mean_of(ce);
    };
    GenRatio g;
    g.train_loss = mean_ce(train);
    g.test_loss = mean_ce(test);
    if (g.train_loss == 0.0) {
        std::cerr << "generalization_ratio: train loss is zero, reporting +inf\n";
        g.ratio = std::numeric_limits<double>::infinity();
    } else {
        g.ratio = g.test_loss / g.train_loss;
    }
    return g;
}

struct EvalResult {
    double accuracy = 0.0;
    double mean_ce = 0.0;
};

/// Accuracy and cross-entropy of the deployed predictor (forward_full, with
/// optional test-time flip averaging). Argmax ties resolve to the lowest
/// class index.
inline EvalResult evaluate(const TransNetModel& model, const LabeledData& data,
                           bool flip_averaging, bool average_probabilities = false) {
    const int n = data.size();
    std::vector<double> ce(static_cast<std::size_t>(n));
    std::vector<char> correct(static_cast<std::size_t>(n));
    parallel_for(n, [&](int k) {
        const Tensor x = data.sample(k);
        const Tensor logits = flip_averaging
                                  ? predict_with_flip_averaging(model, x, average_probabilities)
                                  : forward_full(model, x, average_probabilities);
        int best = 0;
        for (int i = 1; i < logits.dim(0); ++i)
            if (logits(i) > logits(best)) best = i;
        correct[static_cast<std::size_t>(k)] = best == data.labels[static_cast<std::size_t>(k)] ? 1 : 0;
        ce[static_cast<std::size_t>(k)] =
            softmax_cross_entropy(logits, data.labels[static_cast<std::size_t>(k)]).loss;
    });
    EvalResult r;
    int hits = 0;
    for (char c : correct) hits += c;
    r.accuracy = static_cast<double>(hits) / n;
    r.mean_ce = detail::mean_of(ce);
    return r;
}

struct EpochRow {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;  // L_T on the train split
    double test_loss = 0.0;   // L_T on the test split
    double train_acc = 0.0;   // forward_full accuracy (no flip averaging)
    double test_acc = 0.0;
    std::vector<double> head_train_losses;
    std::vector<double> head_test_losses;
    double wall_time_s = 0.0;
};

struct TrainResult {
    TransNetModel model;
    TransformationSet loss_transforms;  // single-head mode's transformation set
    std::vector<EpochRow> history;
    bool diverged = false;
    std::string divergence_reason;
};

namespace detail {

struct SplitMetrics {
    double loss_T = 0.0;
    std::vector<double> per_term;
    double accuracy = 0.0;
};

/// Per-term losses plus the deployed prediction accuracy, sharing one
/// forward pass per (sample, term). For single-head mode the prediction is
/// the identity term alone.
inline SplitMetrics split_metrics(const TransNetModel& model, const std::vector<LossTerm>& terms,
                                  const LabeledData& data, bool single_head_prediction,
                                  bool average_probabilities) {
    const int n = data.size();
    const std::size_t m = terms.size();
    std::vector<double> ce(static_cast<std::size_t>(n) * m);
    std::vector<char> correct(static_cast<std::size_t>(n));
    parallel_for(n, [&](int k) {
        const Tensor x = data.sample(k);
        std::vector<Tensor> logits(m);
        for (std::size_t j = 0; j < m; ++j) {
            logits[j] = forward_head(model, terms[j].first, apply_spatial(terms[j].second, x));
            ce[static_cast<std::size_t>(k) * m + j] =
                softmax_cross_entropy(logits[j], data.labels[static_cast<std::size_t>(k)]).loss;
            if (average_probabilities) logits[j] = softmax(logits[j]);
        }
        Tensor pred;
        if (single_head_prediction) {
            pred = logits[0];  // identity is the first term
        } else {
            const int kk = logits[0].dim(0);
            pred = Tensor({kk});
            std::vector<double> vals(m);
            for (int c = 0; c < kk; ++c) {
                for (std::size_t j = 0; j < m; ++j) vals[j] = logits[j](c);
                pred(c) = pairwise_sum(vals) / static_cast<double>(m);
            }
        }
        int best = 0;
        for (int i = 1; i < pred.dim(0); ++i)
            if (pred(i) > pred(best)) best = i;
        correct[static_cast<std::size_t>(k)] = best == data.labels[static_cast<std::size_t>(k)] ? 1 : 0;
    });

    SplitMetrics sm;
    sm.per_term.resize(m);
    std::vector<double> col(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < m; ++j) {
        for (int k = 0; k < n; ++k) col[static_cast<std::size_t>(k)] = ce[static_cast<std::size_t>(k) * m + j];
        sm.per_term[j] = mean_of(col);
    }
    std::vector<double> terms_mean = sm.per_term;
    sm.loss_T = mean_of(terms_mean);
    int hits = 0;
    for (char c : correct) hits += c;
    sm.accuracy = n > 0 ? static_cast<double>(hits) / n : 0.0;
    return sm;
}

/// Streams one CSV row per epoch; the header is emitted with the first row.
class HistoryCsvWriter {
public:
    explicit HistoryCsvWriter(const std::string& path) : path_(path) {}

    void append(const EpochRow& r) {
        if (path_.empty()) return;
        if (!os_.is_open()) {
            os_.open(path_);
            if (!os_) throw format_error("cannot open training log for writing: " + path_);
            os_ << "epoch,lr,train_loss,test_loss,train_acc,test_acc";
            for (std::size_t j = 0; j < r.head_train_losses.size(); ++j)
                os_ << ",head" << j << "_train_loss";
            for (std::size_t j = 0; j < r.head_test_losses.size(); ++j)
                os_ << ",head" << j << "_test_loss";
            os_ << ",wall_time_s\n" << std::setprecision(12);
        }
        os_ << r.epoch << "," << r.lr << "," << r.train_loss << "," << r.test_loss << ","
            << r.train_acc << "," << r.test_acc;
        for (double v : r.head_train_losses) os_ << "," << v;
        for (double v : r.head_test_losses) os_ << "," << v;
        os_ << "," << r.wall_time_s << "\n";
        os_.flush();
    }

private:
    std::string path_;
    std::ofstream os_;
};

}  // namespace detail

/// Trains an already-built model. Epochs iterate a reseeded shuffled
/// permutation; augmentation decisions are drawn on the main thread in
/// sample order so the run is reproducible bitwise from (seed, config).
inline TrainResult train_model(TransNetModel model, const LabeledData& train_data,
                               const LabeledData& test_data, const TrainingConfig& cfg,
                               const TransformationSet& single_head_transforms = {},
                               const std::string& csv_path = "") {
    cfg.validate();
    validate_model(model);
    const std::vector<LossTerm> terms = loss_terms(model, cfg.mode, single_head_transforms);

    Rng root(cfg.seed);
    Rng shuffle_rng = root.substream("shuffle");
    Rng augment_rng = root.substream("augment");

    TrainResult result;
    result.loss_transforms = single_head_transforms;
    SgdState state = SgdState::zeros_like(model.params);
    detail::HistoryCsvWriter csv(csv_path);
    GradWorkspace workspace;

    const int n = train_data.size();
    const int c = train_data.inputs.dim(1), h = train_data.inputs.dim(2), w = train_data.inputs.dim(3);
    const std::size_t stride = static_cast<std::size_t>(c) * h * w;
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;

    const auto t0 = std::chrono::steady_clock::now();
    const bool single_head_pred = cfg.mode == TrainMode::single_head;
    try {
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            const double lr = cfg.lr_at_epoch(epoch);
            shuffle_rng.shuffle(perm);
            for (int start = 0; start < n; start += cfg.batch_size) {
                const int b = std::min(cfg.batch_size, n - start);
                Batch batch;
                batch.inputs = Tensor({b, c, h, w});
                batch.labels.resize(static_cast<std::size_t>(b));
                for (int k = 0; k < b; ++k) {
                    const int src = perm[static_cast<std::size_t>(start + k)];
                    Tensor x({c, h, w});
                    std::copy_n(train_data.inputs.data.begin() + static_cast<std::ptrdiff_t>(stride) * src,
                                stride, x.data.begin());
                    x = augment(x, augment_rng, cfg.augment);
                    std::copy_n(x.data.begin(), stride,
                                batch.inputs.data.begin() + static_cast<std::ptrdiff_t>(stride) * k);
                    batch.labels[static_cast<std::size_t>(k)] = train_data.labels[static_cast<std::size_t>(src)];
                }
                train_step(model, batch, state, cfg, lr, single_head_transforms, &workspace);
            }

            EpochRow row;
            row.epoch = epoch;
            row.lr = lr;
            const detail::SplitMetrics tr = detail::split_metrics(
                model, terms, train_data, single_head_pred, cfg.average_probabilities);
            row.train_loss = tr.loss_T;
            row.train_acc = tr.accuracy;
            row.head_train_losses = tr.per_term;
            if (test_data.size() > 0) {
                const detail::SplitMetrics te = detail::split_metrics(
                    model, terms, test_data, single_head_pred, cfg.average_probabilities);
                row.test_loss = te.loss_T;
                row.test_acc = te.accuracy;
                row.head_test_losses = te.per_term;
            }
            row.wall_time_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            csv.append(row);
            result.history.push_back(std::move(row));
        }
    } catch (const training_diverged& e) {
        result.diverged = true;
        result.divergence_reason = e.what();
        std::cerr << "training diverged: " << e.what() << "\n";
    }
    result.model = std::move(model);
    return result;
}

/// Builds the model implied by the config (architecture, mode, heads, seeded
/// init) and trains it.
inline TrainResult train(const ArchSpec& arch, const LabeledData& train_data,
                         const LabeledData& test_data, const TrainingConfig& cfg,
                         const std::string& csv_path = "") {
    cfg.validate();
    Rng init_rng = Rng(cfg.seed).substream("init");
    const TransformationSet transforms = transforms_for_mode(cfg.mode, cfg.heads);
    TransNetModel model = make_model(arch, transforms, init_rng);
    TransformationSet single_head_transforms;
    if (cfg.mode == TrainMode::single_head) single_head_transforms = rotations_prefix(cfg.heads);
    return train_model(std::move(model), train_data, test_data, cfg, single_head_transforms,
                       csv_path);
}

}  // namespace transnet
