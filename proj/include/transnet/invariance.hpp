#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

#include "transnet/checkpoint.hpp"
#include "transnet/dihedral.hpp"
#include "transnet/model.hpp"
#include "transnet/tensor.hpp"

// The Invariance Score gauge: IS(w, T) is the distance from a kernel to the
// nearest T-invariant tensor, which the group average attains. A brute-force
// subspace projection serves as the independent oracle for that closed form.

namespace transnet {

/// Closed form IS(w, T) = ||w - mean_t t(w)||. Zero iff w is T-invariant.
inline double invariance_score(const Tensor& w, const TransformationSet& group) {
    const Tensor mean = orbit_mean(group, w);  // validates that T is a group
    double s = 0.0;
    for (std::size_t i = 0; i < w.data.size(); ++i) {
        const double d = w.data[i] - mean.data[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Independent oracle: builds the orthonormal basis of the invariant
/// subspace from normalized indicator vectors of the index orbits and
/// projects w onto it coordinate by coordinate.
inline Tensor brute_force_projection(const Tensor& w, const TransformationSet& group) {
    if (!is_group(group))
        throw input_error("brute_force_projection: transformation set must be a group");
    if (w.rank() < 2) throw shape_error("brute_force_projection: tensor rank must be >= 2");
    const int n = w.dim(w.rank() - 2);
    if (n != w.dim(w.rank() - 1))
        throw shape_error("brute_force_projection: spatial dims must be square");

    const auto orbits = detail::spatial_orbits(group, n);
    const std::size_t plane = static_cast<std::size_t>(n) * n;
    const std::size_t slices = w.numel() / plane;

    Tensor proj(w.shape);
    for (std::size_t s = 0; s < slices; ++s) {
        const double* in = w.data.data() + s * plane;
        double* out = proj.data.data() + s * plane;
        for (const auto& orbit : orbits) {
            // basis vector e = indicator(orbit) / sqrt(|orbit|)
            const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(orbit.size()));
            double coeff = 0.0;
            for (int idx : orbit) coeff += in[idx] * inv_sqrt;
            for (int idx : orbit) out[idx] += coeff * inv_sqrt;
        }
    }
    return proj;
}

enum class SimilarityMetric { norm, pearson, cosine };

inline std::string metric_name(SimilarityMetric m) {
    switch (m) {
        case SimilarityMetric::norm: return "norm";
        case SimilarityMetric::pearson: return "pearson";
        case SimilarityMetric::cosine: return "cosine";
    }
    return "?";
}

inline SimilarityMetric parse_metric(const std::string& s) {
    for (SimilarityMetric m :
         {SimilarityMetric::norm, SimilarityMetric::pearson, SimilarityMetric::cosine})
        if (metric_name(m) == s) return m;
    throw input_error("unknown similarity metric: '" + s + "'");
}

/// norm -> invariance_score; pearson/cosine compare w with its orbit mean.
/// Degenerate cases (constant/zero operands) return nullopt and are counted
/// rather than aggregated.
inline std::optional<double> similarity_score(const Tensor& w, const TransformationSet& group,
                                              SimilarityMetric metric) {
    if (metric == SimilarityMetric::norm) return invariance_score(w, group);
    const Tensor mean = orbit_mean(group, w);
    const std::size_t n = w.data.size();
    if (metric == SimilarityMetric::cosine) {
        double ww = 0.0, mm = 0.0, wm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ww += w.data[i] * w.data[i];
            mm += mean.data[i] * mean.data[i];
            wm += w.data[i] * mean.data[i];
        }
        if (ww <= 0.0) return std::nullopt;
        // a zero orbit mean is the orthogonal limit: cos = |mean|/|w| -> 0
        if (mm <= 0.0) return 0.0;
        return wm / std::sqrt(ww * mm);
    }
    // pearson
    double mw = 0.0, mmn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mw += w.data[i];
        mmn += mean.data[i];
    }
    mw /= static_cast<double>(n);
    mmn /= static_cast<double>(n);
    double sw = 0.0, sm = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = w.data[i] - mw;
        const double b = mean.data[i] - mmn;
        sw += a * a;
        sm += b * b;
        cov += a * b;
    }
    if (sw <= 0.0 || sm <= 0.0) return std::nullopt;
    return cov / std::sqrt(sw * sm);
}

struct LayerScores {
    std::vector<double> scores;  // one per output-channel kernel, defined only
    int undefined_count = 0;     // degenerate kernels absent from aggregates
    double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;
    std::vector<double> bin_edges;  // 50 uniform bins over [0, max observed]
    std::vector<int> bin_counts;
};

struct InvarianceReport {
    std::string metric;
    std::string group;
    bool normalized = false;  // scores divided by the kernel norm
    std::vector<LayerScores> layers;
};

namespace detail {

inline void finalize_layer(LayerScores& ls, int bins) {
    if (ls.scores.empty()) return;
    double sum = 0.0;
    ls.min = ls.scores.front();
    ls.max = ls.scores.front();
    for (double v : ls.scores) {
        sum += v;
        ls.min = std::min(ls.min, v);
        ls.max = std::max(ls.max, v);
    }
    ls.mean = sum / static_cast<double>(ls.scores.size());
    double sq = 0.0;
    for (double v : ls.scores) sq += (v - ls.mean) * (v - ls.mean);
    ls.stddev = std::sqrt(sq / static_cast<double>(ls.scores.size()));

    const double hi = ls.max > 0.0 ? ls.max : 1.0;
    ls.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b)
        ls.bin_edges[static_cast<std::size_t>(b)] = hi * b / static_cast<double>(bins);
    ls.bin_counts.assign(static_cast<std::size_t>(bins), 0);
    for (double v : ls.scores) {
        int b = static_cast<int>(v / hi * bins);
        b = std::clamp(b, 0, bins - 1);
        ++ls.bin_counts[static_cast<std::size_t>(b)];
    }
}

}  // namespace detail

inline TransformationSet parse_group(const std::string& name) {
    if (name == "c4") return c4_group();
    if (name == "d4") return d4_group();
    throw input_error("unknown transformation group: '" + name + "' (expected c4 or d4)");
}

/// Per-kernel scores grouped by layer. A kernel is one output channel's
/// C_in x k x k tensor. The group defaults to the rotations C4; `normalized`
/// divides each score by the kernel norm.
inline InvarianceReport layer_report(const ModelParams& params, const TransformationSet& group,
                                     SimilarityMetric metric, bool normalized = false,
                                     int bins = 50) {
    if (!is_group(group)) throw input_error("layer_report: transformation set must be a group");
    InvarianceReport rep;
    rep.metric = metric_name(metric);
    rep.group = group.size() == 4 ? "c4" : (group.size() == 8 ? "d4" : "custom");
    rep.normalized = normalized;
    for (const ConvLayer& cl : params.conv_layers) {
        LayerScores ls;
        const int c_out = cl.kernels.dim(0);
        const int c_in = cl.kernels.dim(1), k = cl.kernels.dim(2);
        for (int co = 0; co < c_out; ++co) {
            Tensor kernel({c_in, k, k});
            const std::size_t len = kernel.numel();
            std::copy_n(cl.kernels.data.begin() + static_cast<std::ptrdiff_t>(len) * co, len,
                        kernel.data.begin());
            std::optional<double> score = similarity_score(kernel, group, metric);
            if (score && normalized) {
                const double norm = l2_norm(kernel);
                if (norm > 0.0)
                    *score /= norm;
                else
                    score.reset();
            }
            if (score)
                ls.scores.push_back(*score);
            else
                ++ls.undefined_count;
        }
        detail::finalize_layer(ls, bins);
        rep.layers.push_back(std::move(ls));
    }
    return rep;
}

/// Checkpoint-file entry point (format errors surface from the loader).
inline InvarianceReport layer_report(const std::string& checkpoint_path,
                                     const TransformationSet& group, SimilarityMetric metric,
                                     bool normalized = false) {
    const TransNetModel m = load_checkpoint(checkpoint_path);
    return layer_report(m.params, group, metric, normalized);
}

/// CSV rows: layer, kernel_index, score, metric, group.
inline void write_report_csv(const std::string& path, const InvarianceReport& rep) {
    std::ofstream os(path);
    if (!os) throw format_error("cannot open report for writing: " + path);
    os << "layer,kernel_index,score,metric,group\n";
    os << std::setprecision(12);
    for (std::size_t l = 0; l < rep.layers.size(); ++l)
        for (std::size_t k = 0; k < rep.layers[l].scores.size(); ++k)
            os << l << "," << k << "," << rep.layers[l].scores[k] << "," << rep.metric << ","
               << rep.group << "\n";
}

}  // namespace transnet
