#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "transnet/tensor.hpp"

// The dihedral group D4: the 8 symmetries of the square, generated by the
// counter-clockwise quarter rotation r and the horizontal reflection m
// (width-axis flip). Elements are kept in the canonical form m^flip o r^rot.

namespace transnet {

struct DihedralElement {
    int rot = 0;      // 0..3 counter-clockwise quarter turns
    bool flip = false;  // horizontal reflection applied after the rotation

    bool operator==(const DihedralElement&) const = default;
};

inline constexpr DihedralElement kIdentity{0, false};
inline constexpr DihedralElement kRotation90{1, false};
inline constexpr DihedralElement kHorizontalFlip{0, true};
// m o r^2, the vertical reflection
inline constexpr DihedralElement kVerticalFlip{2, true};

/// Group composition a o b (apply b first). Uses r^k o m = m o r^{-k}.
inline DihedralElement compose(DihedralElement a, DihedralElement b) {
    const int rot = b.flip ? (b.rot - a.rot) : (a.rot + b.rot);
    return {((rot % 4) + 4) % 4, a.flip != b.flip};
}

inline DihedralElement inverse(DihedralElement a) {
    if (a.flip) return a;  // reflections are involutions
    return {(4 - a.rot) % 4, false};
}

inline const std::array<DihedralElement, 8>& all_dihedral_elements() {
    static const std::array<DihedralElement, 8> elems = {
        DihedralElement{0, false}, DihedralElement{1, false}, DihedralElement{2, false},
        DihedralElement{3, false}, DihedralElement{0, true},  DihedralElement{1, true},
        DihedralElement{2, true},  DihedralElement{3, true}};
    return elems;
}

/// Serialized names: "r0".."r3", "mr0".."mr3".
inline std::string element_name(DihedralElement e) {
    return (e.flip ? "mr" : "r") + std::to_string(e.rot);
}

inline DihedralElement parse_element(const std::string& name) {
    for (DihedralElement e : all_dihedral_elements())
        if (element_name(e) == name) return e;
    throw input_error("unknown dihedral element name: '" + name + "'");
}

namespace detail {

/// Input index (si, sj) that output position (i, j) of e(x) reads from,
/// for an n x n spatial grid.
inline void source_index(DihedralElement e, int n, int i, int j, int& si, int& sj) {
    // invert the horizontal flip applied last
    if (e.flip) j = n - 1 - j;
    // invert rot counter-clockwise quarter turns: out[i][j] = in[j][n-1-i]
    for (int q = 0; q < e.rot; ++q) {
        const int ti = j;
        const int tj = n - 1 - i;
        i = ti;
        j = tj;
    }
    si = i;
    sj = j;
}

}  // namespace detail

/// Applies e to the last two (square) axes; leading axes untouched.
inline Tensor apply_spatial(DihedralElement e, const Tensor& x) {
    if (x.rank() < 2) throw shape_error("apply_spatial: tensor rank must be >= 2");
    const int n = x.dim(x.rank() - 2);
    if (n != x.dim(x.rank() - 1))
        throw shape_error("apply_spatial: spatial dims must be square, got " + x.shape_str());
    const std::size_t plane = static_cast<std::size_t>(n) * n;
    const std::size_t slices = x.numel() / plane;

    Tensor out(x.shape);
    for (std::size_t s = 0; s < slices; ++s) {
        const double* in = x.data.data() + s * plane;
        double* o = out.data.data() + s * plane;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                int si, sj;
                detail::source_index(e, n, i, j, si, sj);
                o[i * n + j] = in[si * n + sj];
            }
    }
    return out;
}

/// Ordered list of transformations; first element is conventionally the
/// identity. Duplicates are allowed (the {id, id} multi-set ablation).
using TransformationSet = std::vector<DihedralElement>;

inline bool contains(const TransformationSet& t, DihedralElement e) {
    return std::find(t.begin(), t.end(), e) != t.end();
}

/// Closed under composition and inverse (uniqueness included).
inline bool is_group(const TransformationSet& t) {
    if (t.empty()) return false;
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = i + 1; j < t.size(); ++j)
            if (t[i] == t[j]) return false;
    for (DihedralElement a : t) {
        if (!contains(t, inverse(a))) return false;
        for (DihedralElement b : t)
            if (!contains(t, compose(a, b))) return false;
    }
    return true;
}

/// The rotation subgroup {r^0, r^1, r^2, r^3}.
inline TransformationSet c4_group() {
    return {DihedralElement{0, false}, DihedralElement{1, false}, DihedralElement{2, false},
            DihedralElement{3, false}};
}

inline TransformationSet d4_group() {
    const auto& all = all_dihedral_elements();
    return TransformationSet(all.begin(), all.end());
}

/// The first m rotations {r^0, ..., r^{m-1}}: the default head set for a
/// TransNet with m heads (flips are reserved for augmentation).
inline TransformationSet rotations_prefix(int m) {
    if (m < 1 || m > 4) throw input_error("rotations_prefix: head count must be in [1, 4]");
    TransformationSet t;
    for (int i = 0; i < m; ++i) t.push_back({i, false});
    return t;
}

namespace detail {

/// Orbit decomposition of the n x n index grid under a transformation set.
/// Returns, per orbit, the sorted flat indices of its members.
inline std::vector<std::vector<int>> spatial_orbits(const TransformationSet& t, int n) {
    std::vector<std::vector<int>> orbits;
    std::vector<bool> visited(static_cast<std::size_t>(n) * n, false);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (visited[i * n + j]) continue;
            std::vector<int> orbit;
            for (DihedralElement e : t) {
                int si, sj;
                source_index(e, n, i, j, si, sj);
                const int idx = si * n + sj;
                if (!visited[idx]) {
                    visited[idx] = true;
                    orbit.push_back(idx);
                }
            }
            std::sort(orbit.begin(), orbit.end());
            orbits.push_back(std::move(orbit));
        }
    return orbits;
}

}  // namespace detail

/// Elementwise mean of {e(w) : e in T}, the nearest T-invariant tensor.
/// Computed per index orbit in canonical order; orbit sizes under a dihedral
/// subgroup are powers of two, so the result is exactly constant on orbits
/// and exactly idempotent.
inline Tensor orbit_mean(const TransformationSet& t, const Tensor& w) {
    if (!is_group(t))
        throw input_error("orbit_mean: transformation set must be a group");
    if (w.rank() < 2) throw shape_error("orbit_mean: tensor rank must be >= 2");
    const int n = w.dim(w.rank() - 2);
    if (n != w.dim(w.rank() - 1))
        throw shape_error("orbit_mean: spatial dims must be square, got " + w.shape_str());

    const auto orbits = detail::spatial_orbits(t, n);
    const std::size_t plane = static_cast<std::size_t>(n) * n;
    const std::size_t slices = w.numel() / plane;

    Tensor out(w.shape);
    std::vector<double> vals;
    for (std::size_t s = 0; s < slices; ++s) {
        const double* in = w.data.data() + s * plane;
        double* o = out.data.data() + s * plane;
        for (const auto& orbit : orbits) {
            vals.clear();
            for (int idx : orbit) vals.push_back(in[idx]);
            const double mean = pairwise_sum(vals) / static_cast<double>(orbit.size());
            for (int idx : orbit) o[idx] = mean;
        }
    }
    return out;
}

}  // namespace transnet
