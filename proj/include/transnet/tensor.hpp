#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace transnet {

/// Raised when operand shapes are inconsistent with an operation's contract.
class shape_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised on malformed files (checkpoints, dataset records, configs).
class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised on invalid arguments that are not shape mismatches (bad indices,
/// non-group transformation sets, unknown config keys, ...).
class input_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense N-dimensional array of doubles, row-major.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), 0.0);
    }

    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel_of(shape)) {
            throw shape_error("tensor data length " + std::to_string(data.size()) +
                              " does not match shape (expects " +
                              std::to_string(numel_of(shape)) + ")");
        }
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int e : s) {
            if (e <= 0) throw shape_error("tensor extents must be positive");
            n *= static_cast<std::size_t>(e);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    double& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
    const double& operator()(int i) const { return data[static_cast<std::size_t>(i)]; }

    double& operator()(int i, int j) {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    const double& operator()(int i, int j) const {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }

    double& operator()(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    const double& operator()(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }

    double& operator()(int i, int j, int k, int l) {
        return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    const double& operator()(int i, int j, int k, int l) const {
        return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << "]";
        return os.str();
    }
};

inline void check_rank(const Tensor& t, int rank, const char* what) {
    if (t.rank() != rank) {
        throw shape_error(std::string(what) + ": expected rank " + std::to_string(rank) +
                          " tensor, got " + t.shape_str());
    }
}

/// Deterministic pairwise summation over a contiguous row-major slice.
/// Exact for 2^k copies of the same value, which the dihedral orbit means
/// rely on.
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        // unrolled pairwise for the common tiny cases
        if (n == 1) return v[0];
        if (n == 2) return v[0] + v[1];
        if (n == 3) return (v[0] + v[1]) + v[2];
        if (n == 4) return (v[0] + v[1]) + (v[2] + v[3]);
        double a = (v[0] + v[1]) + (v[2] + v[3]);
        if (n == 5) return a + v[4];
        if (n == 6) return a + (v[4] + v[5]);
        if (n == 7) return a + ((v[4] + v[5]) + v[6]);
        return a + ((v[4] + v[5]) + (v[6] + v[7]));
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(std::span<const double>(v));
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw shape_error("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

inline double l2_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return std::sqrt(s);
}

}  // namespace transnet
