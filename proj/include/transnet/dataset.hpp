#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "transnet/dihedral.hpp"
#include "transnet/rng.hpp"
#include "transnet/tensor.hpp"

namespace transnet {

struct LabeledData {
    Tensor inputs;  // N x C x H x W
    std::vector<int> labels;

    int size() const { return labels.empty() ? 0 : inputs.dim(0); }

    Tensor sample(int i) const {
        const int c = inputs.dim(1), h = inputs.dim(2), w = inputs.dim(3);
        Tensor out({c, h, w});
        const std::size_t n = out.numel();
        std::copy_n(inputs.data.begin() + static_cast<std::ptrdiff_t>(n) * i, n, out.data.begin());
        return out;
    }
};

struct Dataset {
    std::string name;
    int num_classes = 0;
    LabeledData train;
    LabeledData test;
    std::string planted_transform;  // synthetic ground truth, empty otherwise
    bool normalized = false;
    std::vector<double> channel_mean, channel_std;
};

namespace detail {

/// One CIFAR-style binary file: records of 1 label byte followed by
/// channel-major pixel planes. record size = 1 + 3 * s * s.
inline LabeledData load_cifar_file(const std::string& path, int num_classes, int image_size) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw format_error("cannot open dataset file: " + path);
    const std::streamoff bytes = is.tellg();
    is.seekg(0);
    const std::size_t record = 1 + 3 * static_cast<std::size_t>(image_size) * image_size;
    if (bytes <= 0 || static_cast<std::size_t>(bytes) % record != 0)
        throw format_error(path + ": size " + std::to_string(bytes) +
                           " is not a multiple of the record size " + std::to_string(record));
    const int n = static_cast<int>(static_cast<std::size_t>(bytes) / record);

    LabeledData out;
    out.inputs = Tensor({n, 3, image_size, image_size});
    out.labels.resize(static_cast<std::size_t>(n));
    std::vector<unsigned char> buf(record);
    const std::size_t plane = static_cast<std::size_t>(image_size) * image_size;
    for (int i = 0; i < n; ++i) {
        if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record)))
            throw format_error(path + ": truncated record " + std::to_string(i));
        const int label = buf[0];
        if (label >= num_classes)
            throw format_error(path + ": record " + std::to_string(i) + " has label " +
                               std::to_string(label) + " >= " + std::to_string(num_classes));
        out.labels[static_cast<std::size_t>(i)] = label;
        double* dst = &out.inputs.data[static_cast<std::size_t>(i) * 3 * plane];
        for (std::size_t p = 0; p < 3 * plane; ++p) dst[p] = buf[1 + p] / 255.0;
    }
    return out;
}

inline LabeledData concat(std::vector<LabeledData> parts) {
    int total = 0;
    for (const LabeledData& p : parts) total += p.size();
    LabeledData out;
    const auto& s = parts.front().inputs.shape;
    out.inputs = Tensor({total, s[1], s[2], s[3]});
    out.labels.reserve(static_cast<std::size_t>(total));
    std::size_t off = 0;
    for (const LabeledData& p : parts) {
        std::copy(p.inputs.data.begin(), p.inputs.data.end(), out.inputs.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += p.inputs.data.size();
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    return out;
}

}  // namespace detail

/// Loads a CIFAR-format binary dataset. A directory is read with the
/// CIFAR-10 layout (data_batch_1..5.bin + test_batch.bin) or, when present,
/// as a train.bin/test.bin pair; a single file becomes the train split.
/// image_size defaults to the CIFAR 32 (3073-byte records).
inline Dataset load_cifar_binary(const std::string& path, int num_classes = 10,
                                 int image_size = 32) {
    namespace fs = std::filesystem;
    Dataset d;
    d.num_classes = num_classes;
    if (fs::is_directory(path)) {
        if (fs::exists(path + "/train.bin")) {
            d.train = detail::load_cifar_file(path + "/train.bin", num_classes, image_size);
            if (fs::exists(path + "/test.bin"))
                d.test = detail::load_cifar_file(path + "/test.bin", num_classes, image_size);
            d.name = fs::path(path).filename().string();
            return d;
        }
        std::vector<LabeledData> parts;
        for (int i = 1; i <= 5; ++i)
            parts.push_back(detail::load_cifar_file(path + "/data_batch_" + std::to_string(i) + ".bin",
                                                    num_classes, image_size));
        d.train = detail::concat(std::move(parts));
        d.test = detail::load_cifar_file(path + "/test_batch.bin", num_classes, image_size);
        d.name = "cifar10";
    } else {
        d.train = detail::load_cifar_file(path, num_classes, image_size);
        d.name = fs::path(path).stem().string();
    }
    return d;
}

/// Writes one split in the CIFAR binary record layout. Pixel values are
/// expected in [0, 1] and quantized to bytes.
inline void write_cifar_binary(const std::string& path, const LabeledData& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open dataset file for writing: " + path);
    const int n = data.size();
    const std::size_t pixels = data.inputs.numel() / static_cast<std::size_t>(n);
    std::vector<unsigned char> buf(1 + pixels);
    for (int i = 0; i < n; ++i) {
        buf[0] = static_cast<unsigned char>(data.labels[static_cast<std::size_t>(i)]);
        const double* src = &data.inputs.data[static_cast<std::size_t>(i) * pixels];
        for (std::size_t p = 0; p < pixels; ++p) {
            const double v = std::clamp(src[p], 0.0, 1.0);
            buf[1 + p] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    if (!os) throw format_error("dataset write failed: " + path);
}

/// Class-stratified subsample: exactly n/K per class (remainder spread over
/// the first classes). Selection order within a class is randomized.
inline LabeledData subsample_stratified(const LabeledData& data, int n, int num_classes, Rng& rng) {
    if (n <= 0 || n > data.size())
        throw input_error("subsample: requested " + std::to_string(n) + " of " +
                          std::to_string(data.size()) + " samples");
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(num_classes));
    for (int i = 0; i < data.size(); ++i)
        by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);

    std::vector<int> chosen;
    for (int c = 0; c < num_classes; ++c) {
        int want = n / num_classes + (c < n % num_classes ? 1 : 0);
        auto& pool = by_class[static_cast<std::size_t>(c)];
        if (want > static_cast<int>(pool.size()))
            throw input_error("subsample: class " + std::to_string(c) + " has only " +
                              std::to_string(pool.size()) + " samples, need " + std::to_string(want));
        rng.shuffle(pool);
        chosen.insert(chosen.end(), pool.begin(), pool.begin() + want);
    }
    std::sort(chosen.begin(), chosen.end());

    LabeledData out;
    const auto& s = data.inputs.shape;
    out.inputs = Tensor({static_cast<int>(chosen.size()), s[1], s[2], s[3]});
    const std::size_t per = data.inputs.numel() / static_cast<std::size_t>(data.size());
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        std::copy_n(data.inputs.data.begin() + static_cast<std::ptrdiff_t>(per) * chosen[i], per,
                    out.inputs.data.begin() + static_cast<std::ptrdiff_t>(per) * static_cast<std::ptrdiff_t>(i));
        out.labels.push_back(data.labels[static_cast<std::size_t>(chosen[i])]);
    }
    return out;
}

/// Per-channel whitening. Statistics come from the train split only and are
/// applied to both splits.
inline void normalize_channels(Dataset& d) {
    if (d.normalized) return;
    const int c = d.train.inputs.dim(1);
    const std::size_t plane = d.train.inputs.numel() / static_cast<std::size_t>(d.train.size() * c);
    d.channel_mean.assign(static_cast<std::size_t>(c), 0.0);
    d.channel_std.assign(static_cast<std::size_t>(c), 0.0);

    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0, sq = 0.0;
        std::size_t count = 0;
        for (int i = 0; i < d.train.size(); ++i) {
            const double* p = &d.train.inputs.data[(static_cast<std::size_t>(i) * c + ch) * plane];
            for (std::size_t k = 0; k < plane; ++k) {
                sum += p[k];
                sq += p[k] * p[k];
                ++count;
            }
        }
        const double mean = sum / static_cast<double>(count);
        const double var = std::max(sq / static_cast<double>(count) - mean * mean, 1e-12);
        d.channel_mean[static_cast<std::size_t>(ch)] = mean;
        d.channel_std[static_cast<std::size_t>(ch)] = std::sqrt(var);
    }
    for (LabeledData* split : {&d.train, &d.test}) {
        if (split->size() == 0) continue;
        for (int i = 0; i < split->size(); ++i)
            for (int ch = 0; ch < c; ++ch) {
                double* p = &split->inputs.data[(static_cast<std::size_t>(i) * c + ch) * plane];
                const double m = d.channel_mean[static_cast<std::size_t>(ch)];
                const double inv = 1.0 / d.channel_std[static_cast<std::size_t>(ch)];
                for (std::size_t k = 0; k < plane; ++k) p[k] = (p[k] - m) * inv;
            }
    }
    d.normalized = true;
}

namespace detail {

/// Smooth random field: a coarse iid grid upsampled bilinearly. The law of
/// the field is mirror-invariant, which keeps horizontal flips
/// class-preserving for the synthetic classes.
inline void add_smooth_field(double* plane, int size, int coarse, double amplitude, Rng& rng) {
    std::vector<double> grid(static_cast<std::size_t>(coarse) * coarse);
    for (double& v : grid) v = rng.uniform(-amplitude, amplitude);
    for (int y = 0; y < size; ++y) {
        const double fy = (y + 0.5) / size * coarse - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, coarse - 1);
        const int y1 = std::min(y0 + 1, coarse - 1);
        const double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < size; ++x) {
            const double fx = (x + 0.5) / size * coarse - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, coarse - 1);
            const int x1 = std::min(x0 + 1, coarse - 1);
            const double wx = std::clamp(fx - x0, 0.0, 1.0);
            const double top = grid[static_cast<std::size_t>(y0) * coarse + x0] * (1 - wx) +
                               grid[static_cast<std::size_t>(y0) * coarse + x1] * wx;
            const double bot = grid[static_cast<std::size_t>(y1) * coarse + x0] * (1 - wx) +
                               grid[static_cast<std::size_t>(y1) * coarse + x1] * wx;
            plane[y * size + x] += top * (1 - wy) + bot * wy;
        }
    }
}

inline void mirror_symmetrize(double* plane, int size) {
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size / 2 + 1; ++x) {
            const double m = 0.5 * (plane[y * size + x] + plane[y * size + (size - 1 - x)]);
            plane[y * size + x] = m;
            plane[y * size + (size - 1 - x)] = m;
        }
}

inline LabeledData synth_split(const std::vector<Tensor>& prototypes, DihedralElement planted,
                               int n, int size, double noise, Rng& rng) {
    const int num_classes = static_cast<int>(prototypes.size()) * 2;
    LabeledData out;
    out.inputs = Tensor({n, 3, size, size});
    out.labels.resize(static_cast<std::size_t>(n));
    const std::size_t sample_len = 3 * static_cast<std::size_t>(size) * size;

    // sample i gets class i % K; the j-th samples of a pair's two classes
    // share a base, so with zero noise class B is the exact transform of
    // its class-A partner.
    std::vector<Tensor> pending_base(prototypes.size());
    for (int i = 0; i < n; ++i) {
        const int cls = i % num_classes;
        const std::size_t pair = static_cast<std::size_t>(cls) / 2;
        const bool is_b = cls % 2 != 0;

        Tensor base;
        if (!is_b) {
            base = prototypes[pair];
            for (int ch = 0; ch < 3; ++ch)
                add_smooth_field(&base(ch, 0, 0), size, 4, 0.35, rng);
            pending_base[pair] = base;
        } else {
            // partner base generated by the matching class-A slot; fall back
            // to a fresh draw if the split is too small to contain it
            if (pending_base[pair].numel() == 0) {
                base = prototypes[pair];
                for (int ch = 0; ch < 3; ++ch)
                    add_smooth_field(&base(ch, 0, 0), size, 4, 0.35, rng);
            } else {
                base = pending_base[pair];
            }
            base = apply_spatial(planted, base);
        }

        double* dst = &out.inputs.data[static_cast<std::size_t>(i) * sample_len];
        for (std::size_t k = 0; k < sample_len; ++k) {
            double v = base.data[k];
            if (noise > 0.0) v += noise * rng.normal();
            dst[k] = std::clamp(v, 0.0, 1.0);
        }
        out.labels[static_cast<std::size_t>(i)] = cls;
    }
    return out;
}

}  // namespace detail

/// Unpaired variant: each class is its own smooth prototype (horizontally
/// symmetric, so flips stay natural) without any planted transform relation
/// between classes. This mirrors natural-image classes, where orientation
/// does not define the label.
inline Dataset generate_synthetic_prototypes(int n_train, int n_test, int size, int num_classes,
                                             double noise, std::uint64_t seed) {
    if (size < 3) throw input_error("generate_synthetic_prototypes: size must be >= 3");
    if (num_classes < 2) throw input_error("generate_synthetic_prototypes: need >= 2 classes");

    Rng root(seed);
    Rng proto_rng = root.substream("prototypes");
    std::vector<Tensor> prototypes;
    for (int c = 0; c < num_classes; ++c) {
        Tensor proto = Tensor::full({3, size, size}, 0.5);
        for (int ch = 0; ch < 3; ++ch) {
            detail::add_smooth_field(&proto(ch, 0, 0), size, 4, 0.45, proto_rng);
            detail::mirror_symmetrize(&proto(ch, 0, 0), size);
        }
        prototypes.push_back(std::move(proto));
    }

    const auto make_split = [&](int n, Rng& rng) {
        LabeledData out;
        out.inputs = Tensor({n, 3, size, size});
        out.labels.resize(static_cast<std::size_t>(n));
        const std::size_t len = 3 * static_cast<std::size_t>(size) * size;
        for (int i = 0; i < n; ++i) {
            const int cls = i % num_classes;
            Tensor base = prototypes[static_cast<std::size_t>(cls)];
            for (int ch = 0; ch < 3; ++ch)
                detail::add_smooth_field(&base(ch, 0, 0), size, 4, 0.35, rng);
            double* dst = &out.inputs.data[static_cast<std::size_t>(i) * len];
            for (std::size_t k = 0; k < len; ++k) {
                double v = base.data[k];
                if (noise > 0.0) v += noise * rng.normal();
                dst[k] = std::clamp(v, 0.0, 1.0);
            }
            out.labels[static_cast<std::size_t>(i)] = cls;
        }
        return out;
    };

    Dataset d;
    d.name = "synthetic-prototypes";
    d.num_classes = num_classes;
    Rng train_rng = root.substream("train");
    Rng test_rng = root.substream("test");
    if (n_train > 0) d.train = make_split(n_train, train_rng);
    if (n_test > 0) d.test = make_split(n_test, test_rng);
    return d;
}

/// Synthetic planted-transformation dataset: classes come in pairs where
/// class B is a dihedral transform (vertical reflection) of class A plus
/// noise. Prototypes are horizontally symmetric, so horizontal flips occur
/// naturally and stay class-preserving while rotations carry class
/// information.
inline Dataset generate_synthetic(int n_train, int n_test, int size, int num_classes,
                                  double noise, std::uint64_t seed) {
    if (size < 3) throw input_error("generate_synthetic: size must be >= 3");
    if (num_classes < 2 || num_classes % 2 != 0)
        throw input_error("generate_synthetic: num_classes must be even and >= 2");

    const DihedralElement planted = kVerticalFlip;
    Rng root(seed);
    Rng proto_rng = root.substream("prototypes");

    std::vector<Tensor> prototypes;
    for (int p = 0; p < num_classes / 2; ++p) {
        Tensor proto = Tensor::full({3, size, size}, 0.5);
        for (int ch = 0; ch < 3; ++ch) {
            detail::add_smooth_field(&proto(ch, 0, 0), size, 4, 0.45, proto_rng);
            detail::mirror_symmetrize(&proto(ch, 0, 0), size);
        }
        prototypes.push_back(std::move(proto));
    }

    Dataset d;
    d.name = "synthetic";
    d.num_classes = num_classes;
    d.planted_transform = element_name(planted);
    Rng train_rng = root.substream("train");
    Rng test_rng = root.substream("test");
    if (n_train > 0)
        d.train = detail::synth_split(prototypes, planted, n_train, size, noise, train_rng);
    if (n_test > 0) d.test = detail::synth_split(prototypes, planted, n_test, size, noise, test_rng);
    return d;
}

}  // namespace transnet
