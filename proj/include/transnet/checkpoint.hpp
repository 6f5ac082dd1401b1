#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "transnet/model.hpp"

// Model checkpoint container: magic "TNET", format version, architecture
// descriptor, transform names per head, then the raw little-endian f64
// parameter payload in declaration order (conv layers, then heads). A JSON
// export (shapes + base64 payload) serves the invariance-probe workflow.

namespace transnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw format_error("checkpoint truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64_payload(std::ostream& os, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        os.write(reinterpret_cast<const char*>(b), 8);
    }
}

inline void get_f64_payload(std::istream& is, std::vector<double>& v) {
    for (double& d : v) {
        unsigned char b[8];
        if (!is.read(reinterpret_cast<char*>(b), 8)) throw format_error("checkpoint truncated");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        std::memcpy(&d, &bits, 8);
    }
}

inline std::string base64_encode(const unsigned char* data, std::size_t n) {
    static const char tab[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (std::size_t i = 0; i < n; i += 3) {
        std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
        if (i + 1 < n) v |= static_cast<std::uint32_t>(data[i + 1]) << 8;
        if (i + 2 < n) v |= data[i + 2];
        out += tab[(v >> 18) & 63];
        out += tab[(v >> 12) & 63];
        out += i + 1 < n ? tab[(v >> 6) & 63] : '=';
        out += i + 2 < n ? tab[v & 63] : '=';
    }
    return out;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const TransNetModel& m) {
    validate_model(m);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open checkpoint for writing: " + path);
    os.write("TNET", 4);
    detail::put_u32(os, kCheckpointVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(m.params.conv_layers.size()));
    for (const ConvLayer& cl : m.params.conv_layers) {
        detail::put_u32(os, static_cast<std::uint32_t>(cl.kernels.dim(0)));
        detail::put_u32(os, static_cast<std::uint32_t>(cl.kernels.dim(1)));
        detail::put_u32(os, static_cast<std::uint32_t>(cl.kernels.dim(2)));
        os.put(cl.relu_after ? 1 : 0);
        os.put(cl.pool_after ? 1 : 0);
    }
    detail::put_u32(os, static_cast<std::uint32_t>(m.params.heads.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(m.params.heads.front().weight.dim(0)));
    detail::put_u32(os, static_cast<std::uint32_t>(m.params.heads.front().weight.dim(1)));
    for (const DihedralElement& t : m.transforms) {
        const std::string name = element_name(t);
        os.put(static_cast<char>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (const ConvLayer& cl : m.params.conv_layers) {
        detail::put_f64_payload(os, cl.kernels.data);
        detail::put_f64_payload(os, cl.bias.data);
    }
    for (const Head& h : m.params.heads) {
        detail::put_f64_payload(os, h.weight.data);
        detail::put_f64_payload(os, h.bias.data);
    }
    if (!os) throw format_error("checkpoint write failed: " + path);
}

inline TransNetModel load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open checkpoint: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "TNET", 4) != 0)
        throw format_error("not a TNET checkpoint: " + path);
    const std::uint32_t version = detail::get_u32(is);
    if (version != kCheckpointVersion)
        throw format_error("unsupported checkpoint version " + std::to_string(version));

    TransNetModel m;
    const std::uint32_t n_layers = detail::get_u32(is);
    if (n_layers == 0 || n_layers > 1024) throw format_error("implausible layer count");
    struct LayerHdr {
        int c_out, c_in, k;
        bool relu, pool;
    };
    std::vector<LayerHdr> layer_hdrs;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        LayerHdr h;
        h.c_out = static_cast<int>(detail::get_u32(is));
        h.c_in = static_cast<int>(detail::get_u32(is));
        h.k = static_cast<int>(detail::get_u32(is));
        if (h.c_out <= 0 || h.c_in <= 0 || h.k <= 0 || h.k % 2 == 0)
            throw format_error("bad conv layer descriptor");
        int relu = is.get(), pool = is.get();
        if (relu < 0 || pool < 0) throw format_error("checkpoint truncated");
        h.relu = relu != 0;
        h.pool = pool != 0;
        layer_hdrs.push_back(h);
    }
    const std::uint32_t n_heads = detail::get_u32(is);
    const int num_classes = static_cast<int>(detail::get_u32(is));
    const int c_last = static_cast<int>(detail::get_u32(is));
    if (n_heads == 0 || n_heads > 1024 || num_classes <= 0 || c_last <= 0)
        throw format_error("bad head descriptor");
    for (std::uint32_t h = 0; h < n_heads; ++h) {
        const int len = is.get();
        if (len <= 0) throw format_error("checkpoint truncated");
        std::string name(static_cast<std::size_t>(len), '\0');
        if (!is.read(name.data(), len)) throw format_error("checkpoint truncated");
        m.transforms.push_back(parse_element(name));
    }
    for (const LayerHdr& h : layer_hdrs) {
        ConvLayer cl;
        cl.kernels = Tensor({h.c_out, h.c_in, h.k, h.k});
        detail::get_f64_payload(is, cl.kernels.data);
        cl.bias = Tensor({h.c_out});
        detail::get_f64_payload(is, cl.bias.data);
        cl.relu_after = h.relu;
        cl.pool_after = h.pool;
        m.params.conv_layers.push_back(std::move(cl));
    }
    for (std::uint32_t h = 0; h < n_heads; ++h) {
        Head head;
        head.weight = Tensor({num_classes, c_last});
        detail::get_f64_payload(is, head.weight.data);
        head.bias = Tensor({num_classes});
        detail::get_f64_payload(is, head.bias.data);
        m.params.heads.push_back(std::move(head));
    }
    try {
        validate_model(m);
    } catch (const std::exception& e) {
        throw format_error(std::string("inconsistent checkpoint: ") + e.what());
    }
    return m;
}

/// JSON export: shapes plus base64 of the same little-endian f64 payload.
inline void export_checkpoint_json(const std::string& path, const TransNetModel& m) {
    validate_model(m);
    nlohmann::json j;
    j["format"] = "tnet-json";
    j["version"] = kCheckpointVersion;
    j["layers"] = nlohmann::json::array();
    std::vector<double> payload;
    for (const ConvLayer& cl : m.params.conv_layers) {
        j["layers"].push_back({{"out_channels", cl.kernels.dim(0)},
                               {"in_channels", cl.kernels.dim(1)},
                               {"kernel_size", cl.kernels.dim(2)},
                               {"relu_after", cl.relu_after},
                               {"pool_after", cl.pool_after}});
        payload.insert(payload.end(), cl.kernels.data.begin(), cl.kernels.data.end());
        payload.insert(payload.end(), cl.bias.data.begin(), cl.bias.data.end());
    }
    j["num_classes"] = m.params.heads.front().weight.dim(0);
    j["features"] = m.params.heads.front().weight.dim(1);
    j["transforms"] = nlohmann::json::array();
    for (const DihedralElement& t : m.transforms) j["transforms"].push_back(element_name(t));
    for (const Head& h : m.params.heads) {
        payload.insert(payload.end(), h.weight.data.begin(), h.weight.data.end());
        payload.insert(payload.end(), h.bias.data.begin(), h.bias.data.end());
    }
    std::vector<unsigned char> bytes(payload.size() * 8);
    for (std::size_t i = 0; i < payload.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &payload[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    j["payload_b64"] = detail::base64_encode(bytes.data(), bytes.size());
    std::ofstream os(path);
    if (!os) throw format_error("cannot open JSON export for writing: " + path);
    os << j.dump(2) << "\n";
}

}  // namespace transnet
