#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "cpdr/network.hpp"

namespace cpdr {

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(os, v);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is) {
    std::uint64_t v = get_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

} // namespace detail

// Digest of the weight-shaping parts of the configuration. The seed is
// deliberately excluded: a checkpoint is loadable into any model whose
// topology matches, regardless of how it was initialized.
inline std::uint64_t config_digest(const ModelConfig& cfg) {
    std::string key = "arch=" + to_string(cfg.arch) + ";refine=" + to_string(cfg.refine) +
                      ";widths=";
    for (std::size_t i = 0; i < cfg.backbone_widths.size(); ++i)
        key += (i ? "," : "") + std::to_string(cfg.backbone_widths[i]);
    key += ";decoder=" + std::to_string(cfg.decoder_width);
    key += ";input=" + std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w);
    return detail::fnv1a(key);
}

// Layout: "CPDR" magic, u32 version, u64 config digest, u32 record count,
// then per parameter: u32 name length, name bytes, u32 n/c/h/w, values as
// little-endian 64-bit doubles. Round-trips bit-exactly.
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const CPDRModel& model) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write("CPDR", 4);
    detail::put_u32(os, kCheckpointVersion);
    detail::put_u64(os, config_digest(model.config()));
    const ParamSet& ps = model.params();
    detail::put_u32(os, static_cast<std::uint32_t>(ps.size()));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const std::string& name = ps.name(i);
        Tensor t = ps.tensor(i);
        detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Shape& s = t.shape();
        detail::put_u32(os, static_cast<std::uint32_t>(s.n));
        detail::put_u32(os, static_cast<std::uint32_t>(s.c));
        detail::put_u32(os, static_cast<std::uint32_t>(s.h));
        detail::put_u32(os, static_cast<std::uint32_t>(s.w));
        for (long j = 0; j < t.numel(); ++j) detail::put_f64(os, t.data()[j]);
    }
    if (!os) throw IoError("write failed for " + path);
}

inline void load_checkpoint(const std::string& path, CPDRModel& model) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "CPDR", 4) != 0)
        throw ConfigError(path + " is not a model checkpoint");
    std::uint32_t version = detail::get_u32(is);
    if (version != kCheckpointVersion)
        throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    std::uint64_t digest = detail::get_u64(is);
    if (digest != config_digest(model.config()))
        throw ConfigError("checkpoint topology does not match the configured model");
    std::uint32_t count = detail::get_u32(is);
    ParamSet& ps = model.params();
    if (count != ps.size())
        throw ConfigError("checkpoint holds " + std::to_string(count) +
                          " parameters, model has " + std::to_string(ps.size()));
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t len = detail::get_u32(is);
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw IoError("checkpoint truncated");
        long idx = ps.find(name);
        if (idx < 0) throw ConfigError("checkpoint parameter " + name + " not in model");
        Tensor t = ps.tensor(static_cast<std::size_t>(idx));
        Shape s{static_cast<long>(detail::get_u32(is)), static_cast<long>(detail::get_u32(is)),
                static_cast<long>(detail::get_u32(is)), static_cast<long>(detail::get_u32(is))};
        if (!(s == t.shape()))
            throw ConfigError("checkpoint shape mismatch for " + name);
        for (long j = 0; j < t.numel(); ++j) t.data()[j] = detail::get_f64(is);
    }
}

} // namespace cpdr
