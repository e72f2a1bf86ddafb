#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "qrag/common.hpp"
#include "qrag/encoder.hpp"
#include "qrag/optim.hpp"

namespace qrag {

namespace ckpt {

constexpr char kMagic[8] = {'Q', 'R', 'A', 'G', 'C', 'K', 'P', 'T'};
constexpr uint32_t kFormatVersion = 1;

// Fixed-width little-endian primitives. The build targets little-endian
// hosts; the byte swaps below are identity there and keep the format honest
// elsewhere.
inline void put_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("checkpoint truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void put_u32(std::ostream& out, uint32_t v) { put_u64(out, v); }
inline uint32_t get_u32(std::istream& in) {
    const uint64_t v = get_u64(in);
    if (v > UINT32_MAX) throw IoError("checkpoint field out of range");
    return static_cast<uint32_t>(v);
}

inline void put_i64(std::ostream& out, int64_t v) { put_u64(out, static_cast<uint64_t>(v)); }
inline int64_t get_i64(std::istream& in) { return static_cast<int64_t>(get_u64(in)); }

inline void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline double get_f64(std::istream& in) {
    const uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
    const uint64_t n = get_u64(in);
    if (n > (1ull << 20)) throw IoError("checkpoint string too long");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw IoError("checkpoint truncated");
    return s;
}

inline void put_vec(std::ostream& out, const Vec& v) {
    put_u64(out, v.size());
    for (double x : v) put_f64(out, x);
}

inline Vec get_vec(std::istream& in) {
    const uint64_t n = get_u64(in);
    if (n > (1ull << 28)) throw IoError("checkpoint tensor too large");
    Vec v(n);
    for (uint64_t i = 0; i < n; ++i) v[i] = get_f64(in);
    return v;
}

inline void put_config(std::ostream& out, const EncoderConfig& cfg) {
    put_i64(out, cfg.dim);
    put_i64(out, cfg.hidden);
    put_i64(out, cfg.buckets);
    put_i64(out, cfg.order_tags);
    put_f64(out, cfg.delta);
    put_f64(out, cfg.ell);
    put_u64(out, cfg.position_mode == PositionMode::kRelative ? 1 : 0);
    put_u64(out, cfg.stop_enabled ? 1 : 0);
    put_f64(out, cfg.rope_base);
    put_u64(out, cfg.feature_mode == FeatureMode::kHashedNgrams ? 0 : 1);
    put_i64(out, cfg.max_tokens);
}

inline EncoderConfig get_config(std::istream& in) {
    EncoderConfig cfg;
    cfg.dim = static_cast<int32_t>(get_i64(in));
    cfg.hidden = static_cast<int32_t>(get_i64(in));
    cfg.buckets = static_cast<int32_t>(get_i64(in));
    cfg.order_tags = static_cast<int32_t>(get_i64(in));
    cfg.delta = get_f64(in);
    cfg.ell = get_f64(in);
    cfg.position_mode = get_u64(in) ? PositionMode::kRelative : PositionMode::kAbsolute;
    cfg.stop_enabled = get_u64(in) != 0;
    cfg.rope_base = get_f64(in);
    cfg.feature_mode = get_u64(in) ? FeatureMode::kTokenIndex : FeatureMode::kHashedNgrams;
    cfg.max_tokens = static_cast<int32_t>(get_i64(in));
    cfg.validate();
    return cfg;
}

inline void put_params(std::ostream& out, const EncoderParams& params) {
    uint64_t count = 0;
    for_each_tensor(params, [&](const char*, const Vec&) { ++count; });
    put_u64(out, count);
    for_each_tensor(params, [&](const char* name, const Vec& w) {
        put_string(out, name);
        put_vec(out, w);
    });
}

inline void get_params(std::istream& in, EncoderParams& params) {
    const uint64_t count = get_u64(in);
    for (uint64_t i = 0; i < count; ++i) {
        const std::string name = get_string(in);
        const Vec data = get_vec(in);
        bool found = false;
        for_each_tensor(params, [&](const char* tname, Vec& w) {
            if (name != tname) return;
            found = true;
            if (w.size() != data.size())
                throw IoError("checkpoint tensor '" + name + "' has size " +
                              std::to_string(data.size()) + ", expected " +
                              std::to_string(w.size()));
            w = data;
        });
        if (!found) throw IoError("checkpoint has unknown tensor '" + name + "'");
    }
}

}  // namespace ckpt

struct Checkpoint {
    EncoderConfig encoder_cfg;
    EncoderParams params;
    EncoderParams target;
    OptimizerState opt_state;
};

inline void save_checkpoint(const std::string& path, const EncoderConfig& cfg,
                            const EncoderParams& params, const EncoderParams& target,
                            const OptimizerState& opt_state) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(ckpt::kMagic, sizeof(ckpt::kMagic));
    ckpt::put_u32(out, ckpt::kFormatVersion);
    ckpt::put_string(out, kVersion);
    ckpt::put_config(out, cfg);
    ckpt::put_params(out, params);
    ckpt::put_params(out, target);
    ckpt::put_i64(out, opt_state.step);
    ckpt::put_i64(out, opt_state.skipped);
    ckpt::put_u64(out, opt_state.m.size());
    for (const auto& [name, m] : opt_state.m) {
        ckpt::put_string(out, name);
        ckpt::put_vec(out, m);
        ckpt::put_vec(out, opt_state.v.at(name));
    }
    if (!out) throw IoError("write to " + path + " failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[sizeof(ckpt::kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, ckpt::kMagic, sizeof(magic)) != 0)
        throw IoError(path + " is not a checkpoint file");
    const uint32_t format = ckpt::get_u32(in);
    if (format != ckpt::kFormatVersion)
        throw IoError(path + " has checkpoint format " + std::to_string(format) +
                      ", this build reads " + std::to_string(ckpt::kFormatVersion));
    ckpt::get_string(in);  // writer version, informational

    Checkpoint c;
    c.encoder_cfg = ckpt::get_config(in);
    c.params = init_params(c.encoder_cfg, 0);
    ckpt::get_params(in, c.params);
    c.target = c.params;
    ckpt::get_params(in, c.target);
    c.opt_state.step = ckpt::get_i64(in);
    c.opt_state.skipped = ckpt::get_i64(in);
    const uint64_t tensors = ckpt::get_u64(in);
    for (uint64_t i = 0; i < tensors; ++i) {
        const std::string name = ckpt::get_string(in);
        c.opt_state.m[name] = ckpt::get_vec(in);
        c.opt_state.v[name] = ckpt::get_vec(in);
    }
    return c;
}

}  // namespace qrag
