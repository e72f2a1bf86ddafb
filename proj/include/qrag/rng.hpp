#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "qrag/common.hpp"

namespace qrag {

using Rng = std::mt19937_64;

// FNV-1a over bytes. Used both for feature hashing and seed derivation so
// every stream is reproducible from (master seed, purpose, indices).
inline uint64_t fnv1a(std::string_view bytes, uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a_u64(uint64_t v, uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= v & 0xffu;
        h *= 1099511628211ull;
        v >>= 8;
    }
    return h;
}

// Derives an independent stream seed. Distinct purpose tags give disjoint
// seed namespaces (e.g. "train" rollouts never collide with "eval" instances).
inline uint64_t derive_seed(uint64_t master, std::string_view purpose,
                            uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = fnv1a(purpose);
    h = fnv1a_u64(master, h);
    h = fnv1a_u64(a, h);
    h = fnv1a_u64(b, h);
    return h;
}

// Uniform integer in [0, n). Avoids std::uniform_int_distribution, whose
// output is implementation-defined; this keeps generated artifacts
// byte-identical across standard libraries.
inline uint64_t rng_below(Rng& rng, uint64_t n) {
    if (n == 0) throw InvalidArgument("rng_below: n must be > 0");
    return rng() % n;
}

inline int rng_int(Rng& rng, int lo, int hi_inclusive) {
    return lo + static_cast<int>(rng_below(rng, static_cast<uint64_t>(hi_inclusive - lo + 1)));
}

// Uniform double in [0, 1) with 53 random bits.
inline double rng_double(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Portable Box-Muller normal sample.
inline double rng_normal(Rng& rng) {
    double u1 = rng_double(rng);
    double u2 = rng_double(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace qrag
