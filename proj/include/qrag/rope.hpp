#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "qrag/common.hpp"
#include "qrag/tensor.hpp"

namespace qrag {

// Standard geometric frequency schedule: theta_j = base^(-2j/d), j = 0..d/2-1.
// Strictly positive and pairwise distinct.
inline Vec rope_frequencies(int dim, double base = 10000.0) {
    if (dim <= 0 || dim % 2 != 0) throw InvalidArgument("rope: dimension must be positive even");
    Vec freqs(dim / 2);
    for (int j = 0; j < dim / 2; ++j)
        freqs[j] = std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(dim));
    return freqs;
}

// Applies the block-diagonal rotation R_t in place: each pair
// (v[2j], v[2j+1]) is rotated by angle freqs[j] * t. An isometry for any t.
inline void rope_inplace(Vec& v, double t, const Vec& freqs) {
    if (v.size() != freqs.size() * 2)
        throw InvalidArgument("rope: vector dimension must be 2 * |freqs|");
    for (size_t j = 0; j < freqs.size(); ++j) {
        const double angle = freqs[j] * t;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double x = v[2 * j];
        const double y = v[2 * j + 1];
        v[2 * j] = c * x - s * y;
        v[2 * j + 1] = s * x + c * y;
    }
}

inline Vec rope(const Vec& v, double t, const Vec& freqs) {
    Vec out = v;
    rope_inplace(out, t, freqs);
    return out;
}

// <a, R_t b> without materializing the rotated vector.
inline double rope_dot(const Vec& a, const Vec& b, double t, const Vec& freqs) {
    double acc = 0.0;
    for (size_t j = 0; j < freqs.size(); ++j) {
        const double angle = freqs[j] * t;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double bx = b[2 * j], by = b[2 * j + 1];
        acc += a[2 * j] * (c * bx - s * by) + a[2 * j + 1] * (s * bx + c * by);
    }
    return acc;
}

}  // namespace qrag
