#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "qrag/common.hpp"
#include "qrag/rng.hpp"

namespace qrag {

using Vec = std::vector<double>;

// Dense row-major matrix. Vectors are stored as plain Vec; this type only
// exists for weight matrices.
struct Mat {
    int rows = 0;
    int cols = 0;
    Vec data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// y += M x  (M: out x in)
inline void matvec_acc(const Mat& m, const Vec& x, Vec& y) {
    for (int r = 0; r < m.rows; ++r) {
        const double* w = m.row(r);
        double acc = 0.0;
        for (int c = 0; c < m.cols; ++c) acc += w[c] * x[c];
        y[r] += acc;
    }
}

// Backward of y = M x: accumulates dM += dy x^T and dx += M^T dy.
inline void matvec_backward(const Mat& m, const Vec& x, const Vec& dy, Mat& dm, Vec& dx) {
    for (int r = 0; r < m.rows; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        double* wg = dm.row(r);
        const double* w = m.row(r);
        for (int c = 0; c < m.cols; ++c) {
            wg[c] += g * x[c];
            dx[c] += g * w[c];
        }
    }
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const Vec& v) { return std::sqrt(dot(v, v)); }

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void init_uniform(Mat& m, double scale, Rng& rng) {
    for (double& w : m.data) w = (2.0 * rng_double(rng) - 1.0) * scale;
}

// Xavier/Glorot uniform bound for an affine layer.
inline double glorot_scale(int fan_in, int fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace qrag
