#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "qrag/common.hpp"
#include "qrag/rng.hpp"
#include "qrag/tensor.hpp"

namespace qrag {

// p_i proportional to exp((q_i - max q) / alpha). The max shift keeps the
// exponentials in range for any score magnitude.
inline Vec boltzmann_probs(const Vec& q, double alpha) {
    if (q.empty()) throw InvalidArgument("boltzmann_probs: empty scores");
    if (!(alpha > 0.0)) throw InvalidArgument("boltzmann_probs: alpha must be > 0");
    const double qmax = *std::max_element(q.begin(), q.end());
    Vec p(q.size());
    double total = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        p[i] = std::exp((q[i] - qmax) / alpha);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

struct SampledAction {
    size_t index = 0;
    Vec probs;
};

// Samples an index from the Boltzmann distribution over q at temperature
// alpha. alpha = 0 degenerates to argmax with lowest-index tie-breaking and
// a one-hot probability vector.
inline SampledAction boltzmann_sample(const Vec& q, double alpha, Rng& rng) {
    if (q.empty()) throw InvalidArgument("boltzmann_sample: empty scores");
    if (alpha < 0.0) throw InvalidArgument("boltzmann_sample: alpha must be >= 0");
    SampledAction out;
    if (alpha == 0.0) {
        out.index = static_cast<size_t>(std::max_element(q.begin(), q.end()) - q.begin());
        out.probs = Vec(q.size(), 0.0);
        out.probs[out.index] = 1.0;
        return out;
    }
    out.probs = boltzmann_probs(q, alpha);
    const double u = rng_double(rng);
    double acc = 0.0;
    for (size_t i = 0; i < out.probs.size(); ++i) {
        acc += out.probs[i];
        if (u < acc) {
            out.index = i;
            return out;
        }
    }
    out.index = out.probs.size() - 1;  // u landed in the round-off tail
    return out;
}

// V = alpha * log sum_i exp(q_i / alpha), computed max-shifted.
inline double soft_value(const Vec& q, double alpha) {
    if (q.empty()) throw InvalidArgument("soft_value: empty scores");
    if (!(alpha > 0.0)) throw InvalidArgument("soft_value: alpha must be > 0");
    const double qmax = *std::max_element(q.begin(), q.end());
    double total = 0.0;
    for (double v : q) total += std::exp((v - qmax) / alpha);
    return qmax + alpha * std::log(total);
}

// Hard-max value, used by the ablation that disables the soft backup.
inline double hard_value(const Vec& q) {
    if (q.empty()) throw InvalidArgument("hard_value: empty scores");
    return *std::max_element(q.begin(), q.end());
}

// Argmax with lowest-index tie-breaking, except with probability epsilon a
// uniformly random index.
inline size_t epsilon_greedy_sample(const Vec& q, double epsilon, Rng& rng) {
    if (q.empty()) throw InvalidArgument("epsilon_greedy_sample: empty scores");
    if (epsilon < 0.0 || epsilon > 1.0)
        throw InvalidArgument("epsilon_greedy_sample: epsilon out of [0,1]");
    if (epsilon > 0.0 && rng_double(rng) < epsilon)
        return static_cast<size_t>(rng_below(rng, q.size()));
    return static_cast<size_t>(std::max_element(q.begin(), q.end()) - q.begin());
}

}  // namespace qrag
