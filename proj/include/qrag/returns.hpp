#pragma once

#include <cstdint>

#include "qrag/common.hpp"
#include "qrag/tensor.hpp"

namespace qrag {

// Lambda-return targets by backward recursion:
//
//   G_T = r_T + gamma * v_{T+1}
//   G_t = r_t + gamma * ((1 - lambda) * v_{t+1} + lambda * G_{t+1})
//
// rewards[i] holds r_{i+1} for i in 0..T-1 and values[i] holds v_{i+1} for
// i in 0..T, so values has one extra entry: the bootstrap v_{T+1} (zero when
// the episode terminated). Returns G_1..G_T in the same 0-based layout.
inline Vec compute_targets(const Vec& rewards, const Vec& values, double gamma, double lambda) {
    const size_t T = rewards.size();
    if (T == 0) throw InvalidArgument("compute_targets: empty trajectory");
    if (values.size() != T + 1)
        throw InvalidArgument("compute_targets: need one value per step plus a bootstrap");
    if (gamma < 0.0 || gamma > 1.0) throw InvalidArgument("compute_targets: gamma out of [0,1]");
    if (lambda < 0.0 || lambda > 1.0)
        throw InvalidArgument("compute_targets: lambda out of [0,1]");

    Vec g(T);
    g[T - 1] = rewards[T - 1] + gamma * values[T];
    for (size_t t = T - 1; t-- > 0;)
        g[t] = rewards[t] + gamma * ((1.0 - lambda) * values[t + 1] + lambda * g[t + 1]);
    return g;
}

}  // namespace qrag
