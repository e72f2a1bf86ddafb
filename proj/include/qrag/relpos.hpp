#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "qrag/common.hpp"

namespace qrag {

// Piecewise-linear re-indexing of chunk positions relative to the already
// selected facts. Selected indices i_1 < ... < i_k split the document into
// k+1 intervals with boundaries b_0=1, b_j=i_j, b_{k+1}=m+1; a chunk at
// position i in interval j maps to
//
//   rho(i) = j*delta + ell * (i - b_j) / (b_{j+1} - b_j).
//
// Every value lies in [0, k*delta + ell) regardless of the document length,
// which is what lets a model trained on short contexts score positions in
// arbitrarily long ones.
struct RelPosMap {
    std::vector<int64_t> boundaries;  // b_0 .. b_{k+1}
    double delta = 10.0;
    double ell = 9.0;

    int32_t intervals() const { return static_cast<int32_t>(boundaries.size()) - 1; }

    double rho(int64_t i) const {
        const int64_t m = boundaries.back() - 1;
        if (i < 1 || i > m)
            throw InvalidArgument("rho: index " + std::to_string(i) + " outside 1.." +
                                  std::to_string(m));
        // unique j with b_j <= i < b_{j+1}
        auto it = std::upper_bound(boundaries.begin(), boundaries.end(), i);
        const auto j = static_cast<int64_t>(it - boundaries.begin()) - 1;
        const double lo = static_cast<double>(boundaries[j]);
        const double hi = static_cast<double>(boundaries[j + 1]);
        return static_cast<double>(j) * delta + ell * (static_cast<double>(i) - lo) / (hi - lo);
    }

    // Interval index containing i; equals floor(rho(i) / delta).
    int32_t interval_of(int64_t i) const {
        auto it = std::upper_bound(boundaries.begin(), boundaries.end(), i);
        return static_cast<int32_t>(it - boundaries.begin()) - 1;
    }
};

// Builds the mapping for a sorted set of selected indices S_t over a
// document of m chunks. Requires 0 < ell < delta so intervals never overlap
// in rho space.
inline RelPosMap rel_pos_map(const std::vector<int32_t>& selected_sorted, int64_t m,
                             double delta = 10.0, double ell = 9.0) {
    if (m < 1) throw InvalidArgument("rel_pos_map: m must be >= 1");
    if (!(ell > 0.0 && ell < delta))
        throw InvalidArgument("rel_pos_map: need 0 < ell < delta");
    RelPosMap map;
    map.delta = delta;
    map.ell = ell;
    map.boundaries.reserve(selected_sorted.size() + 2);
    map.boundaries.push_back(1);
    int32_t prev = 0;
    for (int32_t i : selected_sorted) {
        if (i < 1 || i > m) throw InvalidArgument("rel_pos_map: selected index out of range");
        if (i <= prev) throw InvalidArgument("rel_pos_map: selected indices must be ascending");
        prev = i;
        // b_1 may equal b_0 when chunk 1 is selected; the empty interval is
        // skipped by upper_bound and keeps j aligned with selection ranks.
        map.boundaries.push_back(i);
    }
    map.boundaries.push_back(m + 1);
    return map;
}

}  // namespace qrag
