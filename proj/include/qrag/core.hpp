#pragma once

#include <set>
#include <string>
#include <vector>

#include "qrag/common.hpp"

namespace qrag {

// One contiguous segment of the long context; the atomic retrieval unit.
struct Chunk {
    int32_t doc_index = 0;  // 1-based position in document order
    std::string text;
    bool is_support = false;
};

// A retrieval task: context chunks in document order, a query, the set of
// chunk indices sufficient to answer it, and the answer string (carried for
// tooling; the reward never reads it).
struct TaskInstance {
    std::string id;
    std::vector<Chunk> context;
    std::string query;
    std::set<int32_t> support_ids;
    std::string answer;

    int32_t num_chunks() const { return static_cast<int32_t>(context.size()); }

    // Enforces the structural invariants: contiguous 1..m doc indices,
    // support indices in range, is_support flags consistent.
    void validate(bool require_support = false) const {
        if (context.empty()) throw InvalidArgument("task '" + id + "': empty context");
        const int32_t m = num_chunks();
        for (int32_t i = 0; i < m; ++i) {
            if (context[i].doc_index != i + 1)
                throw InvalidArgument("task '" + id + "': doc_index must be contiguous 1..m");
        }
        if (require_support && support_ids.empty())
            throw InvalidArgument("task '" + id + "': training instance without support facts");
        for (int32_t s : support_ids) {
            if (s < 1 || s > m)
                throw InvalidArgument("task '" + id + "': support index " + std::to_string(s) +
                                      " out of range 1.." + std::to_string(m));
        }
        for (const Chunk& c : context) {
            const bool in_support = support_ids.count(c.doc_index) > 0;
            if (c.is_support != in_support)
                throw InvalidArgument("task '" + id + "': is_support flag inconsistent at chunk " +
                                      std::to_string(c.doc_index));
        }
    }
};

}  // namespace qrag
