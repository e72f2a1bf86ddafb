#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "qrag/core.hpp"

namespace qrag {

// Either Select(doc_index) with doc_index >= 1, or Stop (value 0).
struct ActionId {
    int32_t value = 0;

    static ActionId select(int32_t doc_index) { return ActionId{doc_index}; }
    static ActionId stop() { return ActionId{0}; }

    bool is_stop() const { return value == 0; }
    int32_t doc_index() const { return value; }

    bool operator==(const ActionId&) const = default;
};

// Episode snapshot. A plain value: copying it forks the episode, so parallel
// environments and beam search need no coordination.
struct EpisodeState {
    std::vector<int32_t> selected;   // ascending doc indices
    std::vector<int32_t> remaining;  // ascending doc indices
    int32_t step = 0;                // == selected.size()
    int32_t budget = 0;
    bool done = false;
};

struct EnvOptions {
    bool stop_enabled = false;
    // When true the episode ends as soon as every support fact has been
    // selected, instead of running out the full budget.
    bool terminate_on_collection = false;
};

struct StepOutcome {
    EpisodeState state;
    double reward = 0.0;
    bool done = false;
};

// 1.0 iff every support fact is among the selected chunks. Total on done
// states; an empty support set is trivially covered.
inline double terminal_reward(const EpisodeState& state, const std::set<int32_t>& support_ids) {
    for (int32_t s : support_ids) {
        if (!std::binary_search(state.selected.begin(), state.selected.end(), s)) return 0.0;
    }
    return 1.0;
}

inline EpisodeState reset_episode(const TaskInstance& instance, int32_t budget) {
    if (budget < 1) throw InvalidArgument("episode budget must be >= 1");
    instance.validate();
    EpisodeState s;
    s.budget = budget;
    s.remaining.resize(instance.context.size());
    for (int32_t i = 0; i < instance.num_chunks(); ++i) s.remaining[i] = i + 1;
    return s;
}

// Deterministic transition. Select(i) moves i from remaining to selected
// (document order preserved); Stop freezes the state. The terminal reward is
// granted on the transition where done first becomes true and is 0 elsewhere.
inline StepOutcome step_episode(const EpisodeState& state, ActionId action,
                                const TaskInstance& instance, const EnvOptions& opts = {}) {
    if (state.done) throw EpisodeError("step on a finished episode");

    StepOutcome out;
    out.state = state;
    EpisodeState& s = out.state;

    if (action.is_stop()) {
        s.done = true;
    } else {
        const int32_t idx = action.doc_index();
        auto it = std::lower_bound(s.remaining.begin(), s.remaining.end(), idx);
        if (it == s.remaining.end() || *it != idx)
            throw EpisodeError("action " + std::to_string(idx) + " is not available");
        s.remaining.erase(it);
        s.selected.insert(std::upper_bound(s.selected.begin(), s.selected.end(), idx), idx);
        s.step += 1;
        s.done = (s.step >= s.budget) || s.remaining.empty();
        if (opts.terminate_on_collection && !s.done)
            s.done = terminal_reward(s, instance.support_ids) == 1.0;
    }

    out.done = s.done;
    out.reward = s.done ? terminal_reward(s, instance.support_ids) : 0.0;
    return out;
}

}  // namespace qrag
