#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <set>
#include <vector>

#include "qrag/common.hpp"
#include "qrag/core.hpp"
#include "qrag/encoder.hpp"
#include "qrag/env.hpp"
#include "qrag/policy.hpp"
#include "qrag/rng.hpp"
#include "qrag/scoring.hpp"

namespace qrag {

// Argmax retrieval: at each step picks the highest-Q action (ties break to
// the lowest doc index via the candidate ordering), honoring STOP when the
// config enables it. Returns selected chunk ids in document order.
inline std::vector<int32_t> greedy_retrieve(const TaskInstance& inst, const EncoderConfig& cfg,
                                            const EncoderParams& params, int32_t budget) {
    if (budget < 1) throw InvalidArgument("greedy_retrieve: budget must be >= 1");
    const Featurizer featurizer(cfg.featurizer_config());
    const EpisodeCache cache = make_episode_cache(inst, featurizer, params);
    const EnvOptions env_opts{cfg.stop_enabled, false};

    EpisodeState state = reset_episode(inst, budget);
    while (!state.done) {
        std::vector<int32_t> cand_ids = state.remaining;
        if (cfg.stop_enabled) cand_ids.insert(cand_ids.begin(), 0);
        const Vec rhos = candidate_rhos(cand_ids, state.selected, inst.num_chunks(), cfg);
        const Vec q = score_actions(params, cache, state.selected, cand_ids, rhos, cfg);
        const size_t pick =
            static_cast<size_t>(std::max_element(q.begin(), q.end()) - q.begin());
        const ActionId action =
            cand_ids[pick] == 0 ? ActionId::stop() : ActionId::select(cand_ids[pick]);
        state = step_episode(state, action, inst, env_opts).state;
    }
    return state.selected;
}

// Boltzmann-sampled retrieval at fixed temperature, for stochastic decoding.
inline std::vector<int32_t> sampled_retrieve(const TaskInstance& inst, const EncoderConfig& cfg,
                                             const EncoderParams& params, int32_t budget,
                                             double alpha, uint64_t seed) {
    if (budget < 1) throw InvalidArgument("sampled_retrieve: budget must be >= 1");
    const Featurizer featurizer(cfg.featurizer_config());
    const EpisodeCache cache = make_episode_cache(inst, featurizer, params);
    const EnvOptions env_opts{cfg.stop_enabled, false};
    Rng rng(derive_seed(seed, "sampled_retrieve"));

    EpisodeState state = reset_episode(inst, budget);
    while (!state.done) {
        std::vector<int32_t> cand_ids = state.remaining;
        if (cfg.stop_enabled) cand_ids.insert(cand_ids.begin(), 0);
        const Vec rhos = candidate_rhos(cand_ids, state.selected, inst.num_chunks(), cfg);
        const Vec q = score_actions(params, cache, state.selected, cand_ids, rhos, cfg);
        const size_t pick = boltzmann_sample(q, alpha, rng).index;
        const ActionId action =
            cand_ids[pick] == 0 ? ActionId::stop() : ActionId::select(cand_ids[pick]);
        state = step_episode(state, action, inst, env_opts).state;
    }
    return state.selected;
}

struct BeamResult {
    std::vector<int32_t> selected;  // document order
    double score = 0.0;             // cumulative Q along the trajectory
    bool width_clamped = false;
};

// Beam search over trajectories scored by cumulative Q. Each beam carries
// its own selection state, so relative rotations are recomputed per beam.
// A beam that takes STOP (or runs out of candidates) freezes and competes
// with expanding beams by final score. Ties at every cut keep the earlier
// (greedy-ordered) entry, which makes width 1 coincide with greedy_retrieve.
// A width of at least (m+stop)^T explores every trajectory and therefore
// returns the brute-force optimum; widths beyond that bound are clamped with
// a warning since the extra slots can never be filled.
inline BeamResult beam_search(const TaskInstance& inst, const EncoderConfig& cfg,
                              const EncoderParams& params, int32_t budget, int64_t width) {
    if (budget < 1) throw InvalidArgument("beam_search: budget must be >= 1");
    if (width < 1) throw InvalidArgument("beam_search: width must be >= 1");
    inst.validate(false);

    const Featurizer featurizer(cfg.featurizer_config());
    const EpisodeCache cache = make_episode_cache(inst, featurizer, params);
    const EnvOptions env_opts{cfg.stop_enabled, false};

    // trajectory-count bound (m+stop)^budget, saturated at a sanity cap that
    // keeps the expansion buffers in memory
    constexpr int64_t kWidthCap = int64_t{1} << 20;
    const int64_t actions = static_cast<int64_t>(inst.num_chunks()) + (cfg.stop_enabled ? 1 : 0);
    int64_t max_width = 1;
    for (int32_t t = 0; t < budget && max_width < kWidthCap; ++t) {
        if (max_width > kWidthCap / actions) {
            max_width = kWidthCap;
            break;
        }
        max_width *= actions;
    }
    max_width = std::min(max_width, kWidthCap);
    bool clamped = false;
    if (width > max_width) {
        std::cerr << "beam_search: width " << width << " clamped to " << max_width
                  << " (trajectory bound)\n";
        width = max_width;
        clamped = true;
    }

    struct Beam {
        EpisodeState state;
        double score = 0.0;
    };
    std::vector<Beam> beams{Beam{reset_episode(inst, budget), 0.0}};

    struct Expansion {
        size_t beam = 0;
        int32_t action = -1;  // candidate doc id, 0 = STOP, -1 = frozen carry-over
        double score = 0.0;
    };

    // stable on score, so earlier beams (greedy order) win exact ties; the
    // survivor set of iterated prunes equals one big sort-and-cut
    const auto by_score = [](const Expansion& a, const Expansion& b) {
        return a.score > b.score;
    };
    const size_t prune_at = static_cast<size_t>(std::max<int64_t>(2 * width, 4096));

    for (int32_t depth = 0; depth < budget; ++depth) {
        bool any_live = false;
        std::vector<Expansion> expansions;
        for (size_t b = 0; b < beams.size(); ++b) {
            if (beams[b].state.done) {
                expansions.push_back(Expansion{b, -1, beams[b].score});
                continue;
            }
            any_live = true;
            std::vector<int32_t> cand_ids = beams[b].state.remaining;
            if (cfg.stop_enabled) cand_ids.insert(cand_ids.begin(), 0);
            const Vec rhos =
                candidate_rhos(cand_ids, beams[b].state.selected, inst.num_chunks(), cfg);
            const Vec q =
                score_actions(params, cache, beams[b].state.selected, cand_ids, rhos, cfg);

            // this beam's top-`width` actions, ties to the lower index
            std::vector<size_t> order(cand_ids.size());
            std::iota(order.begin(), order.end(), size_t{0});
            const size_t take = std::min<size_t>(static_cast<size_t>(width), order.size());
            std::partial_sort(order.begin(), order.begin() + take, order.end(),
                              [&](size_t a, size_t c) {
                                  if (q[a] != q[c]) return q[a] > q[c];
                                  return a < c;
                              });
            for (size_t i = 0; i < take; ++i)
                expansions.push_back(
                    Expansion{b, cand_ids[order[i]], beams[b].score + q[order[i]]});

            if (expansions.size() > prune_at) {
                std::stable_sort(expansions.begin(), expansions.end(), by_score);
                expansions.resize(static_cast<size_t>(width));
            }
        }
        if (!any_live) break;

        // global cut
        std::stable_sort(expansions.begin(), expansions.end(), by_score);
        if (static_cast<int64_t>(expansions.size()) > width) expansions.resize(width);

        std::vector<Beam> next;
        next.reserve(expansions.size());
        for (const Expansion& e : expansions) {
            if (e.action < 0) {
                next.push_back(std::move(beams[e.beam]));
                continue;
            }
            Beam nb;
            nb.state = step_episode(beams[e.beam].state,
                                    e.action == 0 ? ActionId::stop() : ActionId::select(e.action),
                                    inst, env_opts)
                           .state;
            nb.score = e.score;
            next.push_back(std::move(nb));
        }
        beams = std::move(next);
    }

    const Beam* best = &beams.front();
    for (const Beam& b : beams)
        if (b.score > best->score) best = &b;

    BeamResult out;
    out.selected = best->state.selected;
    out.score = best->score;
    out.width_clamped = clamped;
    return out;
}

struct RetrievalMetrics {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double em = 0.0;
};

// Set-based metrics over doc indices. Two empty sets count as a perfect
// match; an empty prediction against a nonempty gold set scores zero.
inline RetrievalMetrics evaluate_retrieval(const std::vector<int32_t>& predicted,
                                           const std::set<int32_t>& support_ids) {
    const std::set<int32_t> pred(predicted.begin(), predicted.end());
    RetrievalMetrics m;
    if (pred.empty() && support_ids.empty()) {
        m.recall = m.precision = m.f1 = m.em = 1.0;
        return m;
    }
    int64_t hit = 0;
    for (int32_t id : pred)
        if (support_ids.count(id)) ++hit;
    m.precision = pred.empty() ? 0.0 : static_cast<double>(hit) / pred.size();
    m.recall = support_ids.empty() ? 0.0 : static_cast<double>(hit) / support_ids.size();
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.em = (pred == support_ids) ? 1.0 : 0.0;
    return m;
}

}  // namespace qrag
