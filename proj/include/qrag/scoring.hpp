#pragma once

#include <cstdint>
#include <vector>

#include "qrag/common.hpp"
#include "qrag/core.hpp"
#include "qrag/encoder.hpp"
#include "qrag/featurize.hpp"
#include "qrag/relpos.hpp"

namespace qrag {

// Featurized instance plus content vectors encoded once per episode; every
// later step only re-encodes the state side and rotates cached content.
struct EpisodeCache {
    FeatureVector query_features;
    std::vector<FeatureVector> chunk_features;  // by doc index - 1
    std::vector<Vec> content;                   // encoded content vectors
};

inline EpisodeCache make_episode_cache(const TaskInstance& inst, const Featurizer& featurizer,
                                       const EncoderParams& params) {
    EpisodeCache cache;
    cache.query_features = featurizer.featurize(inst.query);
    cache.chunk_features.resize(inst.num_chunks());
    cache.content.resize(inst.num_chunks());
    for (int32_t i = 0; i < inst.num_chunks(); ++i) {
        cache.chunk_features[i] = featurizer.featurize(inst.context[i].text);
        cache.content[i] = encode_content(params, cache.chunk_features[i]);
    }
    return cache;
}

// rho for every candidate given the current selection; STOP (id 0) pins 0.
inline Vec candidate_rhos(const std::vector<int32_t>& cand_ids,
                          const std::vector<int32_t>& selected, int32_t m,
                          const EncoderConfig& cfg) {
    Vec rhos(cand_ids.size());
    if (cfg.position_mode == PositionMode::kAbsolute) {
        for (size_t i = 0; i < cand_ids.size(); ++i)
            rhos[i] = static_cast<double>(cand_ids[i]);  // STOP id 0 lands at 0
        return rhos;
    }
    const RelPosMap map = rel_pos_map(selected, m, cfg.delta, cfg.ell);
    for (size_t i = 0; i < cand_ids.size(); ++i)
        rhos[i] = cand_ids[i] == 0 ? 0.0 : map.rho(cand_ids[i]);
    return rhos;
}

inline FeatureVector state_features_for(const EpisodeCache& cache,
                                        const std::vector<int32_t>& selected,
                                        const EncoderConfig& cfg) {
    std::vector<const FeatureVector*> picked;
    picked.reserve(selected.size());
    for (int32_t id : selected) picked.push_back(&cache.chunk_features[id - 1]);
    return assemble_state_features(cache.query_features, picked, cfg);
}

// Q for each candidate action given pre-assembled state features, using the
// cached content vectors.
inline Vec score_actions(const EncoderParams& params, const EpisodeCache& cache,
                         const FeatureVector& state_features,
                         const std::vector<int32_t>& cand_ids, const Vec& rhos) {
    const Vec state_vec = encode_state(params, state_features);
    Vec q(cand_ids.size());
    for (size_t i = 0; i < cand_ids.size(); ++i) {
        const Vec& c = cand_ids[i] == 0 ? params.stop_embed : cache.content[cand_ids[i] - 1];
        q[i] = rope_dot(state_vec, c, rhos[i], params.freqs);
    }
    return q;
}

// Convenience overload that assembles the state features itself.
inline Vec score_actions(const EncoderParams& params, const EpisodeCache& cache,
                         const std::vector<int32_t>& selected,
                         const std::vector<int32_t>& cand_ids, const Vec& rhos,
                         const EncoderConfig& cfg) {
    return score_actions(params, cache, state_features_for(cache, selected, cfg), cand_ids,
                         rhos);
}

}  // namespace qrag
