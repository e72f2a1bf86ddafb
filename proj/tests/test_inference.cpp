#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "qrag/qrag.hpp"

using namespace qrag;

namespace {

TaskInstance numbered_instance(int32_t m, const std::set<int32_t>& support) {
    TaskInstance inst;
    inst.id = "synthetic";
    inst.query = "which chunks matter";
    inst.context.resize(m);
    for (int32_t i = 0; i < m; ++i) {
        inst.context[i].doc_index = i + 1;
        inst.context[i].text = "chunk number " + std::to_string(i + 1) + " of the document";
        inst.context[i].is_support = support.count(i + 1) > 0;
    }
    inst.support_ids = support;
    inst.answer = "n/a";
    return inst;
}

EncoderConfig small_config(bool stop_enabled = false) {
    EncoderConfig cfg;
    cfg.dim = 8;
    cfg.hidden = 8;
    cfg.buckets = 64;
    cfg.order_tags = 3;
    cfg.stop_enabled = stop_enabled;
    return cfg;
}

TaskInstance random_instance(Rng& rng, int32_t m) {
    std::set<int32_t> support;
    const int32_t k = 1 + static_cast<int32_t>(rng_below(rng, 2));
    while (static_cast<int32_t>(support.size()) < k)
        support.insert(1 + static_cast<int32_t>(rng_below(rng, m)));
    return numbered_instance(m, support);
}

// Exhaustive enumeration of every trajectory: the reference optimum for the
// beam. Collects all final selections whose cumulative Q ties the best.
struct BruteResult {
    double best = -1e300;
    std::vector<std::vector<int32_t>> best_sets;
};

void brute_dfs(const EpisodeState& state, double score, const TaskInstance& inst,
               const EncoderConfig& cfg, const EncoderParams& params, const EpisodeCache& cache,
               BruteResult& out) {
    if (state.done) {
        if (score > out.best + 1e-9) {
            out.best = score;
            out.best_sets.assign(1, state.selected);
        } else if (std::abs(score - out.best) <= 1e-9) {
            out.best_sets.push_back(state.selected);
        }
        return;
    }
    std::vector<int32_t> cand_ids = state.remaining;
    if (cfg.stop_enabled) cand_ids.insert(cand_ids.begin(), 0);
    const Vec rhos = candidate_rhos(cand_ids, state.selected, inst.num_chunks(), cfg);
    const Vec q = score_actions(params, cache, state.selected, cand_ids, rhos, cfg);
    for (size_t i = 0; i < cand_ids.size(); ++i) {
        const ActionId action =
            cand_ids[i] == 0 ? ActionId::stop() : ActionId::select(cand_ids[i]);
        const StepOutcome next =
            step_episode(state, action, inst, EnvOptions{cfg.stop_enabled, false});
        brute_dfs(next.state, score + q[i], inst, cfg, params, cache, out);
    }
}

BruteResult brute_force(const TaskInstance& inst, const EncoderConfig& cfg,
                        const EncoderParams& params, int32_t budget) {
    const Featurizer featurizer(cfg.featurizer_config());
    const EpisodeCache cache = make_episode_cache(inst, featurizer, params);
    BruteResult out;
    brute_dfs(reset_episode(inst, budget), 0.0, inst, cfg, params, cache, out);
    return out;
}

}  // namespace

TEST_CASE("width one reproduces greedy retrieval") {
    Rng rng(derive_seed(23, "beam_greedy"));
    for (bool stop : {false, true}) {
        const EncoderConfig cfg = small_config(stop);
        for (int trial = 0; trial < 25; ++trial) {
            const int32_t m = 3 + static_cast<int32_t>(rng_below(rng, 6));
            const TaskInstance inst = random_instance(rng, m);
            const EncoderParams params = init_params(cfg, derive_seed(23, "bp", trial));
            const int32_t budget = 1 + static_cast<int32_t>(rng_below(rng, 3));

            const std::vector<int32_t> greedy = greedy_retrieve(inst, cfg, params, budget);
            const BeamResult beam = beam_search(inst, cfg, params, budget, 1);
            CHECK(beam.selected == greedy);
            CHECK_FALSE(beam.width_clamped);
        }
    }
}

TEST_CASE("exhaustive beams recover the brute-force optimum") {
    Rng rng(derive_seed(29, "beam_brute"));
    for (bool stop : {false, true}) {
        const EncoderConfig cfg = small_config(stop);
        for (int trial = 0; trial < 10; ++trial) {
            const int32_t m = 3 + static_cast<int32_t>(rng_below(rng, 4));
            const TaskInstance inst = random_instance(rng, m);
            const EncoderParams params = init_params(cfg, derive_seed(29, "bb", trial));
            const int32_t budget = 1 + static_cast<int32_t>(rng_below(rng, 3));

            int64_t exhaustive = 1;
            for (int32_t t = 0; t < budget; ++t) exhaustive *= m + (stop ? 1 : 0);

            const BeamResult beam = beam_search(inst, cfg, params, budget, exhaustive);
            const BruteResult brute = brute_force(inst, cfg, params, budget);

            CHECK(beam.score == Catch::Approx(brute.best).margin(1e-9));
            const bool matches_an_optimum =
                std::find(brute.best_sets.begin(), brute.best_sets.end(), beam.selected) !=
                brute.best_sets.end();
            CHECK(matches_an_optimum);
        }
    }
}

TEST_CASE("beam score never decreases with width at depth two") {
    Rng rng(derive_seed(31, "beam_mono"));
    const EncoderConfig cfg = small_config(false);
    for (int trial = 0; trial < 10; ++trial) {
        const TaskInstance inst = random_instance(rng, 6);
        const EncoderParams params = init_params(cfg, derive_seed(31, "bm", trial));
        double prev = -1e300;
        for (int64_t width : {1, 2, 3, 4, 8, 16, 36}) {
            const double s = beam_search(inst, cfg, params, 2, width).score;
            CHECK(s >= prev - 1e-12);
            prev = s;
        }
    }
}

TEST_CASE("widths beyond the trajectory bound clamp with identical results") {
    const EncoderConfig cfg = small_config(false);
    const TaskInstance inst = numbered_instance(4, {2});
    const EncoderParams params = init_params(cfg, 3);

    const BeamResult at_bound = beam_search(inst, cfg, params, 2, 16);  // 4^2 trajectories
    CHECK_FALSE(at_bound.width_clamped);
    const BeamResult beyond = beam_search(inst, cfg, params, 2, 1000000000);
    CHECK(beyond.width_clamped);
    CHECK(beyond.selected == at_bound.selected);
    CHECK(beyond.score == at_bound.score);
}

TEST_CASE("beam selections never repeat a chunk") {
    Rng rng(derive_seed(37, "beam_norep"));
    const EncoderConfig cfg = small_config(true);
    for (int trial = 0; trial < 10; ++trial) {
        const TaskInstance inst = random_instance(rng, 6);
        const EncoderParams params = init_params(cfg, derive_seed(37, "bn", trial));
        const BeamResult beam = beam_search(inst, cfg, params, 3, 5);
        CHECK(std::is_sorted(beam.selected.begin(), beam.selected.end()));
        CHECK(std::adjacent_find(beam.selected.begin(), beam.selected.end()) ==
              beam.selected.end());
        CHECK(beam.selected.size() <= 3);
    }
}

TEST_CASE("retrieval is invariant to positive rescaling of the action head") {
    const EncoderConfig cfg = small_config(true);
    const TaskInstance inst = numbered_instance(8, {3, 6});
    const EncoderParams params = init_params(cfg, 17);

    EncoderParams scaled = params;
    const double c = 3.7;
    for (double& w : scaled.action_net.w2.data) w *= c;
    for (double& w : scaled.action_net.b2) w *= c;
    for (double& w : scaled.stop_embed) w *= c;

    CHECK(greedy_retrieve(inst, cfg, params, 3) == greedy_retrieve(inst, cfg, scaled, 3));
    const BeamResult a = beam_search(inst, cfg, params, 3, 4);
    const BeamResult b = beam_search(inst, cfg, scaled, 3, 4);
    CHECK(a.selected == b.selected);
    CHECK(b.score == Catch::Approx(c * a.score).margin(1e-9));
}

TEST_CASE("cached content scores match re-encoded scores") {
    const EncoderConfig cfg = small_config(true);
    const TaskInstance inst = numbered_instance(6, {2});
    const EncoderParams params = init_params(cfg, 19);
    const Featurizer featurizer(cfg.featurizer_config());
    const EpisodeCache cache = make_episode_cache(inst, featurizer, params);

    const std::vector<int32_t> selected = {2, 5};
    const std::vector<int32_t> cand_ids = {0, 1, 3, 4, 6};
    const Vec rhos = candidate_rhos(cand_ids, selected, inst.num_chunks(), cfg);
    const FeatureVector sf = state_features_for(cache, selected, cfg);

    const Vec cached = score_actions(params, cache, sf, cand_ids, rhos);
    std::vector<const FeatureVector*> ptrs;
    for (int32_t id : cand_ids)
        ptrs.push_back(id == 0 ? nullptr : &cache.chunk_features[id - 1]);
    const Vec fresh = score_candidates(params, sf, ptrs, rhos);
    REQUIRE(cached.size() == fresh.size());
    for (size_t i = 0; i < cached.size(); ++i)
        CHECK(cached[i] == Catch::Approx(fresh[i]).margin(1e-12));
}

TEST_CASE("sampled retrieval is deterministic per seed") {
    const EncoderConfig cfg = small_config(false);
    const TaskInstance inst = numbered_instance(8, {3, 6});
    const EncoderParams params = init_params(cfg, 13);

    const std::vector<int32_t> a = sampled_retrieve(inst, cfg, params, 3, 0.5, 42);
    const std::vector<int32_t> b = sampled_retrieve(inst, cfg, params, 3, 0.5, 42);
    CHECK(a == b);
    CHECK(a.size() == 3);
    CHECK(std::is_sorted(a.begin(), a.end()));

    // at zero temperature sampling collapses onto greedy
    CHECK(sampled_retrieve(inst, cfg, params, 3, 0.0, 1) ==
          greedy_retrieve(inst, cfg, params, 3));
}

TEST_CASE("retrieval metrics on the worked example") {
    const RetrievalMetrics m = evaluate_retrieval({1, 2}, {2, 3});
    CHECK(m.precision == Catch::Approx(0.5).margin(1e-12));
    CHECK(m.recall == Catch::Approx(0.5).margin(1e-12));
    CHECK(m.f1 == Catch::Approx(0.5).margin(1e-12));
    CHECK(m.em == 0.0);

    const RetrievalMetrics exact = evaluate_retrieval({3, 2}, {2, 3});
    CHECK(exact.f1 == 1.0);
    CHECK(exact.em == 1.0);

    const RetrievalMetrics both_empty = evaluate_retrieval({}, {});
    CHECK(both_empty.recall == 1.0);
    CHECK(both_empty.precision == 1.0);
    CHECK(both_empty.f1 == 1.0);
    CHECK(both_empty.em == 1.0);

    const RetrievalMetrics miss = evaluate_retrieval({}, {1});
    CHECK(miss.recall == 0.0);
    CHECK(miss.f1 == 0.0);
    CHECK(miss.em == 0.0);

    const RetrievalMetrics noise = evaluate_retrieval({4, 4, 5}, {});
    CHECK(noise.precision == 0.0);
    CHECK(noise.recall == 0.0);
    CHECK(noise.em == 0.0);

    const RetrievalMetrics dup = evaluate_retrieval({2, 2, 3}, {2, 3});
    CHECK(dup.em == 1.0);
}

TEST_CASE("inference input validation") {
    const EncoderConfig cfg = small_config(false);
    const TaskInstance inst = numbered_instance(4, {2});
    const EncoderParams params = init_params(cfg, 1);
    CHECK_THROWS_AS(greedy_retrieve(inst, cfg, params, 0), InvalidArgument);
    CHECK_THROWS_AS(sampled_retrieve(inst, cfg, params, 0, 0.5, 1), InvalidArgument);
    CHECK_THROWS_AS(beam_search(inst, cfg, params, 0, 1), InvalidArgument);
    CHECK_THROWS_AS(beam_search(inst, cfg, params, 1, 0), InvalidArgument);
}
