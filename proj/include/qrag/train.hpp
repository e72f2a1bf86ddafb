#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qrag/common.hpp"
#include "qrag/core.hpp"
#include "qrag/encoder.hpp"
#include "qrag/env.hpp"
#include "qrag/featurize.hpp"
#include "qrag/optim.hpp"
#include "qrag/parallel.hpp"
#include "qrag/policy.hpp"
#include "qrag/relpos.hpp"
#include "qrag/returns.hpp"
#include "qrag/rng.hpp"
#include "qrag/scoring.hpp"

namespace qrag {

enum class Ablation {
    kNone,
    kNoTarget,    // target params copied from online params every update
    kNoSoftQ,     // hard-max backup with epsilon-greedy exploration
    kSft,         // per-step cross-entropy on the gold next support chunk
    kNoFinetune,  // no optimizer steps at all
};

inline const char* ablation_name(Ablation a) {
    switch (a) {
        case Ablation::kNone: return "none";
        case Ablation::kNoTarget: return "no_target";
        case Ablation::kNoSoftQ: return "no_soft_q";
        case Ablation::kSft: return "sft";
        case Ablation::kNoFinetune: return "no_ft";
    }
    throw InvalidArgument("unknown ablation");
}

inline Ablation ablation_from_name(const std::string& name) {
    if (name == "none") return Ablation::kNone;
    if (name == "no_target") return Ablation::kNoTarget;
    if (name == "no_soft_q") return Ablation::kNoSoftQ;
    if (name == "sft") return Ablation::kSft;
    if (name == "no_ft") return Ablation::kNoFinetune;
    throw InvalidArgument("unknown ablation: " + name);
}

struct TrainConfig {
    double gamma = 0.99;
    double alpha0 = 0.05;
    double lambda = 0.5;
    double tau = 0.02;
    int32_t envs = 12;   // K parallel episodes per micro-batch
    int32_t budget = 3;  // T retrieval steps
    double lr0 = 1.5e-5;
    int64_t warmup_steps = 1000;
    int64_t total_steps = 20000;
    double decay_floor_frac = 0.1;
    double clip_norm = 2.0;
    int32_t accum_steps = 8;
    int32_t batch_size = 0;  // alias for envs; 0 defers to `envs`
    double weight_decay = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double adam_eps = 1e-6;
    uint64_t seed = 0;
    bool anneal_alpha = true;
    double epsilon0 = 0.1;  // exploration rate for the hard-max ablation
    bool reward_at_collection = false;
    Ablation ablation = Ablation::kNone;
    int32_t threads = 1;

    int32_t envs_per_batch() const { return batch_size > 0 ? batch_size : envs; }

    void validate() const {
        if (gamma < 0.0 || gamma > 1.0) throw InvalidArgument("train: gamma out of [0,1]");
        if (lambda < 0.0 || lambda > 1.0) throw InvalidArgument("train: lambda out of [0,1]");
        if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("train: tau out of (0,1]");
        if (!(alpha0 > 0.0)) throw InvalidArgument("train: alpha0 must be > 0");
        if (envs_per_batch() < 1) throw InvalidArgument("train: need at least one environment");
        if (budget < 1) throw InvalidArgument("train: budget must be >= 1");
        if (accum_steps < 1) throw InvalidArgument("train: accum_steps must be >= 1");
        if (threads < 1) throw InvalidArgument("train: threads must be >= 1");
        if (!(lr0 > 0.0)) throw InvalidArgument("train: lr0 must be > 0");
    }

    ScheduleConfig schedule() const {
        ScheduleConfig s;
        s.lr0 = lr0;
        s.warmup_steps = warmup_steps;
        s.total_steps = total_steps;
        s.final_frac = decay_floor_frac;
        s.alpha0 = alpha0;
        s.anneal_alpha = anneal_alpha;
        return s;
    }

    OptimConfig optim() const {
        OptimConfig o;
        o.lr = lr0;
        o.beta1 = beta1;
        o.beta2 = beta2;
        o.eps = adam_eps;
        o.weight_decay = weight_decay;
        o.clip_norm = clip_norm;
        return o;
    }
};

// One recorded decision point. Padded steps past a terminal state keep
// valid = false with zero reward and value, so every trajectory spans the
// full budget and the target recursion sees aligned arrays.
struct StepRecord {
    FeatureVector state_features;
    std::vector<int32_t> cand_ids;  // doc indices; 0 encodes STOP
    Vec cand_rhos;
    int32_t chosen = -1;  // index into cand_ids
    double reward = 0.0;
    double value = 0.0;  // v_t: target-net soft value of s_t over A_t
    double q_behavior = 0.0;
    bool valid = false;
};

struct EnvTrajectory {
    FeatureVector query_features;
    std::vector<FeatureVector> chunk_features;  // by doc index - 1
    std::vector<int32_t> support_ids;           // ascending
    std::vector<StepRecord> steps;              // exactly `budget` entries
    double bootstrap_value = 0.0;               // v_{T+1}, zero if terminal
    double episode_return = 0.0;
    double recall = 0.0;
    std::vector<int32_t> final_selected;  // ascending doc indices
};

struct TrajectoryBatch {
    std::vector<EnvTrajectory> envs;
    int32_t budget = 0;
};

struct RolloutOptions {
    int32_t budget = 3;
    double alpha = 0.05;
    bool greedy = false;        // argmax actions (evaluation)
    bool hard_backup = false;   // v_t = max Q instead of soft value
    double epsilon = 0.0;       // epsilon-greedy when hard_backup is set
    bool reward_at_collection = false;
    uint64_t seed = 0;
    int32_t threads = 1;
};

// Plays one episode per instance under the Boltzmann policy over Q_theta,
// recording target-net values along the way. Content vectors are encoded
// once per environment; only the state side and the rotations move per step.
// Environments are independent and seeded individually, so thread count
// never changes the result.
inline TrajectoryBatch rollout(const std::vector<TaskInstance>& instances,
                               const EncoderConfig& cfg, const EncoderParams& params,
                               const EncoderParams& target, const RolloutOptions& opts) {
    if (instances.empty()) throw InvalidArgument("rollout: no instances");
    if (opts.budget < 1) throw InvalidArgument("rollout: budget must be >= 1");

    TrajectoryBatch batch;
    batch.budget = opts.budget;
    batch.envs.resize(instances.size());
    const Featurizer featurizer(cfg.featurizer_config());
    const EnvOptions env_opts{cfg.stop_enabled, opts.reward_at_collection};

    parallel_for(instances.size(), opts.threads, [&](size_t k) {
        const TaskInstance& inst = instances[k];
        EnvTrajectory& env = batch.envs[k];
        Rng rng(derive_seed(opts.seed, "rollout_env", k));

        EpisodeCache cache = make_episode_cache(inst, featurizer, params);
        std::vector<Vec> content_target(inst.num_chunks());
        for (int32_t i = 0; i < inst.num_chunks(); ++i)
            content_target[i] = encode_content(target, cache.chunk_features[i]);
        env.support_ids.assign(inst.support_ids.begin(), inst.support_ids.end());
        env.steps.assign(opts.budget, StepRecord{});

        EpisodeState state = reset_episode(inst, opts.budget);
        for (int32_t t = 0; t < opts.budget; ++t) {
            if (state.done) break;
            StepRecord& rec = env.steps[t];

            rec.cand_ids = state.remaining;
            if (cfg.stop_enabled) rec.cand_ids.insert(rec.cand_ids.begin(), 0);
            rec.cand_rhos =
                candidate_rhos(rec.cand_ids, state.selected, inst.num_chunks(), cfg);
            rec.state_features = state_features_for(cache, state.selected, cfg);

            const Vec q =
                score_actions(params, cache, rec.state_features, rec.cand_ids, rec.cand_rhos);
            const Vec state_vec_target = encode_state(target, rec.state_features);
            Vec q_target(rec.cand_ids.size());
            for (size_t i = 0; i < rec.cand_ids.size(); ++i) {
                const Vec& ct = rec.cand_ids[i] == 0 ? target.stop_embed
                                                     : content_target[rec.cand_ids[i] - 1];
                q_target[i] = rope_dot(state_vec_target, ct, rec.cand_rhos[i], target.freqs);
            }

            rec.value = opts.hard_backup ? hard_value(q_target)
                                         : soft_value(q_target, std::max(opts.alpha, 1e-6));

            size_t pick;
            if (opts.greedy) {
                pick = static_cast<size_t>(std::max_element(q.begin(), q.end()) - q.begin());
            } else if (opts.hard_backup) {
                pick = epsilon_greedy_sample(q, opts.epsilon, rng);
            } else {
                pick = boltzmann_sample(q, opts.alpha, rng).index;
            }
            rec.chosen = static_cast<int32_t>(pick);
            rec.q_behavior = q[pick];
            rec.valid = true;

            const ActionId action = rec.cand_ids[pick] == 0
                                        ? ActionId::stop()
                                        : ActionId::select(rec.cand_ids[pick]);
            const StepOutcome outcome = step_episode(state, action, inst, env_opts);
            rec.reward = outcome.reward;
            state = outcome.state;
        }

        if (state.done || state.remaining.empty()) {
            env.bootstrap_value = 0.0;
        } else {
            // budget exhaustion flags done, so this branch only serves env
            // variants that truncate without terminating
            std::vector<int32_t> cand = state.remaining;
            if (cfg.stop_enabled) cand.insert(cand.begin(), 0);
            const Vec rhos = candidate_rhos(cand, state.selected, inst.num_chunks(), cfg);
            const FeatureVector feats = state_features_for(cache, state.selected, cfg);
            const Vec sv = encode_state(target, feats);
            Vec q(cand.size());
            for (size_t i = 0; i < cand.size(); ++i) {
                const Vec& ct = cand[i] == 0 ? target.stop_embed : content_target[cand[i] - 1];
                q[i] = rope_dot(sv, ct, rhos[i], target.freqs);
            }
            env.bootstrap_value = opts.hard_backup ? hard_value(q)
                                                   : soft_value(q, std::max(opts.alpha, 1e-6));
        }

        env.query_features = std::move(cache.query_features);
        env.chunk_features = std::move(cache.chunk_features);
        env.final_selected = state.selected;
        env.episode_return = terminal_reward(state, inst.support_ids);
        int32_t hit = 0;
        for (int32_t id : env.final_selected)
            if (inst.support_ids.count(id)) ++hit;
        env.recall = inst.support_ids.empty()
                         ? 1.0
                         : static_cast<double>(hit) / static_cast<double>(inst.support_ids.size());
    });
    return batch;
}

// Lambda-return targets for every environment, padded steps included (their
// rewards and values are zero by construction).
inline std::vector<Vec> batch_targets(const TrajectoryBatch& batch, double gamma,
                                      double lambda) {
    std::vector<Vec> targets;
    targets.reserve(batch.envs.size());
    for (const EnvTrajectory& env : batch.envs) {
        Vec rewards(batch.budget, 0.0);
        Vec values(batch.budget + 1, 0.0);
        for (int32_t t = 0; t < batch.budget; ++t) {
            rewards[t] = env.steps[t].reward;
            if (t + 1 < batch.budget) values[t + 1] = env.steps[t + 1].value;
        }
        values[batch.budget] = env.bootstrap_value;
        targets.push_back(compute_targets(rewards, values, gamma, lambda));
    }
    return targets;
}

// Mean squared TD error over the recorded decisions, with gradients through
// Q_theta only; the targets are constants. Q is re-scored from the stored
// features so the loss is an exact function of `params`.
inline double td_loss_and_grad(const TrajectoryBatch& batch, const std::vector<Vec>& targets,
                               const EncoderConfig& cfg, const EncoderParams& params,
                               EncoderParams& grads) {
    if (targets.size() != batch.envs.size())
        throw InvalidArgument("td_loss_and_grad: targets/batch size mismatch");

    int64_t n = 0;
    for (const EnvTrajectory& env : batch.envs)
        for (const StepRecord& rec : env.steps)
            if (rec.valid) ++n;
    if (n == 0) throw InvalidArgument("td_loss_and_grad: batch has no valid steps");

    double loss = 0.0;
    for (size_t k = 0; k < batch.envs.size(); ++k) {
        const EnvTrajectory& env = batch.envs[k];
        for (int32_t t = 0; t < batch.budget; ++t) {
            const StepRecord& rec = env.steps[t];
            if (!rec.valid) continue;
            const double g = targets[k][t];
            if (!std::isfinite(g))
                throw DivergenceError("non-finite lambda-return target at env " +
                                      std::to_string(k) + " step " + std::to_string(t));

            const int32_t id = rec.cand_ids[rec.chosen];
            const FeatureVector* chosen_features =
                id == 0 ? nullptr : &env.chunk_features[id - 1];
            ScoreForward fwd;
            const Vec q = score_candidates(params, rec.state_features, {chosen_features},
                                           {rec.cand_rhos[rec.chosen]}, &fwd);
            const double residual = q[0] - g;
            loss += residual * residual;
            grad_q(params, fwd, {2.0 * residual / static_cast<double>(n)}, grads);
        }
    }
    return loss / static_cast<double>(n);
}

// Teacher-forced cross-entropy for the supervised baseline: the state
// follows the gold support prefix in document order, and each step is a
// softmax classification over the remaining candidates with the next gold
// chunk as the label. Once every support chunk is taken the label becomes
// STOP when available, otherwise supervision ends.
inline double sft_loss_and_grad(const std::vector<TaskInstance>& instances,
                                const EncoderConfig& cfg, const EncoderParams& params,
                                int32_t budget, EncoderParams& grads) {
    if (instances.empty()) throw InvalidArgument("sft_loss_and_grad: no instances");
    const Featurizer featurizer(cfg.featurizer_config());

    // local accumulator: the mean normalization must not touch gradients
    // already sitting in `grads` from earlier micro-batches
    EncoderParams local = EncoderParams::zeros_like(params);
    double loss = 0.0;
    int64_t n = 0;
    struct Pending {
        FeatureVector state_features;
        std::vector<const FeatureVector*> cand_features;
        Vec rhos;
        size_t gold;
    };
    std::vector<Pending> pendings;

    for (const TaskInstance& inst : instances) {
        EpisodeCache cache;  // features only; score_candidates re-encodes content
        cache.query_features = featurizer.featurize(inst.query);
        cache.chunk_features.resize(inst.num_chunks());
        for (int32_t i = 0; i < inst.num_chunks(); ++i)
            cache.chunk_features[i] = featurizer.featurize(inst.context[i].text);

        const std::vector<int32_t> gold_order(inst.support_ids.begin(), inst.support_ids.end());
        EpisodeState state = reset_episode(inst, budget);
        for (int32_t t = 0; t < budget && !state.done; ++t) {
            std::vector<int32_t> cand_ids = state.remaining;
            if (cfg.stop_enabled) cand_ids.insert(cand_ids.begin(), 0);

            int32_t gold_id = -1;
            for (int32_t id : gold_order) {
                if (std::binary_search(state.remaining.begin(), state.remaining.end(), id)) {
                    gold_id = id;
                    break;
                }
            }
            if (gold_id < 0) {
                if (!cfg.stop_enabled) break;  // nothing left to teach
                gold_id = 0;
            }

            Pending p;
            p.rhos = candidate_rhos(cand_ids, state.selected, inst.num_chunks(), cfg);
            p.state_features = state_features_for(cache, state.selected, cfg);
            p.cand_features.resize(cand_ids.size());
            p.gold = 0;
            for (size_t i = 0; i < cand_ids.size(); ++i) {
                p.cand_features[i] =
                    cand_ids[i] == 0 ? nullptr : &cache.chunk_features[cand_ids[i] - 1];
                if (cand_ids[i] == gold_id) p.gold = i;
            }
            pendings.push_back(std::move(p));
            ++n;

            const ActionId action =
                gold_id == 0 ? ActionId::stop() : ActionId::select(gold_id);
            state = step_episode(state, action, inst, EnvOptions{cfg.stop_enabled, false}).state;
        }

        // pendings hold pointers into cache.chunk_features; consume them
        // while the storage is alive
        for (const Pending& p : pendings) {
            ScoreForward fwd;
            const Vec q = score_candidates(params, p.state_features, p.cand_features, p.rhos, &fwd);
            const Vec probs = boltzmann_probs(q, 1.0);
            loss -= std::log(std::max(probs[p.gold], 1e-300));
            Vec upstream = probs;
            upstream[p.gold] -= 1.0;
            grad_q(params, fwd, upstream, local);
        }
        pendings.clear();
    }
    if (n == 0) throw InvalidArgument("sft_loss_and_grad: no supervised steps");

    for_each_tensor_pair(grads, local, [&](const char*, Vec& g, const Vec& l) {
        for (size_t i = 0; i < g.size(); ++i) g[i] += l[i] / static_cast<double>(n);
    });
    return loss / static_cast<double>(n);
}

struct UpdateStats {
    int64_t step = 0;  // optimizer steps completed after this update
    double loss = 0.0;
    double mean_return = 0.0;
    double rollout_recall = 0.0;
    double lr = 0.0;
    double alpha = 0.0;
    double grad_norm = 0.0;
};

// Owns the online/target parameter pair and the optimizer, and advances one
// optimizer step per call from freshly sampled instances.
class Trainer {
  public:
    Trainer(const EncoderConfig& encoder_cfg, const TrainConfig& train_cfg)
        : encoder_cfg_(encoder_cfg),
          cfg_(train_cfg),
          params_(init_params(encoder_cfg, train_cfg.seed)),
          target_(params_),
          grads_(EncoderParams::zeros_like(params_)),
          opt_state_(OptimizerState::for_params(params_)) {
        cfg_.validate();
    }

    const EncoderParams& params() const { return params_; }
    const EncoderParams& target() const { return target_; }
    EncoderParams& mutable_params() { return params_; }
    EncoderParams& mutable_target() { return target_; }
    OptimizerState& optimizer_state() { return opt_state_; }
    const EncoderConfig& encoder_config() const { return encoder_cfg_; }
    const TrainConfig& train_config() const { return cfg_; }
    int64_t step() const { return opt_state_.step; }

    // One optimizer step: accum_steps micro-batches of envs_per_batch()
    // episodes each. `sample` must yield a fresh instance per call index.
    template <typename Sampler>
    UpdateStats update(Sampler&& sample) {
        const int64_t update_idx = opt_state_.step;
        const ScheduleValues sched = schedule_at(update_idx, cfg_.schedule());

        if (cfg_.ablation == Ablation::kNoTarget) target_ = params_;

        zero_grads(grads_);
        UpdateStats stats;
        stats.lr = sched.lr;
        stats.alpha = sched.alpha;

        const int32_t k_envs = cfg_.envs_per_batch();
        int64_t env_count = 0;
        for (int32_t micro = 0; micro < cfg_.accum_steps; ++micro) {
            std::vector<TaskInstance> instances;
            instances.reserve(k_envs);
            for (int32_t k = 0; k < k_envs; ++k)
                instances.push_back(sample(update_idx, micro * k_envs + k));

            if (cfg_.ablation == Ablation::kSft) {
                stats.loss += sft_loss_and_grad(instances, encoder_cfg_, params_, cfg_.budget,
                                                grads_) /
                              cfg_.accum_steps;
                continue;
            }

            RolloutOptions opts;
            opts.budget = cfg_.budget;
            opts.alpha = sched.alpha;
            opts.hard_backup = cfg_.ablation == Ablation::kNoSoftQ;
            opts.epsilon = opts.hard_backup
                               ? cfg_.epsilon0 * (cfg_.anneal_alpha ? sched.lr / cfg_.lr0 : 1.0)
                               : 0.0;
            opts.reward_at_collection = cfg_.reward_at_collection;
            opts.seed = derive_seed(cfg_.seed, "rollout", static_cast<uint64_t>(update_idx),
                                    static_cast<uint64_t>(micro));
            opts.threads = cfg_.threads;

            const TrajectoryBatch batch = rollout(instances, encoder_cfg_, params_, target_, opts);
            const std::vector<Vec> targets =
                batch_targets(batch, cfg_.gamma, cfg_.lambda);
            stats.loss +=
                td_loss_and_grad(batch, targets, encoder_cfg_, params_, grads_) / cfg_.accum_steps;

            for (const EnvTrajectory& env : batch.envs) {
                stats.mean_return += env.episode_return;
                stats.rollout_recall += env.recall;
                ++env_count;
            }
        }
        if (env_count > 0) {
            stats.mean_return /= static_cast<double>(env_count);
            stats.rollout_recall /= static_cast<double>(env_count);
        }

        // accumulated micro-batch gradients average into one step
        if (cfg_.accum_steps > 1) {
            for_each_tensor(grads_, [&](const char*, Vec& g) {
                for (double& v : g) v /= static_cast<double>(cfg_.accum_steps);
            });
        }

        if (cfg_.ablation == Ablation::kNoFinetune) {
            stats.grad_norm = global_grad_norm(grads_);
            opt_state_.step += 1;  // advances schedules and checkpoints only
        } else {
            stats.grad_norm = adamw_step(params_, grads_, opt_state_, cfg_.optim(), sched.lr);
            if (!std::isfinite(stats.grad_norm)) {
                // the step was skipped; retrying is deterministic, so bail out
                // once it is clear the weights themselves are poisoned
                if (++consecutive_skips_ >= 3)
                    throw DivergenceError("non-finite gradients on " +
                                          std::to_string(consecutive_skips_) +
                                          " consecutive updates");
            } else {
                consecutive_skips_ = 0;
            }
            ema_update(params_, target_, cfg_.tau);
        }
        stats.step = opt_state_.step;
        return stats;
    }

  private:
    EncoderConfig encoder_cfg_;
    TrainConfig cfg_;
    EncoderParams params_;
    EncoderParams target_;
    EncoderParams grads_;
    OptimizerState opt_state_;
    int32_t consecutive_skips_ = 0;
};

}  // namespace qrag
