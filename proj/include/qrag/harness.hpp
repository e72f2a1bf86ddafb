#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qrag/checkpoint.hpp"
#include "qrag/common.hpp"
#include "qrag/config.hpp"
#include "qrag/inference.hpp"
#include "qrag/metrics.hpp"
#include "qrag/taskgen.hpp"
#include "qrag/train.hpp"

namespace qrag {

// Builds one task instance at the requested context length. JSONL pools
// ignore the length and cycle deterministically by seed.
class InstanceSource {
  public:
    InstanceSource(const TaskConfig& task) : task_(task) {
        if (task_.kind == "jsonl") {
            pool_ = load_jsonl(task_.jsonl_path);
            if (pool_.empty()) throw InvalidArgument(task_.jsonl_path + " holds no instances");
        }
    }

    TaskInstance make(int32_t length, uint64_t seed) const {
        if (task_.kind == "fact_chain") {
            FactChainSpec spec = task_.chain;
            spec.num_chunks = length;
            spec.seed = seed;
            return gen_fact_chain(spec);
        }
        if (task_.kind == "niah") {
            NiahSpec spec = task_.niah;
            spec.num_chunks = length;
            spec.seed = seed;
            return gen_niah(spec);
        }
        Rng rng(seed);
        return pool_[rng_below(rng, pool_.size())];
    }

    const TaskConfig& task() const { return task_; }

  private:
    TaskConfig task_;
    std::vector<TaskInstance> pool_;
};

struct EvalStat {
    double mean = 0.0;
    double stdev = 0.0;
};

struct EvalRow {
    int32_t length = 0;
    EvalStat recall;
    EvalStat precision;
    EvalStat f1;
    EvalStat em;
    double seconds = 0.0;
};

namespace detail {

inline EvalStat stat_of(const std::vector<double>& xs) {
    EvalStat s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double sq = 0.0;
        for (double x : xs) sq += (x - s.mean) * (x - s.mean);
        s.stdev = std::sqrt(sq / static_cast<double>(xs.size() - 1));
    }
    return s;
}

inline double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

}  // namespace detail

// Held-out evaluation at one context length: `instances` fresh episodes per
// eval seed, retrieval per `mode`, set metrics against the support ids.
// Eval seeds live in their own namespace, disjoint from training seeds.
inline EvalRow evaluate_at_length(const InstanceSource& source, const EncoderConfig& encoder_cfg,
                                  const EncoderParams& params, int32_t length, int32_t budget,
                                  const std::string& mode, int64_t beam_width,
                                  uint64_t master_seed, int32_t instances, int32_t seeds) {
    const double t0 = detail::now_seconds();
    std::vector<double> recalls, precisions, f1s, ems;
    for (int32_t e = 0; e < seeds; ++e) {
        const uint64_t eval_seed =
            derive_seed(master_seed, "eval_task", static_cast<uint64_t>(length),
                        static_cast<uint64_t>(e));
        RetrievalMetrics sum;
        for (int32_t i = 0; i < instances; ++i) {
            const TaskInstance inst =
                source.make(length, derive_seed(eval_seed, "eval_inst", static_cast<uint64_t>(i)));
            std::vector<int32_t> picked;
            if (mode == "beam") {
                picked = beam_search(inst, encoder_cfg, params, budget, beam_width).selected;
            } else {
                picked = greedy_retrieve(inst, encoder_cfg, params, budget);
            }
            const RetrievalMetrics m = evaluate_retrieval(picked, inst.support_ids);
            sum.recall += m.recall;
            sum.precision += m.precision;
            sum.f1 += m.f1;
            sum.em += m.em;
        }
        recalls.push_back(sum.recall / instances);
        precisions.push_back(sum.precision / instances);
        f1s.push_back(sum.f1 / instances);
        ems.push_back(sum.em / instances);
    }
    EvalRow row;
    row.length = length;
    row.recall = detail::stat_of(recalls);
    row.precision = detail::stat_of(precisions);
    row.f1 = detail::stat_of(f1s);
    row.em = detail::stat_of(ems);
    row.seconds = detail::now_seconds() - t0;
    return row;
}

inline std::vector<EvalRow> evaluate_lengths(const InstanceSource& source,
                                             const EncoderConfig& encoder_cfg,
                                             const EncoderParams& params, const RunConfig& cfg) {
    std::vector<EvalRow> rows;
    for (int32_t length : cfg.eval.lengths)
        rows.push_back(evaluate_at_length(source, encoder_cfg, params, length, cfg.train.budget,
                                          cfg.mode, cfg.beam_width, cfg.train.seed,
                                          cfg.eval.instances, cfg.eval.seeds));
    return rows;
}

inline void print_eval_table(const std::vector<EvalRow>& rows, std::ostream& out) {
    out << "length  recall          precision       f1              em              seconds\n";
    for (const EvalRow& r : rows) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "%-7d %.4f +/- %.4f %.4f +/- %.4f %.4f +/- %.4f %.4f +/- %.4f %.1f\n",
                      r.length, r.recall.mean, r.recall.stdev, r.precision.mean,
                      r.precision.stdev, r.f1.mean, r.f1.stdev, r.em.mean, r.em.stdev,
                      r.seconds);
        out << line;
    }
}

inline void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "length,recall_mean,recall_std,precision_mean,precision_std,f1_mean,f1_std,em_mean,"
           "em_std,seconds\n";
    for (const EvalRow& r : rows) {
        out << r.length << ',' << r.recall.mean << ',' << r.recall.stdev << ','
            << r.precision.mean << ',' << r.precision.stdev << ',' << r.f1.mean << ','
            << r.f1.stdev << ',' << r.em.mean << ',' << r.em.stdev << ',' << r.seconds << '\n';
    }
}

inline std::string checkpoint_path(const std::string& out_dir, int64_t step) {
    return out_dir + "/ckpt_" + std::to_string(step);
}

// Highest-step checkpoint in a run directory, if any.
inline std::optional<std::pair<std::string, int64_t>> latest_checkpoint(
    const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(out_dir)) return std::nullopt;
    std::optional<std::pair<std::string, int64_t>> best;
    for (const auto& entry : fs::directory_iterator(out_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("ckpt_", 0) != 0) continue;
        try {
            const int64_t step = std::stoll(name.substr(5));
            if (!best || step > best->second) best = {entry.path().string(), step};
        } catch (const std::exception&) {
            continue;  // unrelated file
        }
    }
    return best;
}

inline void write_manifest(const RunConfig& cfg) {
    nlohmann::json manifest;
    manifest["seed"] = cfg.train.seed;
    manifest["code_version"] = kVersion;
    manifest["task_kind"] = cfg.task.kind;
    std::ofstream out(cfg.out_dir + "/manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + cfg.out_dir);
    out << manifest.dump(2) << "\n";
}

struct TrainResult {
    int64_t final_step = 0;
    std::vector<EvalRow> final_eval;
    bool stopped_early = false;
};

// Full training run: auto-resumes from the newest checkpoint in out_dir,
// emits one metrics row per update, evaluates every eval.interval updates,
// and always writes a final checkpoint. `max_updates` caps the updates
// performed by this invocation (simulating interruption); the schedule
// horizon stays cfg.train.total_steps.
inline TrainResult run_train(const RunConfig& cfg,
                             std::optional<int64_t> max_updates = std::nullopt) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    {
        std::ofstream snap(cfg.out_dir + "/config.json", std::ios::trunc);
        if (!snap) throw IoError("cannot write config snapshot in " + cfg.out_dir);
        snap << run_config_to_json(cfg).dump(2) << "\n";
    }
    write_manifest(cfg);

    const InstanceSource source(cfg.task);
    Trainer trainer(cfg.encoder, cfg.train);

    const auto resume = latest_checkpoint(cfg.out_dir);
    if (resume) {
        Checkpoint c = load_checkpoint(resume->first);
        std::cerr << "resuming from " << resume->first << " (step " << resume->second << ")\n";
        trainer.mutable_params() = std::move(c.params);
        trainer.mutable_target() = std::move(c.target);
        trainer.optimizer_state() = std::move(c.opt_state);
    }

    MetricsWriter metrics(cfg.out_dir + "/metrics.csv", cfg.out_dir + "/metrics.jsonl",
                          cfg.eval.lengths, /*append=*/resume.has_value());

    TrainResult result;
    if (cfg.train.ablation == Ablation::kNoFinetune) {
        // frozen parameters: no optimizer steps at all, evaluation only
        result.final_eval = evaluate_lengths(source, cfg.encoder, trainer.params(), cfg);
        MetricsRow row;
        row.step = 0;
        for (const EvalRow& er : result.final_eval) row.eval_f1.push_back(er.f1.mean);
        row.wallclock = detail::now_seconds();
        metrics.append(row);
        save_checkpoint(checkpoint_path(cfg.out_dir, 0), cfg.encoder, trainer.params(),
                        trainer.target(), trainer.optimizer_state());
        print_eval_table(result.final_eval, std::cout);
        return result;
    }

    auto sampler = [&](int64_t update, int64_t k) {
        return source.make(cfg.task.train_length(),
                           derive_seed(cfg.train.seed, "train_task", static_cast<uint64_t>(update),
                                       static_cast<uint64_t>(k)));
    };

    int64_t done_this_invocation = 0;
    while (trainer.step() < cfg.train.total_steps) {
        if (max_updates && done_this_invocation >= *max_updates) break;
        const UpdateStats stats = trainer.update(sampler);
        ++done_this_invocation;

        MetricsRow row;
        row.step = stats.step;
        row.loss = stats.loss;
        row.mean_return = stats.mean_return;
        row.rollout_recall = stats.rollout_recall;
        row.lr = stats.lr;
        row.alpha = stats.alpha;
        row.grad_norm = stats.grad_norm;
        row.eval_f1.assign(cfg.eval.lengths.size(), std::nullopt);

        const bool final_step = stats.step >= cfg.train.total_steps;
        bool stop = false;
        if (stats.step % cfg.eval.interval == 0 || final_step) {
            const std::vector<EvalRow> rows =
                evaluate_lengths(source, cfg.encoder, trainer.params(), cfg);
            double recall_sum = 0.0;
            for (size_t i = 0; i < rows.size(); ++i) {
                row.eval_f1[i] = rows[i].f1.mean;
                recall_sum += rows[i].recall.mean;
            }
            result.final_eval = rows;
            if (cfg.eval.stop_at_recall > 0.0 &&
                recall_sum / rows.size() >= cfg.eval.stop_at_recall) {
                stop = true;
                result.stopped_early = true;
            }
        }
        row.wallclock = detail::now_seconds();
        metrics.append(row);

        if (stats.step % cfg.checkpoint_interval == 0 || final_step || stop)
            save_checkpoint(checkpoint_path(cfg.out_dir, stats.step), cfg.encoder,
                            trainer.params(), trainer.target(), trainer.optimizer_state());
        if (stop) break;
    }

    result.final_step = trainer.step();
    save_checkpoint(checkpoint_path(cfg.out_dir, result.final_step), cfg.encoder,
                    trainer.params(), trainer.target(), trainer.optimizer_state());
    return result;
}

// Evaluation sweep over the configured context lengths from a checkpoint.
inline std::vector<EvalRow> run_eval(const RunConfig& cfg, const std::string& checkpoint) {
    const Checkpoint c = load_checkpoint(checkpoint);
    const InstanceSource source(cfg.task);
    const std::vector<EvalRow> rows = evaluate_lengths(source, c.encoder_cfg, c.params, cfg);
    print_eval_table(rows, std::cout);
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        write_eval_csv(rows, cfg.out_dir + "/eval.csv");
    }
    return rows;
}

// Deterministic dataset emission: n instances at the training length.
inline void run_gen(const RunConfig& cfg, int64_t count, const std::string& out_path) {
    if (count < 0) throw InvalidArgument("gen: count must be >= 0");
    const InstanceSource source(cfg.task);
    std::vector<TaskInstance> instances;
    instances.reserve(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i)
        instances.push_back(source.make(cfg.task.train_length(),
                                        derive_seed(cfg.train.seed, "gen", static_cast<uint64_t>(i))));
    save_jsonl(out_path, instances);
}

// Train, then sweep evaluation lengths with the final parameters.
inline std::vector<EvalRow> run_sweep(const RunConfig& cfg) {
    run_train(cfg);
    const auto best = latest_checkpoint(cfg.out_dir);
    if (!best) throw Error("sweep: training left no checkpoint in " + cfg.out_dir);
    return run_eval(cfg, best->first);
}

}  // namespace qrag
