#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qrag/common.hpp"
#include "qrag/encoder.hpp"
#include "qrag/taskgen.hpp"
#include "qrag/train.hpp"

namespace qrag {

struct TaskConfig {
    std::string kind = "fact_chain";  // fact_chain | niah | jsonl
    FactChainSpec chain;
    NiahSpec niah;
    std::string jsonl_path;

    int32_t train_length() const {
        if (kind == "niah") return niah.num_chunks;
        return chain.num_chunks;
    }
};

struct EvalConfig {
    std::vector<int32_t> lengths = {64};
    int32_t instances = 32;  // per length per eval seed
    int32_t seeds = 3;
    int64_t interval = 250;       // training updates between eval passes
    double stop_at_recall = 0.0;  // early stop once held-out recall reaches this; 0 = off
};

struct RunConfig {
    TaskConfig task;
    EncoderConfig encoder;
    TrainConfig train;
    EvalConfig eval;
    std::string out_dir = "runs/default";
    int64_t checkpoint_interval = 1000;
    std::string mode = "greedy";  // greedy | beam
    int64_t beam_width = 4;

    void validate() const {
        if (task.kind != "fact_chain" && task.kind != "niah" && task.kind != "jsonl")
            throw InvalidArgument("config: unknown task kind '" + task.kind + "'");
        if (task.kind == "jsonl" && task.jsonl_path.empty())
            throw InvalidArgument("config: task kind jsonl needs a path");
        if (eval.lengths.empty()) throw InvalidArgument("config: eval lengths must be non-empty");
        if (eval.instances < 1) throw InvalidArgument("config: eval instances must be >= 1");
        if (eval.seeds < 1) throw InvalidArgument("config: eval seeds must be >= 1");
        if (eval.interval < 1) throw InvalidArgument("config: eval interval must be >= 1");
        if (checkpoint_interval < 1)
            throw InvalidArgument("config: checkpoint interval must be >= 1");
        if (mode != "greedy" && mode != "beam")
            throw InvalidArgument("config: mode must be greedy or beam");
        if (beam_width < 1) throw InvalidArgument("config: beam width must be >= 1");
        encoder.validate();
        train.validate();
    }
};

// Hyperparameters for transformer-scale fine-tuning runs: small learning
// rate, long warmup, gradient accumulation.
inline RunConfig finetune_preset() {
    RunConfig cfg;
    cfg.train.lr0 = 1.5e-5;
    cfg.train.warmup_steps = 1000;
    cfg.train.total_steps = 20000;
    cfg.train.envs = 12;
    cfg.train.accum_steps = 8;
    cfg.train.alpha0 = 0.05;
    return cfg;
}

// Hyperparameters sized for the bundled hashed-feature encoders on a single
// core: a far larger learning rate and no accumulation, everything else as
// in the finetune preset.
inline RunConfig desk_preset() {
    RunConfig cfg;
    cfg.train.lr0 = 2e-3;
    cfg.train.warmup_steps = 200;
    cfg.train.total_steps = 20000;
    cfg.train.envs = 16;
    cfg.train.accum_steps = 1;
    cfg.train.alpha0 = 0.05;
    return cfg;
}

inline RunConfig preset_by_name(const std::string& name) {
    if (name == "finetune") return finetune_preset();
    if (name == "desk") return desk_preset();
    throw InvalidArgument("unknown preset '" + name + "' (have: finetune, desk)");
}

namespace cfgjson {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw InvalidArgument("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void load_if(const nlohmann::json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it != j.end()) out = it->get<T>();
}

inline void load_task(const nlohmann::json& j, TaskConfig& task) {
    check_keys(j,
               {"kind", "num_chunks", "hops", "temporal", "distractors", "entities", "locations",
                "niah_kind", "needles", "key_alphabet", "value_alphabet", "thematic_filler",
                "jsonl"},
               "task");
    load_if(j, "kind", task.kind);
    int32_t num_chunks = task.chain.num_chunks;
    load_if(j, "num_chunks", num_chunks);
    task.chain.num_chunks = num_chunks;
    task.niah.num_chunks = num_chunks;
    load_if(j, "hops", task.chain.hops);
    load_if(j, "temporal", task.chain.temporal_question);
    load_if(j, "distractors", task.chain.distractor_moves);
    load_if(j, "entities", task.chain.entities);
    load_if(j, "locations", task.chain.locations);
    if (j.count("niah_kind")) task.niah.kind = niah_kind_from_name(j.at("niah_kind"));
    load_if(j, "needles", task.niah.needle_count);
    load_if(j, "key_alphabet", task.niah.key_alphabet);
    load_if(j, "value_alphabet", task.niah.value_alphabet);
    load_if(j, "thematic_filler", task.niah.thematic_filler);
    load_if(j, "jsonl", task.jsonl_path);
}

inline void load_encoder(const nlohmann::json& j, EncoderConfig& enc) {
    check_keys(j,
               {"dim", "hidden", "buckets", "order_tags", "delta", "ell", "position_mode",
                "stop_enabled", "rope_base", "feature_mode", "max_tokens"},
               "encoder");
    load_if(j, "dim", enc.dim);
    load_if(j, "hidden", enc.hidden);
    load_if(j, "buckets", enc.buckets);
    load_if(j, "order_tags", enc.order_tags);
    load_if(j, "delta", enc.delta);
    load_if(j, "ell", enc.ell);
    if (j.count("position_mode")) {
        const std::string mode = j.at("position_mode");
        if (mode == "relative")
            enc.position_mode = PositionMode::kRelative;
        else if (mode == "absolute")
            enc.position_mode = PositionMode::kAbsolute;
        else
            throw InvalidArgument("config: position_mode must be relative or absolute");
    }
    load_if(j, "stop_enabled", enc.stop_enabled);
    load_if(j, "rope_base", enc.rope_base);
    if (j.count("feature_mode")) {
        const std::string mode = j.at("feature_mode");
        if (mode == "hashed")
            enc.feature_mode = FeatureMode::kHashedNgrams;
        else if (mode == "token_index")
            enc.feature_mode = FeatureMode::kTokenIndex;
        else
            throw InvalidArgument("config: feature_mode must be hashed or token_index");
    }
    load_if(j, "max_tokens", enc.max_tokens);
}

inline void load_train(const nlohmann::json& j, TrainConfig& t) {
    check_keys(j,
               {"gamma", "alpha0", "lambda", "tau", "envs", "budget", "lr0", "warmup_steps",
                "total_steps", "decay_floor_frac", "clip_norm", "accum_steps", "batch_size",
                "weight_decay", "beta1", "beta2", "adam_eps", "seed", "anneal_alpha", "epsilon0",
                "reward_at_collection", "ablation", "threads"},
               "train");
    load_if(j, "gamma", t.gamma);
    load_if(j, "alpha0", t.alpha0);
    load_if(j, "lambda", t.lambda);
    load_if(j, "tau", t.tau);
    load_if(j, "envs", t.envs);
    load_if(j, "budget", t.budget);
    load_if(j, "lr0", t.lr0);
    load_if(j, "warmup_steps", t.warmup_steps);
    load_if(j, "total_steps", t.total_steps);
    load_if(j, "decay_floor_frac", t.decay_floor_frac);
    load_if(j, "clip_norm", t.clip_norm);
    load_if(j, "accum_steps", t.accum_steps);
    load_if(j, "batch_size", t.batch_size);
    load_if(j, "weight_decay", t.weight_decay);
    load_if(j, "beta1", t.beta1);
    load_if(j, "beta2", t.beta2);
    load_if(j, "adam_eps", t.adam_eps);
    load_if(j, "seed", t.seed);
    load_if(j, "anneal_alpha", t.anneal_alpha);
    load_if(j, "epsilon0", t.epsilon0);
    load_if(j, "reward_at_collection", t.reward_at_collection);
    if (j.count("ablation")) t.ablation = ablation_from_name(j.at("ablation"));
    load_if(j, "threads", t.threads);
}

inline void load_eval(const nlohmann::json& j, EvalConfig& e) {
    check_keys(j, {"lengths", "instances", "seeds", "interval", "stop_at_recall"}, "eval");
    load_if(j, "lengths", e.lengths);
    load_if(j, "instances", e.instances);
    load_if(j, "seeds", e.seeds);
    load_if(j, "interval", e.interval);
    load_if(j, "stop_at_recall", e.stop_at_recall);
}

}  // namespace cfgjson

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    cfgjson::check_keys(
        j, {"preset", "task", "encoder", "train", "eval", "out_dir", "checkpoint_interval",
            "mode", "beam_width"},
        "config root");
    RunConfig cfg;
    if (j.count("preset")) cfg = preset_by_name(j.at("preset"));
    if (j.count("task")) cfgjson::load_task(j.at("task"), cfg.task);
    if (j.count("encoder")) cfgjson::load_encoder(j.at("encoder"), cfg.encoder);
    if (j.count("train")) cfgjson::load_train(j.at("train"), cfg.train);
    if (j.count("eval")) cfgjson::load_eval(j.at("eval"), cfg.eval);
    cfgjson::load_if(j, "out_dir", cfg.out_dir);
    cfgjson::load_if(j, "checkpoint_interval", cfg.checkpoint_interval);
    cfgjson::load_if(j, "mode", cfg.mode);
    cfgjson::load_if(j, "beam_width", cfg.beam_width);
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("config " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

// Fully resolved snapshot, written into each run directory.
inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["task"]["kind"] = cfg.task.kind;
    j["task"]["num_chunks"] = cfg.task.train_length();
    j["task"]["hops"] = cfg.task.chain.hops;
    j["task"]["temporal"] = cfg.task.chain.temporal_question;
    j["task"]["distractors"] = cfg.task.chain.distractor_moves;
    j["task"]["entities"] = cfg.task.chain.entities;
    j["task"]["locations"] = cfg.task.chain.locations;
    j["task"]["niah_kind"] = niah_kind_name(cfg.task.niah.kind);
    j["task"]["needles"] = cfg.task.niah.needle_count;
    j["task"]["key_alphabet"] = cfg.task.niah.key_alphabet;
    j["task"]["value_alphabet"] = cfg.task.niah.value_alphabet;
    j["task"]["thematic_filler"] = cfg.task.niah.thematic_filler;
    j["task"]["jsonl"] = cfg.task.jsonl_path;
    j["encoder"]["dim"] = cfg.encoder.dim;
    j["encoder"]["hidden"] = cfg.encoder.hidden;
    j["encoder"]["buckets"] = cfg.encoder.buckets;
    j["encoder"]["order_tags"] = cfg.encoder.order_tags;
    j["encoder"]["delta"] = cfg.encoder.delta;
    j["encoder"]["ell"] = cfg.encoder.ell;
    j["encoder"]["position_mode"] =
        cfg.encoder.position_mode == PositionMode::kRelative ? "relative" : "absolute";
    j["encoder"]["stop_enabled"] = cfg.encoder.stop_enabled;
    j["encoder"]["rope_base"] = cfg.encoder.rope_base;
    j["encoder"]["feature_mode"] =
        cfg.encoder.feature_mode == FeatureMode::kHashedNgrams ? "hashed" : "token_index";
    j["encoder"]["max_tokens"] = cfg.encoder.max_tokens;
    j["train"]["gamma"] = cfg.train.gamma;
    j["train"]["alpha0"] = cfg.train.alpha0;
    j["train"]["lambda"] = cfg.train.lambda;
    j["train"]["tau"] = cfg.train.tau;
    j["train"]["envs"] = cfg.train.envs;
    j["train"]["budget"] = cfg.train.budget;
    j["train"]["lr0"] = cfg.train.lr0;
    j["train"]["warmup_steps"] = cfg.train.warmup_steps;
    j["train"]["total_steps"] = cfg.train.total_steps;
    j["train"]["decay_floor_frac"] = cfg.train.decay_floor_frac;
    j["train"]["clip_norm"] = cfg.train.clip_norm;
    j["train"]["accum_steps"] = cfg.train.accum_steps;
    j["train"]["batch_size"] = cfg.train.batch_size;
    j["train"]["weight_decay"] = cfg.train.weight_decay;
    j["train"]["beta1"] = cfg.train.beta1;
    j["train"]["beta2"] = cfg.train.beta2;
    j["train"]["adam_eps"] = cfg.train.adam_eps;
    j["train"]["seed"] = cfg.train.seed;
    j["train"]["anneal_alpha"] = cfg.train.anneal_alpha;
    j["train"]["epsilon0"] = cfg.train.epsilon0;
    j["train"]["reward_at_collection"] = cfg.train.reward_at_collection;
    j["train"]["ablation"] = ablation_name(cfg.train.ablation);
    j["train"]["threads"] = cfg.train.threads;
    j["eval"]["lengths"] = cfg.eval.lengths;
    j["eval"]["instances"] = cfg.eval.instances;
    j["eval"]["seeds"] = cfg.eval.seeds;
    j["eval"]["interval"] = cfg.eval.interval;
    j["eval"]["stop_at_recall"] = cfg.eval.stop_at_recall;
    j["out_dir"] = cfg.out_dir;
    j["checkpoint_interval"] = cfg.checkpoint_interval;
    j["mode"] = cfg.mode;
    j["beam_width"] = cfg.beam_width;
    return j;
}

}  // namespace qrag
