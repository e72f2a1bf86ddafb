#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "qrag/qrag.hpp"

using namespace qrag;
using nlohmann::json;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("finetune preset hyperparameters") {
    const RunConfig cfg = finetune_preset();
    CHECK(cfg.train.lr0 == 1.5e-5);
    CHECK(cfg.train.warmup_steps == 1000);
    CHECK(cfg.train.total_steps == 20000);
    CHECK(cfg.train.envs == 12);
    CHECK(cfg.train.accum_steps == 8);
    CHECK(cfg.train.alpha0 == 0.05);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("desk preset hyperparameters") {
    const RunConfig cfg = desk_preset();
    CHECK(cfg.train.lr0 == 2e-3);
    CHECK(cfg.train.warmup_steps == 200);
    CHECK(cfg.train.total_steps == 20000);
    CHECK(cfg.train.envs == 16);
    CHECK(cfg.train.accum_steps == 1);
    CHECK(cfg.train.alpha0 == 0.05);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("preset lookup by name") {
    CHECK(preset_by_name("finetune").train.accum_steps == 8);
    CHECK(preset_by_name("desk").train.accum_steps == 1);
    CHECK_THROWS_WITH(preset_by_name("turbo"), Catch::Matchers::ContainsSubstring("turbo"));
}

TEST_CASE("json overrides land on every section") {
    const json j = json::parse(R"({
        "preset": "desk",
        "task": {"kind": "fact_chain", "num_chunks": 48, "hops": 3, "temporal": true,
                 "distractors": 5},
        "encoder": {"dim": 32, "hidden": 16, "buckets": 512, "order_tags": 2,
                    "position_mode": "absolute", "stop_enabled": true,
                    "feature_mode": "token_index", "max_tokens": 64},
        "train": {"gamma": 0.95, "lambda": 0.7, "tau": 0.01, "budget": 4, "seed": 9,
                  "anneal_alpha": false, "ablation": "no_target", "threads": 2},
        "eval": {"lengths": [64, 128], "instances": 8, "seeds": 2, "interval": 50,
                 "stop_at_recall": 0.9},
        "out_dir": "runs/test",
        "checkpoint_interval": 123,
        "mode": "beam",
        "beam_width": 7
    })");
    const RunConfig cfg = run_config_from_json(j);

    CHECK(cfg.task.kind == "fact_chain");
    CHECK(cfg.task.chain.num_chunks == 48);
    CHECK(cfg.task.niah.num_chunks == 48);
    CHECK(cfg.task.chain.hops == 3);
    CHECK(cfg.task.chain.temporal_question);
    CHECK(cfg.task.chain.distractor_moves == 5);

    CHECK(cfg.encoder.dim == 32);
    CHECK(cfg.encoder.hidden == 16);
    CHECK(cfg.encoder.buckets == 512);
    CHECK(cfg.encoder.order_tags == 2);
    CHECK(cfg.encoder.position_mode == PositionMode::kAbsolute);
    CHECK(cfg.encoder.stop_enabled);
    CHECK(cfg.encoder.feature_mode == FeatureMode::kTokenIndex);
    CHECK(cfg.encoder.max_tokens == 64);

    CHECK(cfg.train.lr0 == 2e-3);  // from the preset
    CHECK(cfg.train.gamma == 0.95);
    CHECK(cfg.train.lambda == 0.7);
    CHECK(cfg.train.tau == 0.01);
    CHECK(cfg.train.budget == 4);
    CHECK(cfg.train.seed == 9);
    CHECK_FALSE(cfg.train.anneal_alpha);
    CHECK(cfg.train.ablation == Ablation::kNoTarget);
    CHECK(cfg.train.threads == 2);

    CHECK(cfg.eval.lengths == std::vector<int32_t>{64, 128});
    CHECK(cfg.eval.instances == 8);
    CHECK(cfg.eval.seeds == 2);
    CHECK(cfg.eval.interval == 50);
    CHECK(cfg.eval.stop_at_recall == 0.9);

    CHECK(cfg.out_dir == "runs/test");
    CHECK(cfg.checkpoint_interval == 123);
    CHECK(cfg.mode == "beam");
    CHECK(cfg.beam_width == 7);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("batch_size is an accepted alias for envs") {
    const json j = json::parse(R"({"train": {"envs": 4, "batch_size": 7}})");
    const RunConfig cfg = run_config_from_json(j);
    CHECK(cfg.train.envs == 4);
    CHECK(cfg.train.batch_size == 7);
    CHECK(cfg.train.envs_per_batch() == 7);

    const RunConfig plain = run_config_from_json(json::parse(R"({"train": {"envs": 4}})"));
    CHECK(plain.train.envs_per_batch() == 4);
}

TEST_CASE("unknown keys are rejected by name") {
    CHECK_THROWS_WITH(run_config_from_json(json::parse(R"({"learnig_rate": 1})")),
                      Catch::Matchers::ContainsSubstring("learnig_rate"));
    CHECK_THROWS_WITH(run_config_from_json(json::parse(R"({"train": {"lr": 1}})")),
                      Catch::Matchers::ContainsSubstring("'lr'") &&
                          Catch::Matchers::ContainsSubstring("train"));
    CHECK_THROWS_WITH(run_config_from_json(json::parse(R"({"encoder": {"dim": 8, "dims": 8}})")),
                      Catch::Matchers::ContainsSubstring("dims"));
    CHECK_THROWS_WITH(run_config_from_json(json::parse(R"({"eval": {"length": [64]}})")),
                      Catch::Matchers::ContainsSubstring("length"));
    CHECK_THROWS_WITH(run_config_from_json(json::parse(R"({"task": {"chunk_count": 8}})")),
                      Catch::Matchers::ContainsSubstring("chunk_count"));
}

TEST_CASE("enum strings are validated") {
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"encoder": {"position_mode": "rel"}})")),
                    InvalidArgument);
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"encoder": {"feature_mode": "bow"}})")),
                    InvalidArgument);
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"train": {"ablation": "nope"}})")),
                    InvalidArgument);
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"task": {"niah_kind": "huge"}})")),
                    InvalidArgument);
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"preset": "fast"})")), InvalidArgument);
}

TEST_CASE("resolved config snapshot round trips") {
    RunConfig cfg = desk_preset();
    cfg.task.kind = "fact_chain";
    cfg.task.chain.num_chunks = 96;
    cfg.task.niah.num_chunks = 96;
    cfg.task.chain.hops = 2;
    cfg.encoder.dim = 24;
    cfg.encoder.stop_enabled = true;
    cfg.train.seed = 77;
    cfg.train.ablation = Ablation::kNoSoftQ;
    cfg.eval.lengths = {96, 192};
    cfg.out_dir = "runs/roundtrip";
    cfg.mode = "beam";
    cfg.beam_width = 3;

    const json snapshot = run_config_to_json(cfg);
    const RunConfig reloaded = run_config_from_json(snapshot);
    const json again = run_config_to_json(reloaded);
    CHECK(snapshot == again);
    CHECK(reloaded.train.ablation == Ablation::kNoSoftQ);
    CHECK(reloaded.eval.lengths == cfg.eval.lengths);
}

TEST_CASE("config files load from disk with path context") {
    const std::string good = tmp_path("qrag_cfg_good.json");
    {
        std::ofstream out(good, std::ios::trunc);
        out << R"({"preset": "desk", "train": {"seed": 5}})";
    }
    const RunConfig cfg = load_run_config(good);
    CHECK(cfg.train.seed == 5);
    CHECK(cfg.train.lr0 == 2e-3);
    std::filesystem::remove(good);

    const std::string bad = tmp_path("qrag_cfg_bad.json");
    {
        std::ofstream out(bad, std::ios::trunc);
        out << "{not json";
    }
    CHECK_THROWS_AS(load_run_config(bad), IoError);
    CHECK_THROWS_WITH(load_run_config(bad), Catch::Matchers::ContainsSubstring("qrag_cfg_bad"));
    std::filesystem::remove(bad);

    CHECK_THROWS_AS(load_run_config(tmp_path("qrag_cfg_missing.json")), IoError);
}

TEST_CASE("run config validation") {
    RunConfig cfg = desk_preset();
    cfg.task.kind = "telepathy";
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("telepathy"));

    cfg = desk_preset();
    cfg.task.kind = "jsonl";
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg.task.jsonl_path = "data.jsonl";
    CHECK_NOTHROW(cfg.validate());

    cfg = desk_preset();
    cfg.eval.lengths.clear();
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);

    cfg = desk_preset();
    cfg.mode = "exhaustive";
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);

    cfg = desk_preset();
    cfg.beam_width = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);

    cfg = desk_preset();
    cfg.checkpoint_interval = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}
