// Command-line front end: train / eval / gen / sweep over run configs.
// Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 divergence.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrag/qrag.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out;
    std::string ablation;
    std::string mode;
    std::vector<int32_t> lengths;
    std::optional<int64_t> beam;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bool config_required) {
    auto* opt = cmd->add_option("--config", flags.config_path, "run config JSON file");
    if (config_required) opt->required();
    cmd->add_option("--seed", flags.seed, "override train.seed");
    cmd->add_option("--out", flags.out, "override output directory");
    cmd->add_option("--ablation", flags.ablation,
                    "override ablation: none|no_target|no_soft_q|sft|no_ft");
    cmd->add_option("--mode", flags.mode, "retrieval mode: greedy | beam | beam:<k>");
    cmd->add_option("--lengths", flags.lengths, "override eval lengths")->delimiter(',');
    cmd->add_option("--beam", flags.beam, "beam width for mode=beam");
}

// Flags win over the config file.
qrag::RunConfig resolve_config(const CommonFlags& flags) {
    qrag::RunConfig cfg = flags.config_path.empty() ? qrag::desk_preset()
                                                    : qrag::load_run_config(flags.config_path);
    if (flags.seed) cfg.train.seed = *flags.seed;
    if (!flags.out.empty()) cfg.out_dir = flags.out;
    if (!flags.ablation.empty()) cfg.train.ablation = qrag::ablation_from_name(flags.ablation);
    if (!flags.mode.empty()) {
        std::string mode = flags.mode;
        const auto colon = mode.find(':');
        if (colon != std::string::npos) {
            cfg.beam_width = std::stoll(mode.substr(colon + 1));
            mode = mode.substr(0, colon);
        }
        cfg.mode = mode;
    }
    if (!flags.lengths.empty()) cfg.eval.lengths = flags.lengths;
    if (flags.beam) cfg.beam_width = *flags.beam;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"value-based multi-step chunk retrieval"};
    app.require_subcommand(1);

    CommonFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "run a training job");
    add_common_flags(train_cmd, train_flags, /*config_required=*/true);

    CommonFlags eval_flags;
    std::string eval_checkpoint;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint over context lengths");
    eval_cmd->add_option("checkpoint", eval_checkpoint, "checkpoint file")->required();
    add_common_flags(eval_cmd, eval_flags, /*config_required=*/true);

    CommonFlags gen_flags;
    int64_t gen_count = 10;
    std::string gen_out_file;
    auto* gen_cmd = app.add_subcommand("gen", "write generated instances as JSONL");
    add_common_flags(gen_cmd, gen_flags, /*config_required=*/true);
    gen_cmd->add_option("--count", gen_count, "number of instances");
    gen_cmd->add_option("--file", gen_out_file, "output JSONL path")->required();

    CommonFlags sweep_flags;
    auto* sweep_cmd = app.add_subcommand("sweep", "train, then evaluate across lengths");
    add_common_flags(sweep_cmd, sweep_flags, /*config_required=*/true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train_cmd->parsed()) {
            qrag::run_train(resolve_config(train_flags));
        } else if (eval_cmd->parsed()) {
            qrag::run_eval(resolve_config(eval_flags), eval_checkpoint);
        } else if (gen_cmd->parsed()) {
            qrag::run_gen(resolve_config(gen_flags), gen_count, gen_out_file);
        } else if (sweep_cmd->parsed()) {
            qrag::run_sweep(resolve_config(sweep_flags));
        }
    } catch (const qrag::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const qrag::InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
