#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "commands.hpp"
#include "ecoperceiver/config.hpp"
#include "ecoperceiver/errors.hpp"

namespace {

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> overrides;
};

// defaults -> config file -> --set overrides -> dedicated flags (applied by
// the caller after this returns)
ecp::RunConfig build_config(const CommonOpts& opts) {
    auto cfg = ecp::RunConfig::defaults();
    if (!opts.config_file.empty()) cfg.load_file(opts.config_file);
    for (const auto& kv : opts.overrides) cfg.set_kv(kv);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_file, "key=value configuration file");
    cmd->add_option("--set", opts.overrides, "override a configuration key (key=value)");
    cmd->footer("Configuration keys:\n" + ecp::RunConfig::help_text());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EcoPerceiver: eddy-covariance flux modelling toolkit"};
    app.require_subcommand(1);

    // synth
    CommonOpts synth_opts;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic desk-scale corpus");
    synth->add_option("--out", synth_out, "output corpus directory")->required();
    add_common(synth, synth_opts);

    // pipeline
    CommonOpts pipe_opts;
    std::string pipe_in, pipe_out, pipe_split;
    int pipe_max_qc = -1;
    auto* pipe = app.add_subcommand("pipeline", "fuse, downsample, QC-filter and normalize a corpus");
    pipe->add_option("--in", pipe_in, "raw corpus directory")->required();
    pipe->add_option("--out", pipe_out, "processed corpus directory")->required();
    pipe->add_option("--max-qc", pipe_max_qc, "QC leniency threshold 0..3 (default from config)");
    pipe->add_option("--split", pipe_split,
                     "split plan file; normalization statistics then come from training sites only");
    add_common(pipe, pipe_opts);

    // split
    CommonOpts split_opts;
    std::string split_corpus, split_out;
    int64_t split_seed = -1;
    auto* split = app.add_subcommand("split", "IGBP-stratified train/test site split");
    split->add_option("--corpus", split_corpus, "corpus directory (raw or processed)")->required();
    split->add_option("--seed", split_seed, "split seed (default from config)");
    split->add_option("--out", split_out, "split plan output file")->required();
    add_common(split, split_opts);

    // train
    CommonOpts train_opts;
    std::string train_corpus, train_split, train_out, train_seeds;
    int train_ctx = -1;
    auto* train = app.add_subcommand("train", "train one model per seed");
    train->add_option("--corpus", train_corpus, "processed corpus directory")->required();
    train->add_option("--split", train_split, "split plan file")->required();
    train->add_option("--out", train_out, "output directory")->required();
    train->add_option("--seeds", train_seeds, "comma-separated seed list (default from config)");
    train->add_option("--context-window", train_ctx, "context window length T");
    add_common(train, train_opts);

    // eval
    CommonOpts eval_opts;
    std::string eval_corpus, eval_split, eval_runs, eval_out, eval_compare;
    auto* eval = app.add_subcommand("eval", "evaluate trained checkpoints on the test split");
    eval->add_option("--corpus", eval_corpus, "processed corpus directory")->required();
    eval->add_option("--split", eval_split, "split plan file")->required();
    eval->add_option("--runs", eval_runs, "training output root (seed_*/checkpoint.bin)")->required();
    eval->add_option("--out", eval_out, "output directory")->required();
    eval->add_option("--compare", eval_compare, "report.csv to compare against (paired t-test)");
    add_common(eval, eval_opts);

    // baseline
    CommonOpts base_opts;
    std::string base_corpus, base_split, base_out;
    double base_lambda = -1.0;
    auto* baseline = app.add_subcommand("baseline", "fit and evaluate the linear baseline");
    baseline->add_option("--corpus", base_corpus, "processed corpus directory")->required();
    baseline->add_option("--split", base_split, "split plan file")->required();
    baseline->add_option("--out", base_out, "output directory")->required();
    baseline->add_option("--lambda", base_lambda, "ridge damping (default from config)");
    add_common(baseline, base_opts);

    // ablate
    CommonOpts abl_opts;
    std::string abl_corpus, abl_split, abl_out;
    std::vector<std::string> abl_switches;
    auto* ablate = app.add_subcommand("ablate", "train and evaluate ablation variants");
    ablate->add_option("--corpus", abl_corpus, "processed corpus directory")->required();
    ablate->add_option("--split", abl_split, "split plan file")->required();
    ablate->add_option("--out", abl_out, "output directory")->required();
    ablate
        ->add_option("--switch", abl_switches,
                     "ablation switch: no_causal_mask, no_obs_dropout, no_fourier, no_images")
        ->required();
    add_common(ablate, abl_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) {
            ecptool::run_synth(build_config(synth_opts), synth_out);
        } else if (pipe->parsed()) {
            auto cfg = build_config(pipe_opts);
            if (pipe_max_qc >= 0) cfg.set("data.max_qc", std::to_string(pipe_max_qc));
            ecptool::run_pipeline(cfg, pipe_in, pipe_out, pipe_split);
        } else if (split->parsed()) {
            auto cfg = build_config(split_opts);
            if (split_seed >= 0) cfg.set("data.split_seed", std::to_string(split_seed));
            ecptool::run_split(cfg, split_corpus,
                               static_cast<uint64_t>(cfg.get_int("data.split_seed")), split_out);
        } else if (train->parsed()) {
            auto cfg = build_config(train_opts);
            if (!train_seeds.empty()) cfg.set("data.seeds", train_seeds);
            if (train_ctx > 0) cfg.set("model.context_window", std::to_string(train_ctx));
            ecptool::run_train(cfg, train_corpus, train_split, train_out);
        } else if (eval->parsed()) {
            ecptool::run_eval(build_config(eval_opts), eval_corpus, eval_split, eval_runs, eval_out,
                              eval_compare);
        } else if (baseline->parsed()) {
            auto cfg = build_config(base_opts);
            if (base_lambda >= 0.0) cfg.set("baseline.lambda", std::to_string(base_lambda));
            ecptool::run_baseline(cfg, base_corpus, base_split, base_out);
        } else if (ablate->parsed()) {
            ecptool::run_ablate(build_config(abl_opts), abl_corpus, abl_split, abl_out, abl_switches);
        }
        return 0;
    } catch (const ecp::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ecp::FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ecp::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
}
