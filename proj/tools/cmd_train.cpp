#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_common.hpp"
#include "commands.hpp"
#include "ecoperceiver/parallel.hpp"
#include "ecoperceiver/trainer.hpp"

namespace ecptool {

namespace {

void write_timings(const std::string& path, const ecp::TrainLog& log) {
    std::ofstream out(path);
    if (!out) throw ecp::IoError("cannot write " + path);
    out << "epoch,wall_seconds\n";
    char buf[40];
    for (const auto& e : log.epochs) {
        std::snprintf(buf, sizeof(buf), "%.3f", e.wall_seconds);
        out << e.epoch << "," << buf << "\n";
    }
}

}  // namespace

void run_train(const ecp::RunConfig& cfg, const std::string& corpus_dir,
               const std::string& split_path, const std::string& out_dir) {
    ecp::set_num_threads(static_cast<int>(cfg.get_int("train.threads")));
    const auto catalog = ecp::default_catalog();
    const auto corpus = load_processed_corpus(corpus_dir);
    const auto plan = ecp::read_split_plan(split_path);
    const auto model_cfg = cfg.model_config();
    const std::string target = cfg.get("data.target");
    const double val_fraction = cfg.get_double("train.val_fraction");
    const uint64_t split_seed = static_cast<uint64_t>(cfg.get_int("data.split_seed"));

    const auto [train_ids, val_ids] =
        ecp::train_val_split(plan.train_sites(), val_fraction, split_seed);

    ecp::WindowDataset train_ds(corpus.select(train_ids), catalog, corpus.manifest,
                                model_cfg.context_window, target, model_cfg.use_images);
    ecp::WindowDataset val_ds(corpus.select(val_ids), catalog, corpus.manifest,
                              model_cfg.context_window, target, model_cfg.use_images);
    std::printf("train: %lld train windows (%zu sites), %lld validation windows (%zu sites)\n",
                static_cast<long long>(train_ds.size()), train_ids.size(),
                static_cast<long long>(val_ds.size()), val_ids.size());

    OutputDir out(out_dir);
    for (uint64_t seed : cfg.get_seed_list("data.seeds")) {
        const auto tc = cfg.train_config(seed);
        auto result = ecp::train(model_cfg, catalog, train_ds, val_ds, tc);
        const std::string sub = "seed_" + std::to_string(seed);
        out.ensure_subdir(sub);
        ecp::save_checkpoint(out.path(sub + "/checkpoint.bin"), result.model, result.info);
        ecp::write_train_log(out.path(sub + "/trainlog.csv"), result.log);
        write_timings(out.path(sub + "/timings.csv"), result.log);
        std::printf(
            "train: seed %llu best epoch %d val_mse %.6g (%lld parameters, %zu epochs run)\n",
            static_cast<unsigned long long>(seed), result.log.best_epoch, result.log.best_val_loss,
            static_cast<long long>(result.model.n_parameters()), result.log.epochs.size());
    }
    out.finalize(cfg);
}

}  // namespace ecptool
