#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cli_common.hpp"
#include "commands.hpp"
#include "ecoperceiver/parallel.hpp"
#include "ecoperceiver/trainer.hpp"

namespace ecptool {

namespace {

ecp::ModelConfig apply_switch(ecp::ModelConfig cfg, const std::string& name) {
    if (name == "ours") return cfg;
    if (name == "no_causal_mask") {
        cfg.use_causal_mask = false;
    } else if (name == "no_obs_dropout") {
        cfg.use_obs_dropout = false;
    } else if (name == "no_fourier") {
        cfg.use_fourier = false;
    } else if (name == "no_images") {
        cfg.use_images = false;
    } else {
        throw ecp::ConfigError("unknown ablation switch '" + name +
                               "' (no_causal_mask, no_obs_dropout, no_fourier, no_images)");
    }
    return cfg;
}

struct Stats {
    double mean = 0, stddev = 0, median = 0, iqr = 0;
};

Stats stats_of(std::vector<double> v) {
    Stats s;
    const auto n = static_cast<double>(v.size());
    for (double x : v) s.mean += x;
    s.mean /= n;
    for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
    s.stddev = v.size() > 1 ? std::sqrt(s.stddev / (n - 1.0)) : 0.0;
    std::sort(v.begin(), v.end());
    auto quantile = [&v](double q) {
        const double pos = q * (static_cast<double>(v.size()) - 1.0);
        const size_t lo = static_cast<size_t>(pos);
        const size_t hi = std::min(v.size() - 1, lo + 1);
        const double frac = pos - static_cast<double>(lo);
        return v[lo] * (1.0 - frac) + v[hi] * frac;
    };
    s.median = quantile(0.5);
    s.iqr = quantile(0.75) - quantile(0.25);
    return s;
}

}  // namespace

void run_ablate(const ecp::RunConfig& cfg, const std::string& corpus_dir,
                const std::string& split_path, const std::string& out_dir,
                const std::vector<std::string>& switches) {
    ecp::set_num_threads(static_cast<int>(cfg.get_int("train.threads")));
    const auto catalog = ecp::default_catalog();
    const auto corpus = load_processed_corpus(corpus_dir);
    const auto plan = ecp::read_split_plan(split_path);
    const std::string target = cfg.get("data.target");
    const uint64_t split_seed = static_cast<uint64_t>(cfg.get_int("data.split_seed"));
    const uint64_t seed = cfg.get_seed_list("data.seeds").front();  // single-seed ablations
    const int workers = static_cast<int>(cfg.get_int("train.workers"));

    std::vector<std::string> variants = {"ours"};
    for (const auto& s : switches)
        if (s != "ours") variants.push_back(s);

    const auto [train_ids, val_ids] =
        ecp::train_val_split(plan.train_sites(), cfg.get_double("train.val_fraction"), split_seed);
    const auto test_ids = plan.test_sites();

    OutputDir out(out_dir);
    std::ostringstream table;
    table << "variant,nse_mean,nse_std,nse_median,nse_iqr,rmse_mean,rmse_std,rmse_median,rmse_iqr\n";
    char buf[40];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.6g", v);
        return std::string(buf);
    };

    for (const auto& variant : variants) {
        const auto model_cfg = apply_switch(cfg.model_config(), variant);
        ecp::WindowDataset train_ds(corpus.select(train_ids), catalog, corpus.manifest,
                                    model_cfg.context_window, target, model_cfg.use_images);
        ecp::WindowDataset val_ds(corpus.select(val_ids), catalog, corpus.manifest,
                                  model_cfg.context_window, target, model_cfg.use_images);
        auto result = ecp::train(model_cfg, catalog, train_ds, val_ds, cfg.train_config(seed));

        const std::string sub = "variant_" + variant;
        out.ensure_subdir(sub);
        ecp::save_checkpoint(out.path(sub + "/checkpoint.bin"), result.model, result.info);
        ecp::write_train_log(out.path(sub + "/trainlog.csv"), result.log);

        auto ps = model_predictions(result.model, corpus, test_ids, target,
                                    static_cast<int64_t>(seed), workers);
        const auto report = ecp::evaluate({ps});
        ecp::write_report_csv(out.path(sub + "/report.csv"), report);

        std::vector<double> nses, rmses;
        for (const auto& igbp : report.igbp_classes()) {
            nses.push_back(report.mean_nse(igbp));
            rmses.push_back(report.mean_rmse(igbp));
        }
        const auto sn = stats_of(nses);
        const auto sr = stats_of(rmses);
        table << variant << "," << fmt(sn.mean) << "," << fmt(sn.stddev) << "," << fmt(sn.median)
              << "," << fmt(sn.iqr) << "," << fmt(sr.mean) << "," << fmt(sr.stddev) << ","
              << fmt(sr.median) << "," << fmt(sr.iqr) << "\n";
        std::printf("ablate: %s mean NSE %.4f mean RMSE %.4f (H_i=%d, V_t=%lld)\n", variant.c_str(),
                    sn.mean, sr.mean, model_cfg.input_width(),
                    static_cast<long long>(result.model.catalog().total_count()));
    }
    out.write_text("ablation.csv", table.str());
    out.finalize(cfg);
}

}  // namespace ecptool
