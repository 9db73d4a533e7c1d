#include <cstdio>

#include "cli_common.hpp"
#include "commands.hpp"
#include "ecoperceiver/baseline.hpp"

namespace ecptool {

void run_baseline(const ecp::RunConfig& cfg, const std::string& corpus_dir,
                  const std::string& split_path, const std::string& out_dir) {
    const auto catalog = ecp::default_catalog();
    const auto corpus = load_processed_corpus(corpus_dir);
    const auto plan = ecp::read_split_plan(split_path);
    const std::string target = cfg.get("data.target");
    const double lambda = cfg.get_double("baseline.lambda");
    const auto t_len = cfg.get_int("model.context_window");
    const bool use_images = cfg.get_bool("model.use_images");

    // the deterministic baseline has no validation needs, so it fits on the
    // whole training partition (like the tabular comparators it stands for)
    ecp::WindowDataset train_ds(corpus.select(plan.train_sites()), catalog, corpus.manifest, t_len,
                                target, use_images);
    auto model = ecp::fit_linear_baseline(train_ds, lambda);

    ecp::WindowDataset test_ds(corpus.select(plan.test_sites()), catalog, corpus.manifest, t_len,
                               target, use_images);
    ecp::PredictionSet ps;
    ps.seed = 0;
    for (const auto& ref : test_ds.refs()) {
        const auto w = test_ds.materialize(ref);
        auto& [pred, obs] = ps.by_igbp[test_ds.igbp_of(ref)];
        pred.push_back(model.predict(w));
        obs.push_back(w.target);
    }
    const auto report = ecp::evaluate({ps});

    OutputDir out(out_dir);
    ecp::write_baseline(out.path("baseline.txt"), model);
    ecp::write_report_csv(out.path("report.csv"), report);
    for (const auto& igbp : report.igbp_classes())
        std::printf("baseline: %s NSE %.4f RMSE %.4f\n", igbp.c_str(), report.mean_nse(igbp),
                    report.mean_rmse(igbp));
    out.finalize(cfg);
}

}  // namespace ecptool
