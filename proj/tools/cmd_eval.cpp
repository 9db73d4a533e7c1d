#include <cstdio>
#include <filesystem>

#include "cli_common.hpp"
#include "commands.hpp"
#include "ecoperceiver/parallel.hpp"

namespace fs = std::filesystem;

namespace ecptool {

void run_eval(const ecp::RunConfig& cfg, const std::string& corpus_dir,
              const std::string& split_path, const std::string& runs_dir,
              const std::string& out_dir, const std::string& compare_report) {
    ecp::set_num_threads(static_cast<int>(cfg.get_int("train.threads")));
    const auto corpus = load_processed_corpus(corpus_dir);
    const auto plan = ecp::read_split_plan(split_path);
    const std::string target = cfg.get("data.target");
    const int workers = static_cast<int>(cfg.get_int("train.workers"));
    const auto test_ids = plan.test_sites();

    // discover per-seed checkpoints under the training output root
    std::vector<std::pair<int64_t, std::string>> checkpoints;
    if (!fs::is_directory(runs_dir)) throw ecp::IoError("not a directory: " + runs_dir);
    for (const auto& entry : fs::directory_iterator(runs_dir)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("seed_", 0) != 0) continue;
        const fs::path ckpt = entry.path() / "checkpoint.bin";
        if (!fs::exists(ckpt)) throw ecp::IoError("missing checkpoint: " + ckpt.string());
        checkpoints.emplace_back(std::stoll(name.substr(5)), ckpt.string());
    }
    std::sort(checkpoints.begin(), checkpoints.end());
    if (checkpoints.empty())
        throw ecp::IoError("no seed_*/checkpoint.bin under " + runs_dir);

    std::vector<ecp::PredictionSet> sets;
    for (const auto& [seed, path] : checkpoints) {
        auto model = ecp::load_checkpoint(path);
        sets.push_back(model_predictions(model, corpus, test_ids, target, seed, workers));
    }
    const auto report = ecp::evaluate(sets);

    OutputDir out(out_dir);
    ecp::write_report_csv(out.path("report.csv"), report);
    for (const auto& w : report.warnings) std::printf("eval: warning: %s\n", w.c_str());
    for (const auto& igbp : report.igbp_classes())
        std::printf("eval: %s mean NSE %.4f mean RMSE %.4f over %zu seed(s)\n", igbp.c_str(),
                    report.mean_nse(igbp), report.mean_rmse(igbp), checkpoints.size());

    if (!compare_report.empty()) {
        const auto other = ecp::read_report_csv(compare_report);
        const auto rows = ecp::compare_reports(report, other);
        ecp::write_summary_csv(out.path("summary.csv"), rows);
        for (const auto& r : rows) {
            if (r.has_test)
                std::printf("eval: %s  this %.4f vs other %.4f  t=%.4f p=%.4g df=%lld\n",
                            r.igbp.c_str(), r.a_nse, r.b_nse, r.test.t, r.test.p,
                            static_cast<long long>(r.test.df));
            else
                std::printf("eval: %s  this %.4f vs other %.4f  (no t-test: single seed)\n",
                            r.igbp.c_str(), r.a_nse, r.b_nse);
        }
    }
    out.finalize(cfg);
}

}  // namespace ecptool
