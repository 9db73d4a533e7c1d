#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "cli_common.hpp"
#include "commands.hpp"

namespace fs = std::filesystem;

namespace ecptool {

namespace {

struct StagedSite {
    RawSite raw;
    ecp::TimeTable table;  // fused, hourly, QC-filtered, physical units
    ecp::QcStats qc_stats;
    int64_t pruned_columns = 0;
};

}  // namespace

void run_pipeline(const ecp::RunConfig& cfg, const std::string& in_dir, const std::string& out_dir,
                  const std::string& split_path) {
    const int max_qc = static_cast<int>(cfg.get_int("data.max_qc"));
    const auto catalog = ecp::default_catalog();
    OutputDir out(out_dir);

    std::set<std::string> train_ids;
    if (!split_path.empty()) {
        const auto plan = ecp::read_split_plan(split_path);
        for (const auto& id : plan.train_sites()) train_ids.insert(id);
        if (train_ids.empty())
            throw ecp::ConfigError("pipeline: split plan has no training sites");
    }

    // fuse, downsample, QC-filter every site
    std::vector<StagedSite> staged;
    for (const auto& dir : list_site_dirs(in_dir)) {
        StagedSite s;
        s.raw = load_raw_site(dir, catalog);
        for (const auto& rel : s.raw.releases)
            s.pruned_columns += static_cast<int64_t>(rel.pruned_columns.size());
        ecp::TimeTable fused = ecp::fuse_releases(s.raw.releases, catalog);
        if (fused.cadence_minutes == 30) fused = ecp::downsample_hourly(fused, catalog);
        s.table = ecp::apply_qc_leniency(fused, max_qc, &s.qc_stats);
        staged.push_back(std::move(s));
    }

    // normalization statistics from the training sites only (all sites when
    // no split plan is given, like the published pipeline)
    std::vector<std::vector<std::vector<double>>> band_store;
    band_store.reserve(staged.size());  // SiteTable keeps pointers into it
    std::vector<ecp::SiteTable> stats_sites;
    for (const auto& s : staged) {
        const bool in_stats = train_ids.empty() || train_ids.count(s.raw.meta.site_id) > 0;
        if (!in_stats) continue;
        std::vector<std::vector<double>> bands(static_cast<size_t>(ecp::kBandChannels));
        for (const auto& day : s.raw.imagery.days)
            for (int64_t c = 0; c < ecp::kBandChannels; ++c)
                for (int64_t p = 0; p < ecp::kBandPixels; ++p)
                    if (day.present[static_cast<size_t>(c * ecp::kBandPixels + p)])
                        bands[static_cast<size_t>(c)].push_back(
                            day.pixels[static_cast<size_t>(c * ecp::kBandPixels + p)]);
        band_store.push_back(std::move(bands));
        stats_sites.push_back(ecp::SiteTable{s.raw.meta.site_id, s.raw.meta.igbp, &s.table,
                                             &band_store.back()});
    }
    ecp::NormalizationManifest manifest;
    try {
        manifest = ecp::compute_manifest(stats_sites, catalog);
    } catch (const ecp::ContractError& e) {
        // a corpus-content problem, not an internal one: map to exit code 2
        throw ecp::ConfigError(e.what());
    }
    ecp::write_manifest(out.path("manifest.txt"), manifest);

    for (auto& s : staged) {
        ecp::ClampStats clamps;
        ecp::normalize_table(s.table, catalog, manifest, &clamps);
        const std::string site_dir = out.path(s.raw.meta.site_id);
        fs::create_directories(site_dir);
        ecp::write_site_meta((fs::path(site_dir) / "meta.txt").string(), s.raw.meta);
        ecp::write_table_csv((fs::path(site_dir) / "fused.csv").string(), s.table);
        if (s.raw.has_imagery)
            fs::copy_file(fs::path(s.raw.dir) / "imagery.csim", fs::path(site_dir) / "imagery.csim",
                          fs::copy_options::overwrite_existing);
        if (!s.raw.law_path.empty())
            fs::copy_file(s.raw.law_path, fs::path(site_dir) / ".law.txt",
                          fs::copy_options::overwrite_existing);

        std::ostringstream report;
        report << "site=" << s.raw.meta.site_id << "\n";
        report << "rows=" << s.table.rows() << "\n";
        report << "releases=" << s.raw.releases.size() << "\n";
        report << "pruned_columns=" << s.pruned_columns << "\n";
        report << "qc_cells_checked=" << s.qc_stats.cells_checked << "\n";
        report << "qc_cells_removed=" << s.qc_stats.cells_removed << "\n";
        for (const auto& [code, n] : s.qc_stats.removed_per_column)
            report << "qc_removed." << code << "=" << n << "\n";
        report << "clamped_cells=" << clamps.clamped << "\n";
        for (const auto& [code, n] : clamps.per_column) report << "clamped." << code << "=" << n << "\n";
        out.write_text(s.raw.meta.site_id + "/report.txt", report.str());
    }
    out.finalize(cfg);
    std::printf("pipeline: processed %zu sites (max_qc=%d) into %s\n", staged.size(), max_qc,
                out_dir.c_str());
}

}  // namespace ecptool
