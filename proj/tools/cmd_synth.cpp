#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cli_common.hpp"
#include "commands.hpp"
#include "ecoperceiver/timeutil.hpp"

namespace fs = std::filesystem;

namespace ecptool {

namespace {

// Splits the hourly table into `n_releases` overlapping release CSVs so that
// every pipeline run exercises the fusion path (overlap values identical).
void write_releases(const ecp::TimeTable& t, const std::string& site_dir, int n_releases) {
    fs::create_directories(fs::path(site_dir) / "releases");
    const int64_t rows = t.rows();
    std::vector<std::pair<int64_t, int64_t>> spans;
    if (n_releases <= 1 || rows < 48) {
        spans.emplace_back(0, rows);
    } else {
        const int64_t cut = rows * 3 / 5;
        const int64_t overlap = rows / 10;
        spans.emplace_back(0, cut);
        spans.emplace_back(cut - overlap, rows);
    }
    for (size_t i = 0; i < spans.size(); ++i) {
        const auto [b, e] = spans[i];
        ecp::TimeTable part;
        part.cadence_minutes = t.cadence_minutes;
        part.start_minutes.assign(t.start_minutes.begin() + b, t.start_minutes.begin() + e);
        part.order = t.order;
        for (const auto& code : t.order) {
            const auto& col = t.cols.at(code);
            ecp::Column c;
            c.values.assign(col.values.begin() + b, col.values.begin() + e);
            c.present.assign(col.present.begin() + b, col.present.begin() + e);
            part.cols.emplace(code, std::move(c));
            auto qit = t.qc.find(code);
            if (qit != t.qc.end())
                part.qc.emplace(code, std::vector<int8_t>(qit->second.begin() + b,
                                                          qit->second.begin() + e));
        }
        // release files carry QC columns and the units row, so they are
        // written by hand rather than through write_table_csv
        char date[16];
        std::snprintf(date, sizeof(date), "202401%02zu", i + 1);
        const std::string path =
            (fs::path(site_dir) / "releases" / (std::string(date) + "_synth" + std::to_string(i) + ".csv"))
                .string();
        std::ofstream out(path);
        if (!out) throw ecp::IoError("cannot write " + path);
        const auto catalog = ecp::default_catalog();
        out << "TIMESTAMP_START";
        for (const auto& code : part.order) {
            out << "," << code;
            if (part.qc.count(code)) out << "," << code << "_QC";
        }
        out << "\n";
        out << "#units,";
        bool first = true;
        for (const auto& code : part.order) {
            if (!first) out << ",";
            first = false;
            const int64_t ci = catalog.index_of(code);
            out << (ci >= 0 ? catalog.at(ci).unit : "umol CO2 m-2 s-1");
            if (part.qc.count(code)) out << ",";
        }
        out << "\n";
        char buf[40];
        for (int64_t r = 0; r < part.rows(); ++r) {
            out << ecp::format_timestamp(part.start_minutes[static_cast<size_t>(r)]);
            for (const auto& code : part.order) {
                const auto& col = part.cols.at(code);
                out << ",";
                if (col.present[static_cast<size_t>(r)]) {
                    std::snprintf(buf, sizeof(buf), "%.10g", col.values[static_cast<size_t>(r)]);
                    out << buf;
                } else {
                    out << "NA";
                }
                auto qit = part.qc.find(code);
                if (qit != part.qc.end()) {
                    out << ",";
                    const int8_t flag = qit->second[static_cast<size_t>(r)];
                    if (flag >= 0 && col.present[static_cast<size_t>(r)])
                        out << static_cast<int>(flag);
                    else
                        out << "NA";
                }
            }
            out << "\n";
        }
        if (!out) throw ecp::IoError("short write to " + path);
    }
}

}  // namespace

void run_synth(const ecp::RunConfig& cfg, const std::string& out_dir) {
    const auto igbps = cfg.get_string_list("synth.igbps");
    const auto per_igbp = cfg.get_int("synth.sites_per_igbp");
    if (igbps.empty() || per_igbp < 1)
        throw ecp::ConfigError("synth: need at least one IGBP class and one site per class");
    const int n_releases = static_cast<int>(cfg.get_int("synth.releases"));
    const double season_base = cfg.get_double("synth.seasonality_base");
    const double season_step = cfg.get_double("synth.seasonality_step");

    OutputDir out(out_dir);
    int site_index = 0;
    for (const auto& igbp : igbps) {
        for (int64_t i = 0; i < per_igbp; ++i, ++site_index) {
            ecp::SyntheticSiteSpec spec = cfg.synth_spec();
            char id[32];
            std::snprintf(id, sizeof(id), "SY-%c%02d", igbp.empty() ? 'X' : igbp[0],
                          site_index + 1);
            spec.site_id = id;
            spec.igbp = igbp;
            spec.seed = spec.seed + static_cast<uint64_t>(site_index) * 1000003ull;
            spec.seasonality = std::min(1.0, season_base + season_step * static_cast<double>(i));
            spec.latitude = 46.0 + 3.0 * static_cast<double>(i);
            spec.longitude = 10.0 + 3.0 * static_cast<double>(site_index);
            // IGBP classes differ in their flux law scale
            if (igbp == "GRA") {
                spec.alpha = 16.0;
                spec.reco0 = 1.4;
            }
            auto site = ecp::generate_synthetic_site(spec);

            const std::string site_dir = out.path(spec.site_id);
            fs::create_directories(site_dir);
            ecp::write_site_meta((fs::path(site_dir) / "meta.txt").string(), site.meta);
            write_releases(site.table, site_dir, n_releases);
            ecp::write_imagery((fs::path(site_dir) / "imagery.csim").string(), site.imagery);
            ecp::write_law_file((fs::path(site_dir) / ".law.txt").string(), site.law);
        }
    }
    out.finalize(cfg);
    std::printf("synth: wrote %d sites under %s\n", site_index, out_dir.c_str());
}

}  // namespace ecptool
