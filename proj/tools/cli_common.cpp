#include "cli_common.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ecoperceiver/sha256.hpp"

namespace fs = std::filesystem;

namespace ecptool {

std::vector<std::string> list_site_dirs(const std::string& corpus_dir) {
    if (!fs::is_directory(corpus_dir)) throw ecp::IoError("not a directory: " + corpus_dir);
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(corpus_dir)) {
        if (!entry.is_directory()) continue;
        if (fs::exists(entry.path() / "meta.txt")) out.push_back(entry.path().string());
    }
    std::sort(out.begin(), out.end());
    if (out.empty())
        throw ecp::IoError("no site directories (with meta.txt) under " + corpus_dir);
    return out;
}

RawSite load_raw_site(const std::string& site_dir, const ecp::VariableCatalog& catalog) {
    RawSite site;
    site.dir = site_dir;
    site.meta = ecp::read_site_meta((fs::path(site_dir) / "meta.txt").string());
    const fs::path releases = fs::path(site_dir) / "releases";
    if (!fs::is_directory(releases))
        throw ecp::IoError(site_dir + ": missing releases/ directory");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(releases))
        if (entry.path().extension() == ".csv") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ecp::IoError(site_dir + ": no release CSVs");
    for (const auto& f : files) site.releases.push_back(ecp::read_release_csv(f, catalog));
    const fs::path imagery = fs::path(site_dir) / "imagery.csim";
    if (fs::exists(imagery)) {
        site.imagery = ecp::read_imagery(imagery.string());
        site.imagery.site_id = site.meta.site_id;
        site.has_imagery = true;
    }
    const fs::path law = fs::path(site_dir) / ".law.txt";
    if (fs::exists(law)) site.law_path = law.string();
    return site;
}

std::vector<ecp::NormalizedSite> ProcessedCorpus::select(
    const std::vector<std::string>& site_ids) const {
    std::vector<ecp::NormalizedSite> out;
    for (const auto& id : site_ids) {
        bool found = false;
        for (const auto& s : sites)
            if (s.meta.site_id == id) {
                out.push_back(s);
                found = true;
                break;
            }
        if (!found) throw ecp::ConfigError("corpus has no site '" + id + "'");
    }
    return out;
}

ProcessedCorpus load_processed_corpus(const std::string& corpus_dir) {
    ProcessedCorpus corpus;
    const fs::path manifest = fs::path(corpus_dir) / "manifest.txt";
    if (!fs::exists(manifest))
        throw ecp::IoError(corpus_dir + ": missing manifest.txt (not a pipeline output?)");
    corpus.manifest = ecp::read_manifest(manifest.string());
    for (const auto& dir : list_site_dirs(corpus_dir)) {
        ecp::NormalizedSite site;
        site.meta = ecp::read_site_meta((fs::path(dir) / "meta.txt").string());
        site.table = ecp::read_table_csv((fs::path(dir) / "fused.csv").string());
        const fs::path imagery = fs::path(dir) / "imagery.csim";
        if (fs::exists(imagery)) {
            site.imagery = ecp::read_imagery(imagery.string());
            site.imagery.site_id = site.meta.site_id;
        }
        corpus.sites.push_back(std::move(site));
    }
    return corpus;
}

OutputDir::OutputDir(std::string root) : root_(std::move(root)) {
    fs::create_directories(root_);
}

std::string OutputDir::path(const std::string& rel) const {
    return (fs::path(root_) / rel).string();
}

void OutputDir::ensure_subdir(const std::string& rel) const {
    fs::create_directories(fs::path(root_) / rel);
}

void OutputDir::write_text(const std::string& rel, const std::string& content) const {
    const fs::path p = fs::path(root_) / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw ecp::IoError("cannot write " + p.string());
    out << content;
}

void OutputDir::finalize(const ecp::RunConfig& cfg) const {
    write_text("effective_config.txt", cfg.to_text());
    std::vector<std::string> rel_paths;
    for (const auto& entry : fs::recursive_directory_iterator(root_)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), root_).generic_string();
        if (rel == "files.sha256") continue;
        if (fs::path(rel).filename() == "timings.csv") continue;  // wall times are not reproducible
        rel_paths.push_back(rel);
    }
    std::sort(rel_paths.begin(), rel_paths.end());
    std::ostringstream os;
    for (const auto& rel : rel_paths)
        os << ecp::sha256_file_hex((fs::path(root_) / rel).string()) << "  " << rel << "\n";
    write_text("files.sha256", os.str());
}

ecp::PredictionSet model_predictions(const ecp::Model<float>& model, const ProcessedCorpus& corpus,
                                     const std::vector<std::string>& site_ids,
                                     const std::string& target_code, int64_t seed, int workers) {
    ecp::PredictionSet ps;
    ps.seed = seed;
    const auto& cfg = model.config();
    ecp::WindowDataset ds(corpus.select(site_ids), ecp::default_catalog(), corpus.manifest,
                          cfg.context_window, target_code, cfg.use_images);
    ecp::Tape<float> tape;
    tape.recording = false;
    for (const auto& refs : ecp::make_batches(ds, 512, 0, 0, false)) {
        auto batch = ds.gather(refs, workers);
        auto out = model.forward(tape, batch, ecp::Mode::Eval);
        for (size_t i = 0; i < refs.size(); ++i) {
            auto& [pred, obs] = ps.by_igbp[ds.igbp_of(refs[i])];
            pred.push_back(static_cast<double>(out.predictions.data()[static_cast<int64_t>(i)]));
            obs.push_back(batch.targets[i]);
        }
    }
    return ps;
}

std::string format_split_table(const ecp::SplitPlan& plan) {
    std::ostringstream os;
    os << "IGBP  train  test\n";
    int64_t total_train = 0, total_test = 0;
    for (const auto& [igbp, test_ids] : plan.test) {
        const auto& train_ids = plan.train.at(igbp);
        os << igbp << "  " << train_ids.size() << "  " << test_ids.size() << "\n";
        total_train += static_cast<int64_t>(train_ids.size());
        total_test += static_cast<int64_t>(test_ids.size());
    }
    os << "total  " << total_train << "  " << total_test << "\n";
    return os.str();
}

}  // namespace ecptool
