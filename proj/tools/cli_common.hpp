#pragma once

#include <string>
#include <vector>

#include "ecoperceiver/checkpoint.hpp"
#include "ecoperceiver/config.hpp"
#include "ecoperceiver/imagery.hpp"
#include "ecoperceiver/metrics.hpp"
#include "ecoperceiver/pipeline.hpp"
#include "ecoperceiver/synth.hpp"
#include "ecoperceiver/windows.hpp"

namespace ecptool {

// One site directory in the raw (synth / network-release) layout:
// meta.txt, releases/<YYYYMMDD>_<id>.csv, imagery.csim, optional .law.txt.
struct RawSite {
    std::string dir;
    ecp::SiteMeta meta;
    std::vector<ecp::RawRelease> releases;
    ecp::ImageryStack imagery;
    bool has_imagery = false;
    std::string law_path;  // empty if absent
};

std::vector<std::string> list_site_dirs(const std::string& corpus_dir);
RawSite load_raw_site(const std::string& site_dir, const ecp::VariableCatalog& catalog);

// A pipeline-output corpus: manifest.txt plus per-site fused.csv/meta/imagery.
struct ProcessedCorpus {
    ecp::NormalizationManifest manifest;
    std::vector<ecp::NormalizedSite> sites;

    std::vector<ecp::NormalizedSite> select(const std::vector<std::string>& site_ids) const;
};

ProcessedCorpus load_processed_corpus(const std::string& corpus_dir);

// Output-directory bookkeeping: every command echoes its effective
// configuration and a sha256 manifest of produced files. timings.csv is the
// one deliberately unhashed (non-deterministic) diagnostic.
class OutputDir {
public:
    explicit OutputDir(std::string root);
    const std::string& root() const { return root_; }
    std::string path(const std::string& rel) const;
    void ensure_subdir(const std::string& rel) const;
    void write_text(const std::string& rel, const std::string& content) const;
    void finalize(const ecp::RunConfig& cfg) const;

private:
    std::string root_;
};

// Pooled per-IGBP predictions of a model checkpoint over the given sites.
ecp::PredictionSet model_predictions(const ecp::Model<float>& model, const ProcessedCorpus& corpus,
                                     const std::vector<std::string>& site_ids,
                                     const std::string& target_code, int64_t seed, int workers);

std::string format_split_table(const ecp::SplitPlan& plan);

}  // namespace ecptool
