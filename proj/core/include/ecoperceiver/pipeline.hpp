#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecoperceiver/catalog.hpp"
#include "ecoperceiver/table.hpp"

namespace ecp {

// --- fusion -----------------------------------------------------------------

// Fuses multi-release tables of one site onto a common grid. Overlapping
// timestamps take the most recent release's non-missing value, falling back
// to older releases; QC flags travel with their values. The grid cadence is
// the finest cadence among the releases.
TimeTable fuse_releases(const std::vector<RawRelease>& releases, const VariableCatalog& catalog);

// --- downsampling -----------------------------------------------------------

// 30-minute -> hourly. Mean for state variables, sum for accumulations
// (P_F), circular mean for wind direction; QC is the worse flag of the pair.
// A half-missing hour keeps the present value with QC worsened by one
// (capped at 3); both missing stays missing.
TimeTable downsample_hourly(const TimeTable& half_hourly, const VariableCatalog& catalog);

// --- QC leniency ------------------------------------------------------------

struct QcStats {
    int64_t cells_checked = 0;
    int64_t cells_removed = 0;
    std::map<std::string, int64_t> removed_per_column;
};

// Values whose QC flag exceeds max_qc become missing (handled downstream by
// the modality mask). Flagless values (no QC column or NA flag) count as
// directly measured.
TimeTable apply_qc_leniency(const TimeTable& t, int max_qc, QcStats* stats = nullptr);

// --- normalization ----------------------------------------------------------

struct VarStats {
    VarKind kind = VarKind::Acyclic;
    double min = 0.0;
    double max = 0.0;
    bool degenerate = false;
};

struct TargetStats {
    double mean = 0.0;
    double variance = 0.0;
    int64_t n = 0;
};

struct NormalizationManifest {
    std::map<std::string, VarStats> vars;
    // keyed "<target>|site|<site_id>" and "<target>|igbp|<igbp>"
    std::map<std::string, TargetStats> target_stats;
};

struct SiteTable {
    std::string site_id;
    std::string igbp;
    const TimeTable* table = nullptr;
    // per-band training pixel values (bands are normalized like acyclic
    // variables, with per-band min-max over the training corpus)
    const std::vector<std::vector<double>>* band_samples = nullptr;
};

// Min-max statistics over the training sites only. Cyclic variables take
// their catalog-declared physical period instead of data extremes;
// degenerate (min == max) variables are flagged. A catalog variable with no
// observation anywhere is an error naming the variable.
NormalizationManifest compute_manifest(const std::vector<SiteTable>& training_sites,
                                       const VariableCatalog& catalog);

// Cyclic: 2(x-min)/(max-min) - 1 in [-1, 1) after wrapping into the period.
// Acyclic: (x-min)/(max-min) - 0.5 clamped to [-0.5, 0.5] (clamped reported
// for out-of-manifest test values). Degenerate variables encode as 0.
double normalize_value(double x, const VarStats& vs, bool* clamped = nullptr);
double denormalize_value(double z, const VarStats& vs);

struct ClampStats {
    int64_t clamped = 0;
    std::map<std::string, int64_t> per_column;
};

// Normalizes predictor columns in place (targets pass through untouched).
void normalize_table(TimeTable& t, const VariableCatalog& catalog, const NormalizationManifest& m,
                     ClampStats* stats = nullptr);

void write_manifest(const std::string& path, const NormalizationManifest& m);
NormalizationManifest read_manifest(const std::string& path);

// --- splitting --------------------------------------------------------------

struct SiteRef {
    std::string site_id;
    std::string igbp;
};

struct SplitPlan {
    uint64_t seed = 0;
    // igbp -> site ids
    std::map<std::string, std::vector<std::string>> train;
    std::map<std::string, std::vector<std::string>> test;

    bool is_test(const std::string& site_id) const;
    std::vector<std::string> train_sites() const;
    std::vector<std::string> test_sites() const;
};

// Number of test sites for an IGBP class with n sites.
inline int64_t test_count_for(int64_t n_sites) {
    const int64_t by_fraction = (n_sites + 4) / 5;  // ceil(0.2 n)
    return by_fraction < 5 ? by_fraction : 5;
}

// Uniform per-IGBP sampling of min(5, ceil(0.2 n)) test sites, seeded.
SplitPlan stratified_split(const std::vector<SiteRef>& sites, uint64_t seed);

// Site-level train/validation split: ceil(fraction * n) validation sites.
std::pair<std::vector<std::string>, std::vector<std::string>> train_val_split(
    std::vector<std::string> train_sites, double fraction, uint64_t seed);

void write_split_plan(const std::string& path, const SplitPlan& plan);
SplitPlan read_split_plan(const std::string& path);

}  // namespace ecp
