#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecoperceiver/encoding.hpp"
#include "ecoperceiver/imagery.hpp"
#include "ecoperceiver/pipeline.hpp"
#include "ecoperceiver/table.hpp"

namespace ecp {

// A site as the dataloader consumes it: normalized predictors, physical
// targets, physical imagery (bands are normalized per manifest at window
// materialization).
struct NormalizedSite {
    SiteMeta meta;
    TimeTable table;
    ImageryStack imagery;
};

struct WindowRef {
    int32_t site = 0;
    int64_t end_row = 0;  // window covers rows [end_row - T + 1, end_row]
};

// Sliding-window view over a set of sites. One window per hourly row i with
// i >= T-1 whose target is present and whose T timestamps are consecutive
// hours; windows never span a site boundary. Band tokens come from the image
// of each hour's local calendar date; dates without imagery mask all bands.
class WindowDataset {
public:
    WindowDataset(std::vector<NormalizedSite> sites, const VariableCatalog& catalog,
                  const NormalizationManifest& manifest, int64_t context_window,
                  const std::string& target_code, bool use_images = true);

    const std::vector<WindowRef>& refs() const { return refs_; }
    int64_t size() const { return static_cast<int64_t>(refs_.size()); }
    int64_t context_window() const { return t_len_; }
    const VariableCatalog& catalog() const { return catalog_; }
    const std::vector<NormalizedSite>& sites() const { return sites_; }
    const std::string& site_of(const WindowRef& ref) const {
        return sites_[static_cast<size_t>(ref.site)].meta.site_id;
    }
    const std::string& igbp_of(const WindowRef& ref) const {
        return sites_[static_cast<size_t>(ref.site)].meta.igbp;
    }

    ObservationWindow materialize(const WindowRef& ref) const;

    // Assembles a batch; workers > 1 fills disjoint slots in parallel, so
    // the result is independent of the worker count.
    WindowBatch gather(const std::vector<WindowRef>& refs, int workers = 1) const;

    // Order fingerprint for loader-determinism checks.
    uint64_t sequence_hash() const;

private:
    std::vector<NormalizedSite> sites_;
    VariableCatalog catalog_;
    std::vector<VarStats> band_stats_;  // per band, from the manifest
    int64_t t_len_;
    std::string target_code_;
    bool use_images_;
    std::vector<WindowRef> refs_;
    std::vector<int64_t> tz_offset_minutes_;  // per site, for local-date imagery lookup
};

// Epoch-seeded batch order: a pure function of (shuffle_seed, epoch),
// independent of worker count; the final short batch is emitted.
std::vector<std::vector<WindowRef>> make_batches(const WindowDataset& ds, int64_t batch_size,
                                                 uint64_t shuffle_seed, int64_t epoch,
                                                 bool shuffle = true);

}  // namespace ecp
