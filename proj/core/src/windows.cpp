#include "ecoperceiver/windows.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ecoperceiver/rng.hpp"
#include "ecoperceiver/timeutil.hpp"

namespace ecp {

WindowDataset::WindowDataset(std::vector<NormalizedSite> sites, const VariableCatalog& catalog,
                             const NormalizationManifest& manifest, int64_t context_window,
                             const std::string& target_code, bool use_images)
    : sites_(std::move(sites)),
      catalog_(use_images ? catalog : catalog.tabular_only()),
      t_len_(context_window),
      target_code_(target_code),
      use_images_(use_images) {
    if (t_len_ < 1) throw ConfigError("windows: context window must be >= 1");
    if (!is_target_code(target_code_))
        throw ConfigError("windows: unknown target code '" + target_code_ + "'");
    if (use_images_) {
        for (int64_t b = 0; b < catalog_.band_count(); ++b) {
            const auto& code = catalog_.at(catalog_.tabular_count() + b).code;
            auto it = manifest.vars.find(code);
            if (it == manifest.vars.end())
                throw ContractError("windows: manifest lacks band stats for " + code);
            band_stats_.push_back(it->second);
        }
    }

    for (size_t s = 0; s < sites_.size(); ++s) {
        const auto& site = sites_[s];
        // ONEFlux timestamps are local standard time; only UTC-stamped sites
        // apply the longitude-derived offset.
        tz_offset_minutes_.push_back(
            site.meta.timestamps_utc
                ? static_cast<int64_t>(std::llround(site.meta.longitude / 15.0)) * 60
                : 0);
        const Column* tgt = site.table.find(target_code_);
        if (!tgt) continue;
        const auto& ts = site.table.start_minutes;
        for (int64_t i = t_len_ - 1; i < site.table.rows(); ++i) {
            if (!tgt->present[static_cast<size_t>(i)]) continue;
            // consecutive hourly timestamps only: no window bridges a grid gap
            if (ts[static_cast<size_t>(i)] - ts[static_cast<size_t>(i - t_len_ + 1)] !=
                (t_len_ - 1) * 60)
                continue;
            refs_.push_back(WindowRef{static_cast<int32_t>(s), i});
        }
    }
}

ObservationWindow WindowDataset::materialize(const WindowRef& ref) const {
    const auto& site = sites_[static_cast<size_t>(ref.site)];
    const int64_t v_tab = catalog_.tabular_count();
    const int64_t v_band = use_images_ ? catalog_.band_count() : 0;
    const int64_t v_total = v_tab + v_band;
    const int64_t first_row = ref.end_row - t_len_ + 1;

    ObservationWindow w;
    w.t_len = t_len_;
    w.v_tab = v_tab;
    w.v_band = v_band;
    w.values.assign(static_cast<size_t>(t_len_ * v_tab), 0.0);
    w.value_present.assign(static_cast<size_t>(t_len_ * v_tab), 0);
    w.band_pixels.assign(static_cast<size_t>(t_len_ * v_band * kBandPixels), 0.0);
    w.pixel_present.assign(static_cast<size_t>(t_len_ * v_band * kBandPixels), 0);
    w.mask = BoolTensor(Shape{t_len_, v_total}, 0);

    for (int64_t t = 0; t < t_len_; ++t) {
        const int64_t row = first_row + t;
        for (int64_t v = 0; v < v_tab; ++v) {
            const Column* col = site.table.find(catalog_.at(v).code);
            if (!col || !col->present[static_cast<size_t>(row)]) continue;
            w.values[static_cast<size_t>(t * v_tab + v)] = col->values[static_cast<size_t>(row)];
            w.value_present[static_cast<size_t>(t * v_tab + v)] = 1;
            w.mask.v[static_cast<size_t>(t * v_total + v)] = 1;
        }
        if (v_band > 0) {
            const int64_t local_minutes =
                site.table.start_minutes[static_cast<size_t>(row)] +
                tz_offset_minutes_[static_cast<size_t>(ref.site)];
            const DayImage* img = site.imagery.find(epoch_day(local_minutes));
            if (!img) continue;  // no imagery for this date: bands stay masked
            for (int64_t b = 0; b < v_band; ++b) {
                bool any = false;
                for (int64_t p = 0; p < kBandPixels; ++p) {
                    const size_t src = static_cast<size_t>(b * kBandPixels + p);
                    if (!img->present[src]) continue;
                    const size_t dst = static_cast<size_t>((t * v_band + b) * kBandPixels + p);
                    w.band_pixels[dst] =
                        normalize_value(static_cast<double>(img->pixels[src]),
                                        band_stats_[static_cast<size_t>(b)]);
                    w.pixel_present[dst] = 1;
                    any = true;
                }
                if (any) w.mask.v[static_cast<size_t>(t * v_total + v_tab + b)] = 1;
            }
        }
    }
    w.target = site.table.find(target_code_)->values[static_cast<size_t>(ref.end_row)];
    return w;
}

WindowBatch WindowDataset::gather(const std::vector<WindowRef>& refs, int workers) const {
    if (refs.empty()) throw ContractError("gather: empty batch");
    std::vector<ObservationWindow> windows(refs.size());
    auto fill = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) windows[i] = materialize(refs[i]);
    };
    if (workers <= 1 || refs.size() < 2) {
        fill(0, refs.size());
    } else {
        const size_t used = std::min<size_t>(static_cast<size_t>(workers), refs.size());
        const size_t chunk = (refs.size() + used - 1) / used;
        std::vector<std::thread> pool;
        for (size_t w = 1; w < used; ++w) {
            const size_t b = w * chunk;
            const size_t e = std::min(refs.size(), b + chunk);
            if (b >= e) break;
            pool.emplace_back(fill, b, e);
        }
        fill(0, std::min(chunk, refs.size()));
        for (auto& th : pool) th.join();
    }
    return pack_windows(windows);
}

uint64_t WindowDataset::sequence_hash() const {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    for (const auto& r : refs_) {
        mix(static_cast<uint64_t>(r.site));
        mix(static_cast<uint64_t>(r.end_row));
    }
    return h;
}

std::vector<std::vector<WindowRef>> make_batches(const WindowDataset& ds, int64_t batch_size,
                                                 uint64_t shuffle_seed, int64_t epoch, bool shuffle) {
    if (batch_size < 1) throw ConfigError("batches: batch_size must be >= 1");
    std::vector<WindowRef> order = ds.refs();
    if (shuffle) {
        Rng rng = Rng::derive(shuffle_seed, "shuffle/epoch" + std::to_string(epoch));
        rng.shuffle(order);
    }
    std::vector<std::vector<WindowRef>> batches;
    for (size_t b = 0; b < order.size(); b += static_cast<size_t>(batch_size)) {
        const size_t e = std::min(order.size(), b + static_cast<size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<int64_t>(b),
                             order.begin() + static_cast<int64_t>(e));
    }
    return batches;
}

}  // namespace ecp
