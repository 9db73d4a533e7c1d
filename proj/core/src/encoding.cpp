#include "ecoperceiver/encoding.hpp"

namespace ecp {

WindowBatch pack_windows(const std::vector<ObservationWindow>& windows) {
    if (windows.empty()) throw ContractError("pack_windows: empty batch");
    const auto& w0 = windows.front();
    WindowBatch b;
    b.batch = static_cast<int64_t>(windows.size());
    b.t_len = w0.t_len;
    b.v_tab = w0.v_tab;
    b.v_band = w0.v_band;
    b.values.reserve(static_cast<size_t>(b.batch) * w0.values.size());
    b.value_present.reserve(static_cast<size_t>(b.batch) * w0.value_present.size());
    b.band_pixels.reserve(static_cast<size_t>(b.batch) * w0.band_pixels.size());
    b.pixel_present.reserve(static_cast<size_t>(b.batch) * w0.pixel_present.size());
    b.mask.shape = Shape{b.batch, b.t_len, b.v_tab + b.v_band};
    b.mask.v.reserve(static_cast<size_t>(b.batch) * w0.mask.v.size());
    for (const auto& w : windows) {
        if (w.t_len != b.t_len || w.v_tab != b.v_tab || w.v_band != b.v_band)
            throw ContractError("pack_windows: inconsistent window shapes in batch");
        b.values.insert(b.values.end(), w.values.begin(), w.values.end());
        b.value_present.insert(b.value_present.end(), w.value_present.begin(), w.value_present.end());
        b.band_pixels.insert(b.band_pixels.end(), w.band_pixels.begin(), w.band_pixels.end());
        b.pixel_present.insert(b.pixel_present.end(), w.pixel_present.begin(), w.pixel_present.end());
        b.mask.v.insert(b.mask.v.end(), w.mask.v.begin(), w.mask.v.end());
        b.targets.push_back(w.target);
    }
    return b;
}

}  // namespace ecp
