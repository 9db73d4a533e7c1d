#pragma once

#include <string>
#include <vector>

#include "ecoperceiver/catalog.hpp"
#include "ecoperceiver/encoding.hpp"
#include "ecoperceiver/rng.hpp"

namespace testsupport {

inline ecp::VariableCatalog tiny_catalog(int n_tab, int n_band) {
    ecp::VariableCatalog c;
    for (int i = 0; i < n_tab; ++i) {
        ecp::VarDesc d;
        d.code = "VAR" + std::to_string(i);
        if (i == 1) {
            d.kind = ecp::VarKind::Cyclic;
            d.agg = ecp::AggKind::CircularMean;
            d.cycle_min = 0.0;
            d.cycle_max = 360.0;
        }
        d.qc_exempt = true;
        c.vars.push_back(d);
    }
    for (int b = 0; b < n_band; ++b) {
        ecp::VarDesc d;
        d.code = "BAND" + std::to_string(b);
        d.kind = ecp::VarKind::SpectralBand;
        d.qc_exempt = true;
        c.vars.push_back(d);
    }
    return c;
}

// A random normalized window with independent missingness per token and per
// pixel. Masked cells carry zeros, like the production loader emits.
inline ecp::ObservationWindow random_window(ecp::Rng& rng, int64_t t_len,
                                            const ecp::VariableCatalog& catalog,
                                            double missing_rate = 0.2,
                                            double pixel_missing_rate = 0.1) {
    ecp::ObservationWindow w;
    w.t_len = t_len;
    w.v_tab = catalog.tabular_count();
    w.v_band = catalog.band_count();
    const int64_t v_total = w.v_tab + w.v_band;
    w.values.assign(static_cast<size_t>(t_len * w.v_tab), 0.0);
    w.value_present.assign(static_cast<size_t>(t_len * w.v_tab), 0);
    w.band_pixels.assign(static_cast<size_t>(t_len * w.v_band * ecp::kBandPixels), 0.0);
    w.pixel_present.assign(static_cast<size_t>(t_len * w.v_band * ecp::kBandPixels), 0);
    w.mask = ecp::BoolTensor(ecp::Shape{t_len, v_total}, 0);
    for (int64_t t = 0; t < t_len; ++t) {
        for (int64_t v = 0; v < w.v_tab; ++v) {
            if (rng.uniform01() < missing_rate) continue;
            const bool cyclic = catalog.at(v).kind == ecp::VarKind::Cyclic;
            w.values[static_cast<size_t>(t * w.v_tab + v)] =
                cyclic ? rng.uniform(-1.0, 1.0) : rng.uniform(-0.5, 0.5);
            w.value_present[static_cast<size_t>(t * w.v_tab + v)] = 1;
            w.mask.v[static_cast<size_t>(t * v_total + v)] = 1;
        }
        for (int64_t b = 0; b < w.v_band; ++b) {
            bool any = false;
            const bool band_missing = rng.uniform01() < missing_rate;
            for (int64_t p = 0; p < ecp::kBandPixels; ++p) {
                const int64_t off = (t * w.v_band + b) * ecp::kBandPixels + p;
                if (band_missing || rng.uniform01() < pixel_missing_rate) continue;
                w.band_pixels[static_cast<size_t>(off)] = rng.uniform(-0.5, 0.5);
                w.pixel_present[static_cast<size_t>(off)] = 1;
                any = true;
            }
            if (any) w.mask.v[static_cast<size_t>(t * v_total + w.v_tab + b)] = 1;
        }
    }
    w.target = rng.uniform(-10.0, 10.0);
    return w;
}

inline ecp::WindowBatch random_batch(ecp::Rng& rng, int64_t batch, int64_t t_len,
                                     const ecp::VariableCatalog& catalog, double missing_rate = 0.2,
                                     double pixel_missing_rate = 0.1) {
    std::vector<ecp::ObservationWindow> ws;
    for (int64_t i = 0; i < batch; ++i)
        ws.push_back(random_window(rng, t_len, catalog, missing_rate, pixel_missing_rate));
    return ecp::pack_windows(ws);
}

}  // namespace testsupport
