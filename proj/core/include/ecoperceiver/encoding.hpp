#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ecoperceiver/catalog.hpp"
#include "ecoperceiver/errors.hpp"
#include "ecoperceiver/rng.hpp"
#include "ecoperceiver/tensor.hpp"

namespace ecp {

// Sizes that turn raw observations into the stacked (T, V_t, H_i) input.
struct EncodingConfig {
    int fourier_k = 12;      // K
    int embed_width = 16;    // l_emb
    int context_window = 32; // T
    bool use_fourier = true;
    VariableCatalog catalog;

    // Width of the non-embedding part of an input vector: the Fourier pair
    // stack, or a single raw channel when Fourier encoding is ablated.
    int value_width() const { return use_fourier ? 2 * fourier_k : 1; }
    int input_width() const { return embed_width + value_width(); }  // H_i

    void validate() const {
        if (fourier_k < 1) throw ConfigError("encoding: fourier_k must be >= 1");
        if (embed_width < 1) throw ConfigError("encoding: embed_width must be >= 1");
        if (context_window < 1) throw ConfigError("encoding: context_window must be >= 1");
        if (catalog.vars.empty()) throw ConfigError("encoding: empty variable catalog");
    }
};

// One training sample: a (T, V_t) block of encoded observations plus its
// modality mask and the flux target at the final timestep (physical units;
// targets are never normalized).
struct ObservationWindow {
    int64_t t_len = 0;
    int64_t v_tab = 0;
    int64_t v_band = 0;
    std::vector<double> values;          // (T, V_tab), 0 where absent
    std::vector<uint8_t> value_present;  // (T, V_tab)
    std::vector<double> band_pixels;     // (T, V_band, 64), 0 where absent
    std::vector<uint8_t> pixel_present;  // (T, V_band, 64)
    BoolTensor mask;                     // (T, V_t) token-level presence
    double target = 0.0;
};

// A batch of windows flattened for the model. Layouts mirror
// ObservationWindow with a leading batch axis.
struct WindowBatch {
    int64_t batch = 0;
    int64_t t_len = 0;
    int64_t v_tab = 0;
    int64_t v_band = 0;
    std::vector<double> values;
    std::vector<uint8_t> value_present;
    std::vector<double> band_pixels;
    std::vector<uint8_t> pixel_present;
    BoolTensor mask;  // (B, T, V_t)
    std::vector<double> targets;

    int64_t v_total() const { return v_tab + v_band; }
};

WindowBatch pack_windows(const std::vector<ObservationWindow>& windows);

// [sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{K-1} pi x), cos(2^{K-1} pi x)].
// x is reduced modulo the period 2 before any trigonometry, so f(x) and
// f(x+2) agree to the last bit of the double evaluation; cyclic endpoints -1
// and 1 therefore encode identically.
inline void fourier_encode(double x, int k_freqs, double* out) {
    if (k_freqs < 1) throw ContractError("fourier_encode: K must be >= 1");
    if (!std::isfinite(x)) throw ContractError("fourier_encode: non-finite input");
    const double r = x - 2.0 * std::floor((x + 1.0) * 0.5);  // into [-1, 1)
    double freq = M_PI;
    for (int k = 0; k < k_freqs; ++k) {
        out[2 * k] = std::sin(freq * r);
        out[2 * k + 1] = std::cos(freq * r);
        freq *= 2.0;
    }
}

inline std::vector<double> fourier_encode(double x, int k_freqs) {
    std::vector<double> out(static_cast<size_t>(2 * k_freqs));
    fourier_encode(x, k_freqs, out.data());
    return out;
}

// Reference (single-value) encoders. The batched model path must agree with
// these; a property test holds the two together.

// [embedding(variable_index) || fourier(value)]. Missing values produce an
// all-zero vector and present=false; the mask, not the placeholder, carries
// the information.
template <class S>
std::vector<S> encode_tabular(std::optional<double> value, int64_t variable_index,
                              const Tensor<S>& embeddings, const EncodingConfig& cfg,
                              bool* present = nullptr) {
    if (variable_index < 0 || variable_index >= embeddings.shape()[0])
        throw ContractError("encode_tabular: variable index " + std::to_string(variable_index) +
                            " outside catalog of size " + std::to_string(embeddings.shape()[0]));
    std::vector<S> out(static_cast<size_t>(cfg.input_width()), S(0));
    if (present) *present = value.has_value();
    if (!value.has_value()) return out;
    const S* emb = embeddings.data() + variable_index * cfg.embed_width;
    for (int j = 0; j < cfg.embed_width; ++j) out[static_cast<size_t>(j)] = emb[j];
    if (cfg.use_fourier) {
        std::vector<double> f = fourier_encode(*value, cfg.fourier_k);
        for (int j = 0; j < 2 * cfg.fourier_k; ++j)
            out[static_cast<size_t>(cfg.embed_width + j)] = static_cast<S>(f[static_cast<size_t>(j)]);
    } else {
        out[static_cast<size_t>(cfg.embed_width)] = static_cast<S>(*value);
    }
    return out;
}

// [embedding(band_index) || pixels . projection]. Missing pixels are imputed
// to zero before the projection; only an entirely missing band masks the
// token (present=false, zero vector).
template <class S>
std::vector<S> encode_band(const double* pixels, const uint8_t* pixel_present, int64_t band_index,
                           const Tensor<S>& projection, const Tensor<S>& embeddings,
                           const EncodingConfig& cfg, bool* present = nullptr) {
    if (band_index < 0 || band_index >= embeddings.shape()[0])
        throw ContractError("encode_band: band index out of range");
    const int vw = cfg.value_width();
    if (projection.shape() != Shape{kBandPixels, vw})
        throw ShapeError("encode_band: projection " + shape_str(projection.shape()) + " expected " +
                         shape_str({kBandPixels, vw}));
    std::vector<S> out(static_cast<size_t>(cfg.input_width()), S(0));
    bool any = false;
    for (int64_t p = 0; p < kBandPixels; ++p) any = any || pixel_present[p];
    if (present) *present = any;
    if (!any) return out;
    const S* emb = embeddings.data() + band_index * cfg.embed_width;
    for (int j = 0; j < cfg.embed_width; ++j) out[static_cast<size_t>(j)] = emb[j];
    const S* proj = projection.data();
    for (int64_t p = 0; p < kBandPixels; ++p) {
        if (!pixel_present[p]) continue;  // zero-imputed
        const S px = static_cast<S>(pixels[p]);
        for (int j = 0; j < vw; ++j)
            out[static_cast<size_t>(cfg.embed_width + j)] += px * proj[p * vw + j];
    }
    return out;
}

// Reference whole-window assembly: rows follow the catalog order (tabular
// variables, then bands); masked rows are zero vectors. Deterministic.
template <class S>
std::pair<Tensor<S>, BoolTensor> build_input(const ObservationWindow& w, const Tensor<S>& embeddings,
                                             const Tensor<S>& band_projection, const EncodingConfig& cfg) {
    const int64_t t_len = w.t_len;
    const int64_t v_tab = w.v_tab;
    const int64_t v_band = w.v_band;
    const int64_t v_total = v_tab + v_band;
    if (v_total != cfg.catalog.total_count() || v_tab != cfg.catalog.tabular_count())
        throw ContractError("build_input: window variables " + std::to_string(v_tab) + "+" +
                            std::to_string(v_band) + " do not match catalog " +
                            std::to_string(cfg.catalog.tabular_count()) + "+" +
                            std::to_string(cfg.catalog.band_count()));
    if (w.mask.shape != Shape{t_len, v_total})
        throw ContractError("build_input: mask shape " + shape_str(w.mask.shape) + " expected " +
                            shape_str({t_len, v_total}));
    const int hi = cfg.input_width();
    auto out = Tensor<S>::zeros({t_len, v_total, hi});
    BoolTensor mask = w.mask;
    for (int64_t t = 0; t < t_len; ++t) {
        for (int64_t v = 0; v < v_tab; ++v) {
            const int64_t cell = t * v_tab + v;
            std::optional<double> val;
            if (w.value_present[static_cast<size_t>(cell)] && w.mask[t * v_total + v])
                val = w.values[static_cast<size_t>(cell)];
            bool present = false;
            auto enc = encode_tabular(val, v, embeddings, cfg, &present);
            if (present)
                std::copy(enc.begin(), enc.end(), out.data() + (t * v_total + v) * hi);
        }
        for (int64_t b = 0; b < v_band; ++b) {
            const int64_t tok = v_tab + b;
            if (!w.mask[t * v_total + tok]) continue;
            const int64_t off = (t * v_band + b) * kBandPixels;
            bool present = false;
            auto enc = encode_band(w.band_pixels.data() + off, w.pixel_present.data() + off, tok,
                                   band_projection, embeddings, cfg, &present);
            if (present)
                std::copy(enc.begin(), enc.end(), out.data() + (t * v_total + tok) * hi);
            else
                mask.v[static_cast<size_t>(t * v_total + tok)] = 0;
        }
    }
    return {out, mask};
}

// Batched, differentiable input assembly for the model:
//   [ tiled embeddings || fourier(values) (+) pixels . projection ]
// Content at masked positions is unspecified here; the model zeroes it with
// mask_mul before attention, and attention additionally excludes masked
// lanes, so outputs never depend on it.
template <class S>
Tensor<S> build_input_batch(Tape<S>& tape, const WindowBatch& batch, const Tensor<S>& embeddings,
                            const Tensor<S>& band_projection, const EncodingConfig& cfg) {
    const int64_t b_n = batch.batch, t_len = batch.t_len;
    const int64_t v_tab = batch.v_tab, v_band = batch.v_band, v_total = batch.v_total();
    if (embeddings.shape() != Shape{v_total, cfg.embed_width})
        throw ShapeError("build_input_batch: embeddings " + shape_str(embeddings.shape()) +
                         " expected " + shape_str({v_total, cfg.embed_width}));
    const int vw = cfg.value_width();

    // Constant fourier/raw channel for tabular tokens.
    auto tab_part = Tensor<S>::zeros({b_n, t_len, v_tab, vw});
    {
        std::vector<double> scratch(static_cast<size_t>(vw));
        const int64_t cells = b_n * t_len * v_tab;
        for (int64_t c = 0; c < cells; ++c) {
            if (!batch.value_present[static_cast<size_t>(c)]) continue;
            if (cfg.use_fourier) {
                fourier_encode(batch.values[static_cast<size_t>(c)], cfg.fourier_k, scratch.data());
                S* dst = tab_part.data() + c * vw;
                for (int j = 0; j < vw; ++j) dst[j] = static_cast<S>(scratch[static_cast<size_t>(j)]);
            } else {
                tab_part.data()[c * vw] = static_cast<S>(batch.values[static_cast<size_t>(c)]);
            }
        }
    }

    Tensor<S> value_part;
    if (v_band > 0) {
        auto pixels = Tensor<S>::zeros({b_n * t_len * v_band, kBandPixels});
        const int64_t n_px = pixels.numel();
        for (int64_t i = 0; i < n_px; ++i)
            if (batch.pixel_present[static_cast<size_t>(i)])
                pixels.data()[i] = static_cast<S>(batch.band_pixels[static_cast<size_t>(i)]);
        auto band_part = matmul(tape, pixels, band_projection)
                             .reshaped({b_n, t_len, v_band, vw});
        value_part = concat(tape, {tab_part, band_part}, 2);
    } else {
        value_part = tab_part;
    }

    auto emb_part = broadcast0(tape, embeddings, b_n * t_len)
                        .reshaped({b_n, t_len, v_total, cfg.embed_width});
    return concat(tape, {emb_part, value_part}, 3);
}

// Training-time observational dropout on the modality mask: each present
// entry is independently dropped with probability p; absent entries stay
// absent. Eval mode is the identity.
inline BoolTensor observational_dropout(const BoolTensor& mask, double p, Rng& rng, bool training) {
    if (p < 0.0 || p >= 1.0)
        throw ConfigError("observational_dropout: p must lie in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return mask;
    BoolTensor out = mask;
    for (auto& bit : out.v)
        if (bit && rng.uniform01() < p) bit = 0;
    return out;
}

}  // namespace ecp
