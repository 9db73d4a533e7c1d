#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecoperceiver/encoding.hpp"
#include "ecoperceiver/tensor.hpp"

namespace ecp {

// All hyperparameters and ablation switches of the network. Defaults are the
// full-scale configuration; desk-scale experiments shrink them via config.
struct ModelConfig {
    int latent_width = 128;     // H_l
    int attn_width = 128;       // H_a (defaults to H_l)
    int n_heads = 4;
    int wca_blocks = 8;         // N, weight-shared
    int csa_blocks = 4;         // M, unshared
    int context_window = 32;    // T
    int fourier_k = 12;         // K
    int embed_width = 16;       // l_emb
    int mlp_expansion = 2;
    double dropout_p = 0.3;     // observational dropout
    bool use_causal_mask = true;
    bool use_fourier = true;
    bool use_images = true;
    bool use_obs_dropout = true;

    void validate() const {
        if (latent_width < 1 || attn_width < 1) throw ConfigError("model: widths must be positive");
        if (n_heads < 1 || attn_width % n_heads != 0)
            throw ConfigError("model: attn_width (" + std::to_string(attn_width) +
                              ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
        if (wca_blocks < 1) throw ConfigError("model: need at least one WCA block");
        if (csa_blocks < 0) throw ConfigError("model: csa_blocks must be >= 0");
        if (context_window < 1) throw ConfigError("model: context_window must be >= 1");
        if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("model: dropout_p must lie in [0,1)");
        if (mlp_expansion < 1) throw ConfigError("model: mlp_expansion must be >= 1");
    }

    int input_width() const { return embed_width + (use_fourier ? 2 * fourier_k : 1); }

    EncodingConfig encoding_config(const VariableCatalog& full_catalog) const {
        EncodingConfig e;
        e.fourier_k = fourier_k;
        e.embed_width = embed_width;
        e.context_window = context_window;
        e.use_fourier = use_fourier;
        e.catalog = use_images ? full_catalog : full_catalog.tabular_only();
        return e;
    }
};

enum class Mode { Train, Eval };

enum class InitKind { TruncNormal, FanInUniform, Zeros, Ones };

struct ParamSpec {
    std::string name;
    Shape shape;
    InitKind init;
};

// Parameter inventory for a configuration. Only (catalog, widths, block
// counts) matter: the count is independent of the context window because the
// latent is one broadcast vector and positions are fixed sinusoids.
std::vector<ParamSpec> param_specs(const ModelConfig& cfg, const VariableCatalog& active_catalog);

inline int64_t parameter_count(const ModelConfig& cfg, const VariableCatalog& full_catalog) {
    int64_t n = 0;
    const VariableCatalog active = cfg.use_images ? full_catalog : full_catalog.tabular_only();
    for (const auto& p : param_specs(cfg, active)) n += shape_numel(p.shape);
    return n;
}

// Fixed sinusoidal position table (T, H): position t, channel 2i holds
// sin(t / 10000^(2i/H)), channel 2i+1 the matching cosine.
template <class S>
Tensor<S> sinusoidal_positions(int64_t t_len, int64_t width) {
    auto pos = Tensor<S>::zeros({t_len, width});
    for (int64_t t = 0; t < t_len; ++t)
        for (int64_t j = 0; j < width; ++j) {
            const double expo = static_cast<double>(2 * (j / 2)) / static_cast<double>(width);
            const double angle = static_cast<double>(t) / std::pow(10000.0, expo);
            pos.data()[t * width + j] = static_cast<S>((j % 2 == 0) ? std::sin(angle) : std::cos(angle));
        }
    return pos;
}

template <class S>
class Model {
public:
    using Params = std::map<std::string, Tensor<S>>;

    // Fresh model with seeded initialization. Each parameter's draws depend
    // only on (seed, parameter name).
    Model(ModelConfig cfg, VariableCatalog full_catalog, uint64_t seed)
        : cfg_(std::move(cfg)), catalog_(cfg_.use_images ? full_catalog : full_catalog.tabular_only()) {
        cfg_.validate();
        for (const auto& spec : param_specs(cfg_, catalog_)) {
            auto t = Tensor<S>::zeros(spec.shape, true);
            Rng rng = Rng::derive(seed, "init/" + spec.name);
            switch (spec.init) {
                case InitKind::TruncNormal:
                    for (int64_t i = 0; i < t.numel(); ++i)
                        t.data()[i] = static_cast<S>(rng.truncated_normal(0.02));
                    break;
                case InitKind::FanInUniform: {
                    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.shape[0]));
                    for (int64_t i = 0; i < t.numel(); ++i)
                        t.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
                    break;
                }
                case InitKind::Zeros:
                    break;
                case InitKind::Ones:
                    std::fill(t.values().begin(), t.values().end(), S(1));
                    break;
            }
            params_.emplace(spec.name, std::move(t));
        }
    }

    // Rebuilds a model around existing parameter tensors (checkpoint load).
    Model(ModelConfig cfg, VariableCatalog active_catalog, Params params)
        : cfg_(std::move(cfg)), catalog_(std::move(active_catalog)), params_(std::move(params)) {
        cfg_.validate();
        for (const auto& spec : param_specs(cfg_, catalog_)) {
            auto it = params_.find(spec.name);
            if (it == params_.end()) throw FormatError("model: missing parameter " + spec.name);
            if (it->second.shape() != spec.shape)
                throw FormatError("model: parameter " + spec.name + " has shape " +
                                  shape_str(it->second.shape()) + ", expected " + shape_str(spec.shape));
        }
    }

    const ModelConfig& config() const { return cfg_; }
    const VariableCatalog& catalog() const { return catalog_; }
    Params& params() { return params_; }
    const Params& params() const { return params_; }
    int64_t n_parameters() const {
        int64_t n = 0;
        for (const auto& [name, t] : params_) n += t.numel();
        return n;
    }

    const Tensor<S>& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("model: unknown parameter " + name);
        return it->second;
    }

    struct Forward {
        Tensor<S> predictions;  // (B)
        Tensor<S> latent;       // (B, T, H_l), pre-head
        BoolTensor effective_mask;
    };

    // encode -> (observational dropout in train mode) -> N shared WCA blocks
    // -> M CSA blocks -> final-timestep token -> affine head.
    Forward forward(Tape<S>& tape, const WindowBatch& batch, Mode mode, Rng* rng = nullptr) const {
        const int64_t b_n = batch.batch;
        const int64_t t_len = batch.t_len;
        if (t_len != cfg_.context_window)
            throw ContractError("forward: batch window length " + std::to_string(t_len) +
                                " != configured context window " + std::to_string(cfg_.context_window));
        if (batch.v_total() != catalog_.total_count())
            throw ContractError("forward: batch has " + std::to_string(batch.v_total()) +
                                " variables, catalog has " + std::to_string(catalog_.total_count()));
        const EncodingConfig enc = cfg_.encoding_config(catalog_);

        BoolTensor mask = batch.mask;
        if (mode == Mode::Train && cfg_.use_obs_dropout && cfg_.dropout_p > 0.0) {
            if (!rng) throw ContractError("forward: train mode with observational dropout needs an rng");
            mask = observational_dropout(mask, cfg_.dropout_p, *rng, true);
        }

        Tensor<S> band_proj;
        if (catalog_.band_count() > 0) band_proj = at("embed.band_proj");
        auto input = build_input_batch(tape, batch, at("embed.table"), band_proj, enc);
        input = mask_mul(tape, input, mask);  // masked tokens carry exact zeros

        // Keys/values are shared by all N WCA blocks (one parameter set, one
        // constant input), so project them once.
        const int64_t v_total = batch.v_total();
        auto kv = project_kv(tape, input.reshaped({b_n * t_len, v_total, enc.input_width()}));
        BoolTensor mask_flat;
        mask_flat.shape = Shape{b_n * t_len, v_total};
        mask_flat.v = mask.v;
        const BoolTensor score_mask =
            repeat_rows(mask_flat, cfg_.n_heads, Shape{b_n * t_len * cfg_.n_heads, 1, v_total});
        const BoolTensor has_any = any_lastdim(mask);  // (B, T)

        auto latent = broadcast0(tape, at("latent.seed"), b_n * t_len).reshaped({b_n, t_len, cfg_.latent_width});
        latent = add_suffix(tape, latent, positions());

        for (int n = 0; n < cfg_.wca_blocks; ++n) {
            latent = cross_attention_sublayer(tape, latent, kv.k_heads, kv.v_heads, score_mask, has_any);
            latent = ffn_sublayer(tape, latent, "wca.cross_ffn.");
            latent = self_attention_sublayer(tape, latent, "wca.csa.", cfg_.use_causal_mask);
            latent = ffn_sublayer(tape, latent, "wca.csa_ffn.");
        }
        for (int m = 0; m < cfg_.csa_blocks; ++m) {
            const std::string p = "csa" + std::to_string(m) + ".";
            latent = self_attention_sublayer(tape, latent, p + "attn.", cfg_.use_causal_mask);
            latent = ffn_sublayer(tape, latent, p + "ffn.");
        }

        auto last = slice(tape, latent, 1, t_len - 1, 1).reshaped({b_n, cfg_.latent_width});
        auto pred = add_suffix(tape, matmul(tape, last, at("head.w")), at("head.b")).reshaped({b_n});
        return Forward{pred, latent, std::move(mask)};
    }

    // The windowed-cross-attention operation in isolation: T folded into the
    // batch axis, each latent token attending over its own timestep's
    // observations, with residual + pre-LN + feed-forward.
    Tensor<S> windowed_cross_attention(Tape<S>& tape, const Tensor<S>& latent, const Tensor<S>& input,
                                       const BoolTensor& mask) const {
        const int64_t b_n = latent.shape()[0];
        const int64_t t_len = latent.shape()[1];
        const int64_t v_total = input.shape()[2];
        if (input.shape()[0] != b_n || input.shape()[1] != t_len)
            throw ContractError("windowed_cross_attention: latent " + shape_str(latent.shape()) +
                                " vs inputs " + shape_str(input.shape()));
        if (mask.shape != Shape{b_n, t_len, v_total})
            throw ContractError("windowed_cross_attention: mask shape " + shape_str(mask.shape));
        auto kv = project_kv(tape, input.reshaped({b_n * t_len, v_total, input.shape()[3]}));
        BoolTensor mask_flat;
        mask_flat.shape = Shape{b_n * t_len, v_total};
        mask_flat.v = mask.v;
        const BoolTensor score_mask =
            repeat_rows(mask_flat, cfg_.n_heads, Shape{b_n * t_len * cfg_.n_heads, 1, v_total});
        auto out = cross_attention_sublayer(tape, latent, kv.k_heads, kv.v_heads, score_mask,
                                            any_lastdim(mask));
        return ffn_sublayer(tape, out, "wca.cross_ffn.");
    }

    // The causal-self-attention operation in isolation (shared WCA-internal
    // parameters): residual + pre-LN multi-head attention + feed-forward.
    Tensor<S> causal_self_attention(Tape<S>& tape, const Tensor<S>& latent, bool use_causal) const {
        auto out = self_attention_sublayer(tape, latent, "wca.csa.", use_causal);
        return ffn_sublayer(tape, out, "wca.csa_ffn.");
    }

    Tensor<S> positions() const { return sinusoidal_positions<S>(cfg_.context_window, cfg_.latent_width); }

private:
    struct ProjectedKV {
        Tensor<S> k_heads;  // (R*h, V, d)
        Tensor<S> v_heads;
    };

    ProjectedKV project_kv(Tape<S>& tape, const Tensor<S>& input_flat) const {
        const int64_t rows = input_flat.shape()[0];
        const int64_t v_total = input_flat.shape()[1];
        const int64_t d = cfg_.attn_width / cfg_.n_heads;
        auto normed = layer_norm(tape, input_flat, at("wca.cross.ln_kv.gamma"), at("wca.cross.ln_kv.beta"));
        auto split = [&](const Tensor<S>& proj) {
            return permute_0213(tape, proj.reshaped({rows, v_total, cfg_.n_heads, d}))
                .reshaped({rows * cfg_.n_heads, v_total, d});
        };
        auto k = add_suffix(tape, matmul(tape, normed, at("wca.cross.wk")), at("wca.cross.bk"));
        auto v = add_suffix(tape, matmul(tape, normed, at("wca.cross.wv")), at("wca.cross.bv"));
        return ProjectedKV{split(k), split(v)};
    }

    Tensor<S> cross_attention_sublayer(Tape<S>& tape, const Tensor<S>& latent, const Tensor<S>& k_heads,
                                       const Tensor<S>& v_heads, const BoolTensor& score_mask,
                                       const BoolTensor& has_any) const {
        const int64_t b_n = latent.shape()[0];
        const int64_t t_len = latent.shape()[1];
        const int64_t h = cfg_.n_heads;
        const int64_t d = cfg_.attn_width / h;
        const int64_t rows = b_n * t_len;

        auto q_in = layer_norm(tape, latent.reshaped({rows, cfg_.latent_width}),
                               at("wca.cross.ln_q.gamma"), at("wca.cross.ln_q.beta"));
        auto q = add_suffix(tape, matmul(tape, q_in, at("wca.cross.wq")), at("wca.cross.bq"))
                     .reshaped({rows * h, 1, d});
        auto scores = scale(tape, bmm_nt(tape, q, k_heads), 1.0 / std::sqrt(static_cast<double>(d)));
        auto weights = softmax_masked(tape, scores, &score_mask);
        auto ctx = bmm(tape, weights, v_heads);  // (rows*h, 1, d)
        auto merged = permute_0213(tape, ctx.reshaped({rows, h, 1, d})).reshaped({rows, h * d});
        auto proj = add_suffix(tape, matmul(tape, merged, at("wca.cross.wo")), at("wca.cross.bo"))
                        .reshaped({b_n, t_len, cfg_.latent_width});
        // Timesteps with no surviving observation contribute exactly nothing:
        // the residual carries the latent token through unchanged.
        proj = mask_mul(tape, proj, has_any);
        return add(tape, latent, proj);
    }

    Tensor<S> self_attention_sublayer(Tape<S>& tape, const Tensor<S>& x, const std::string& prefix,
                                      bool use_causal) const {
        const int64_t b_n = x.shape()[0];
        const int64_t t_len = x.shape()[1];
        const int64_t h = cfg_.n_heads;
        const int64_t d = cfg_.attn_width / h;
        auto normed = layer_norm(tape, x, at(prefix + "ln.gamma"), at(prefix + "ln.beta"));
        auto split = [&](const char* w, const char* b) {
            auto proj = add_suffix(tape, matmul(tape, normed, at(prefix + w)), at(prefix + b));
            return permute_0213(tape, proj.reshaped({b_n, t_len, h, d})).reshaped({b_n * h, t_len, d});
        };
        auto q = split("wq", "bq");
        auto k = split("wk", "bk");
        auto v = split("wv", "bv");
        auto scores = scale(tape, bmm_nt(tape, q, k), 1.0 / std::sqrt(static_cast<double>(d)));
        Tensor<S> weights;
        if (use_causal) {
            const BoolTensor cm = tile(causal_mask(t_len), b_n * h);
            weights = softmax_masked(tape, scores, &cm);
        } else {
            weights = softmax(tape, scores);
        }
        auto ctx = bmm(tape, weights, v).reshaped({b_n, h, t_len, d});
        auto merged = permute_0213(tape, ctx).reshaped({b_n, t_len, h * d});
        auto proj = add_suffix(tape, matmul(tape, merged, at(prefix + "wo")), at(prefix + "bo"));
        return add(tape, x, proj);
    }

    Tensor<S> ffn_sublayer(Tape<S>& tape, const Tensor<S>& x, const std::string& prefix) const {
        auto normed = layer_norm(tape, x, at(prefix + "ln.gamma"), at(prefix + "ln.beta"));
        auto hidden = gelu(tape, add_suffix(tape, matmul(tape, normed, at(prefix + "w1")), at(prefix + "b1")));
        auto out = add_suffix(tape, matmul(tape, hidden, at(prefix + "w2")), at(prefix + "b2"));
        return add(tape, x, out);
    }

    ModelConfig cfg_;
    VariableCatalog catalog_;
    Params params_;
};

}  // namespace ecp
