#include "ecoperceiver/model.hpp"

namespace ecp {

namespace {

void attention_params(std::vector<ParamSpec>& out, const std::string& prefix, int64_t q_width,
                      int64_t kv_width, int64_t attn_width, int64_t out_width) {
    out.push_back({prefix + "ln.gamma", {q_width}, InitKind::Ones});
    out.push_back({prefix + "ln.beta", {q_width}, InitKind::Zeros});
    out.push_back({prefix + "wq", {q_width, attn_width}, InitKind::FanInUniform});
    out.push_back({prefix + "bq", {attn_width}, InitKind::Zeros});
    out.push_back({prefix + "wk", {kv_width, attn_width}, InitKind::FanInUniform});
    out.push_back({prefix + "bk", {attn_width}, InitKind::Zeros});
    out.push_back({prefix + "wv", {kv_width, attn_width}, InitKind::FanInUniform});
    out.push_back({prefix + "bv", {attn_width}, InitKind::Zeros});
    out.push_back({prefix + "wo", {attn_width, out_width}, InitKind::FanInUniform});
    out.push_back({prefix + "bo", {out_width}, InitKind::Zeros});
}

void ffn_params(std::vector<ParamSpec>& out, const std::string& prefix, int64_t width, int64_t expansion) {
    const int64_t hidden = width * expansion;
    out.push_back({prefix + "ln.gamma", {width}, InitKind::Ones});
    out.push_back({prefix + "ln.beta", {width}, InitKind::Zeros});
    out.push_back({prefix + "w1", {width, hidden}, InitKind::FanInUniform});
    out.push_back({prefix + "b1", {hidden}, InitKind::Zeros});
    out.push_back({prefix + "w2", {hidden, width}, InitKind::FanInUniform});
    out.push_back({prefix + "b2", {width}, InitKind::Zeros});
}

}  // namespace

std::vector<ParamSpec> param_specs(const ModelConfig& cfg, const VariableCatalog& active_catalog) {
    cfg.validate();
    const int64_t v_total = active_catalog.total_count();
    const int64_t hi = cfg.input_width();
    const int64_t hl = cfg.latent_width;
    const int64_t ha = cfg.attn_width;
    const int64_t vw = cfg.use_fourier ? 2 * cfg.fourier_k : 1;

    std::vector<ParamSpec> out;
    out.push_back({"embed.table", {v_total, cfg.embed_width}, InitKind::TruncNormal});
    if (active_catalog.band_count() > 0)
        out.push_back({"embed.band_proj", {kBandPixels, vw}, InitKind::FanInUniform});
    out.push_back({"latent.seed", {hl}, InitKind::TruncNormal});

    // One shared WCA block: cross attention onto the latent, feed-forward,
    // latent self-attention, feed-forward.
    out.push_back({"wca.cross.ln_q.gamma", {hl}, InitKind::Ones});
    out.push_back({"wca.cross.ln_q.beta", {hl}, InitKind::Zeros});
    out.push_back({"wca.cross.ln_kv.gamma", {hi}, InitKind::Ones});
    out.push_back({"wca.cross.ln_kv.beta", {hi}, InitKind::Zeros});
    out.push_back({"wca.cross.wq", {hl, ha}, InitKind::FanInUniform});
    out.push_back({"wca.cross.bq", {ha}, InitKind::Zeros});
    out.push_back({"wca.cross.wk", {hi, ha}, InitKind::FanInUniform});
    out.push_back({"wca.cross.bk", {ha}, InitKind::Zeros});
    out.push_back({"wca.cross.wv", {hi, ha}, InitKind::FanInUniform});
    out.push_back({"wca.cross.bv", {ha}, InitKind::Zeros});
    out.push_back({"wca.cross.wo", {ha, hl}, InitKind::FanInUniform});
    out.push_back({"wca.cross.bo", {hl}, InitKind::Zeros});
    ffn_params(out, "wca.cross_ffn.", hl, cfg.mlp_expansion);
    attention_params(out, "wca.csa.", hl, hl, ha, hl);
    ffn_params(out, "wca.csa_ffn.", hl, cfg.mlp_expansion);

    for (int m = 0; m < cfg.csa_blocks; ++m) {
        const std::string p = "csa" + std::to_string(m) + ".";
        attention_params(out, p + "attn.", hl, hl, ha, hl);
        ffn_params(out, p + "ffn.", hl, cfg.mlp_expansion);
    }

    out.push_back({"head.w", {hl, 1}, InitKind::FanInUniform});
    out.push_back({"head.b", {1}, InitKind::Zeros});
    return out;
}

}  // namespace ecp
