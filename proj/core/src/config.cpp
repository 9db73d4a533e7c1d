#include "ecoperceiver/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ecp {

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"model.latent_width", "128", "latent token width H_l"},
        {"model.attn_width", "128", "attention projection width H_a"},
        {"model.heads", "4", "attention heads (must divide attn_width)"},
        {"model.wca_blocks", "8", "weight-shared windowed-cross-attention blocks N"},
        {"model.csa_blocks", "4", "trailing causal self-attention blocks M"},
        {"model.context_window", "32", "hours of context T per prediction"},
        {"model.fourier_k", "12", "Fourier frequency count K"},
        {"model.embed_width", "16", "learned variable embedding width l_emb"},
        {"model.mlp_expansion", "2", "feed-forward hidden expansion factor"},
        {"model.dropout", "0.3", "observational dropout probability"},
        {"model.use_causal_mask", "true", "causal masking in self attention"},
        {"model.use_fourier", "true", "Fourier value encoding (off: one raw channel)"},
        {"model.use_images", "true", "ingest spectral band tokens"},
        {"model.use_obs_dropout", "true", "observational dropout during training"},
        {"train.lr", "8e-5", "peak learning rate"},
        {"train.batch_size", "256", "windows per optimizer step"},
        {"train.warmup_epochs", "1", "linear warm-up epochs"},
        {"train.total_epochs", "20", "cosine-annealed total epochs"},
        {"train.weight_decay", "0.01", "decoupled weight decay"},
        {"train.beta1", "0.9", "first-moment decay"},
        {"train.beta2", "0.999", "second-moment decay"},
        {"train.eps", "1e-8", "optimizer epsilon"},
        {"train.patience", "5", "early-stop patience on validation loss"},
        {"train.val_fraction", "0.2", "site fraction held out for validation"},
        {"train.workers", "1", "batch assembly workers"},
        {"train.threads", "1", "tensor kernel threads"},
        {"data.target", "NEE_VUT_REF", "target flux column"},
        {"data.max_qc", "1", "QC leniency threshold (0..3)"},
        {"data.seeds", "0,10,20,30,40,50,60,70,80,90", "training seed list"},
        {"data.split_seed", "0", "site split seed"},
        {"baseline.lambda", "1e-6", "ridge damping for the linear baseline"},
        {"synth.seed", "0", "synthetic corpus seed"},
        {"synth.igbps", "ENF,GRA", "IGBP classes to generate"},
        {"synth.sites_per_igbp", "3", "sites per IGBP class"},
        {"synth.n_days", "365", "days per site"},
        {"synth.noise", "0.6", "flux/meteorology noise scale"},
        {"synth.missing_rate", "0.05", "per-cell missingness"},
        {"synth.pixel_missing_rate", "0.05", "per-pixel missingness"},
        {"synth.image_missing_rate", "0.05", "per-day imagery missingness"},
        {"synth.seasonality_base", "0.35", "seasonal amplitude of the first site"},
        {"synth.seasonality_step", "0.03", "per-site seasonal amplitude increment"},
        {"synth.releases", "2", "releases per site (overlap exercises fusion)"},
    };
    return schema;
}

RunConfig RunConfig::defaults() {
    RunConfig c;
    for (const auto& k : config_schema()) c.values_[k.name] = k.default_value;
    return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second = value;
}

void RunConfig::set_kv(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("expected key=value, got '" + assignment + "'");
    set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t");
        line = line.substr(b, e - b + 1);
        try {
            set_kv(line);
        } catch (const ConfigError& err) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + err.what());
        }
    }
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    return it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
    try {
        return std::stoll(get(key));
    } catch (const std::exception&) {
        throw ConfigError("key " + key + ": '" + get(key) + "' is not an integer");
    }
}

double RunConfig::get_double(const std::string& key) const {
    try {
        return std::stod(get(key));
    } catch (const std::exception&) {
        throw ConfigError("key " + key + ": '" + get(key) + "' is not a number");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("key " + key + ": '" + v + "' is not a boolean (true/false)");
}

std::vector<uint64_t> RunConfig::get_seed_list(const std::string& key) const {
    std::vector<uint64_t> out;
    for (const auto& item : get_string_list(key)) {
        try {
            out.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw ConfigError("key " + key + ": '" + item + "' is not a seed");
        }
    }
    if (out.empty()) throw ConfigError("key " + key + ": empty seed list");
    return out;
}

std::vector<std::string> RunConfig::get_string_list(const std::string& key) const {
    std::vector<std::string> out;
    std::string cur;
    for (char c : get(key)) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.latent_width = static_cast<int>(get_int("model.latent_width"));
    m.attn_width = static_cast<int>(get_int("model.attn_width"));
    m.n_heads = static_cast<int>(get_int("model.heads"));
    m.wca_blocks = static_cast<int>(get_int("model.wca_blocks"));
    m.csa_blocks = static_cast<int>(get_int("model.csa_blocks"));
    m.context_window = static_cast<int>(get_int("model.context_window"));
    m.fourier_k = static_cast<int>(get_int("model.fourier_k"));
    m.embed_width = static_cast<int>(get_int("model.embed_width"));
    m.mlp_expansion = static_cast<int>(get_int("model.mlp_expansion"));
    m.dropout_p = get_double("model.dropout");
    m.use_causal_mask = get_bool("model.use_causal_mask");
    m.use_fourier = get_bool("model.use_fourier");
    m.use_images = get_bool("model.use_images");
    m.use_obs_dropout = get_bool("model.use_obs_dropout");
    m.validate();
    return m;
}

TrainConfig RunConfig::train_config(uint64_t seed) const {
    TrainConfig t;
    t.lr = get_double("train.lr");
    t.batch_size = get_int("train.batch_size");
    t.warmup_epochs = static_cast<int>(get_int("train.warmup_epochs"));
    t.total_epochs = static_cast<int>(get_int("train.total_epochs"));
    t.weight_decay = get_double("train.weight_decay");
    t.beta1 = get_double("train.beta1");
    t.beta2 = get_double("train.beta2");
    t.eps = get_double("train.eps");
    t.patience = static_cast<int>(get_int("train.patience"));
    t.workers = static_cast<int>(get_int("train.workers"));
    t.seed = seed;
    t.validate();
    return t;
}

SyntheticSiteSpec RunConfig::synth_spec() const {
    SyntheticSiteSpec s;
    s.seed = static_cast<uint64_t>(get_int("synth.seed"));
    s.n_days = static_cast<int>(get_int("synth.n_days"));
    s.noise = get_double("synth.noise");
    s.missing_rate = get_double("synth.missing_rate");
    s.pixel_missing_rate = get_double("synth.pixel_missing_rate");
    s.image_missing_rate = get_double("synth.image_missing_rate");
    return s;
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << "=" << v << "\n";
    return os.str();
}

std::string RunConfig::help_text() {
    std::ostringstream os;
    size_t width = 0;
    for (const auto& k : config_schema()) width = std::max(width, k.name.size());
    for (const auto& k : config_schema()) {
        os << "  " << k.name << std::string(width - k.name.size() + 2, ' ') << k.help
           << " (default: " << k.default_value << ")\n";
    }
    return os.str();
}

}  // namespace ecp
