#include "ecoperceiver/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace ecp {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError(path + ": truncated checkpoint");
    return v;
}

void put_string(std::ofstream& out, const std::string& s) {
    put<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in, const std::string& path) {
    const auto len = get<uint32_t>(in, path);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw FormatError(path + ": truncated checkpoint");
    return s;
}

std::string cfg_to_text(const ModelConfig& c) {
    std::ostringstream os;
    os << "latent_width=" << c.latent_width << "\n";
    os << "attn_width=" << c.attn_width << "\n";
    os << "n_heads=" << c.n_heads << "\n";
    os << "wca_blocks=" << c.wca_blocks << "\n";
    os << "csa_blocks=" << c.csa_blocks << "\n";
    os << "context_window=" << c.context_window << "\n";
    os << "fourier_k=" << c.fourier_k << "\n";
    os << "embed_width=" << c.embed_width << "\n";
    os << "mlp_expansion=" << c.mlp_expansion << "\n";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", c.dropout_p);
    os << "dropout_p=" << buf << "\n";
    os << "use_causal_mask=" << (c.use_causal_mask ? 1 : 0) << "\n";
    os << "use_fourier=" << (c.use_fourier ? 1 : 0) << "\n";
    os << "use_images=" << (c.use_images ? 1 : 0) << "\n";
    os << "use_obs_dropout=" << (c.use_obs_dropout ? 1 : 0) << "\n";
    return os.str();
}

ModelConfig cfg_from_text(const std::string& text, const std::string& path) {
    ModelConfig c;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(path + ": malformed config line " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "latent_width") c.latent_width = std::stoi(val);
        else if (key == "attn_width") c.attn_width = std::stoi(val);
        else if (key == "n_heads") c.n_heads = std::stoi(val);
        else if (key == "wca_blocks") c.wca_blocks = std::stoi(val);
        else if (key == "csa_blocks") c.csa_blocks = std::stoi(val);
        else if (key == "context_window") c.context_window = std::stoi(val);
        else if (key == "fourier_k") c.fourier_k = std::stoi(val);
        else if (key == "embed_width") c.embed_width = std::stoi(val);
        else if (key == "mlp_expansion") c.mlp_expansion = std::stoi(val);
        else if (key == "dropout_p") c.dropout_p = std::stod(val);
        else if (key == "use_causal_mask") c.use_causal_mask = val == "1";
        else if (key == "use_fourier") c.use_fourier = val == "1";
        else if (key == "use_images") c.use_images = val == "1";
        else if (key == "use_obs_dropout") c.use_obs_dropout = val == "1";
        else throw FormatError(path + ": unknown config key " + key);
    }
    return c;
}

std::string catalog_to_text(const VariableCatalog& cat) {
    std::ostringstream os;
    for (const auto& v : cat.vars) {
        const char* kind = v.kind == VarKind::Cyclic       ? "cyclic"
                           : v.kind == VarKind::SpectralBand ? "band"
                                                             : "acyclic";
        const char* agg = v.agg == AggKind::Sum            ? "sum"
                          : v.agg == AggKind::CircularMean ? "circular"
                                                           : "mean";
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", v.cycle_min, v.cycle_max);
        os << v.code << "," << kind << "," << agg << "," << (v.qc_exempt ? 1 : 0) << "," << buf << ","
           << v.unit << "\n";
    }
    return os.str();
}

VariableCatalog catalog_from_text(const std::string& text, const std::string& path) {
    VariableCatalog cat;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        for (char c : line) {
            if (c == ',' && f.size() < 6) {
                f.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        f.push_back(cur);
        if (f.size() != 7) throw FormatError(path + ": malformed catalog line " + line);
        VarDesc d;
        d.code = f[0];
        d.kind = f[1] == "cyclic" ? VarKind::Cyclic
                 : f[1] == "band" ? VarKind::SpectralBand
                                  : VarKind::Acyclic;
        d.agg = f[2] == "sum" ? AggKind::Sum : f[2] == "circular" ? AggKind::CircularMean : AggKind::Mean;
        d.qc_exempt = f[3] == "1";
        d.cycle_min = std::stod(f[4]);
        d.cycle_max = std::stod(f[5]);
        d.unit = f[6];
        cat.vars.push_back(std::move(d));
    }
    return cat;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model<float>& model, const CheckpointInfo& info) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 4);
    put<uint32_t>(out, kVersion);
    put_string(out, cfg_to_text(model.config()));
    put_string(out, catalog_to_text(model.catalog()));
    put<uint64_t>(out, info.seed);
    for (uint64_t w : info.rng_state) put<uint64_t>(out, w);
    put<uint32_t>(out, info.epoch);
    put<uint32_t>(out, static_cast<uint32_t>(model.params().size()));
    for (const auto& [name, t] : model.params()) {
        if (name.size() > 0xffff) throw ContractError("checkpoint: parameter name too long");
        put<uint16_t>(out, static_cast<uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<uint8_t>(out, static_cast<uint8_t>(t.ndim()));
        for (int64_t d : t.shape()) put<uint32_t>(out, static_cast<uint32_t>(d));
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(t.numel())));
    }
    if (!out) throw IoError("short write to " + path);
}

Model<float> load_checkpoint(const std::string& path, CheckpointInfo* info) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + ": bad magic, not a checkpoint");
    const auto version = get<uint32_t>(in, path);
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    const ModelConfig cfg = cfg_from_text(get_string(in, path), path);
    const VariableCatalog catalog = catalog_from_text(get_string(in, path), path);
    CheckpointInfo local;
    local.seed = get<uint64_t>(in, path);
    for (auto& w : local.rng_state) w = get<uint64_t>(in, path);
    local.epoch = get<uint32_t>(in, path);
    if (info) *info = local;

    const auto n_params = get<uint32_t>(in, path);
    Model<float>::Params params;
    for (uint32_t i = 0; i < n_params; ++i) {
        const auto name_len = get<uint16_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto ndim = get<uint8_t>(in, path);
        Shape shape;
        for (uint8_t d = 0; d < ndim; ++d) shape.push_back(get<uint32_t>(in, path));
        auto t = Tensor<float>::zeros(shape, true);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(t.numel())));
        if (!in) throw FormatError(path + ": truncated parameter payload at " + name);
        params.emplace(std::move(name), std::move(t));
    }
    // the stored catalog is already the active one (bands dropped when
    // use_images was off), so build against the full interface directly
    return Model<float>(cfg, catalog, std::move(params));
}

}  // namespace ecp
