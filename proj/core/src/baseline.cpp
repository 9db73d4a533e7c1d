#include "ecoperceiver/baseline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace ecp {

namespace {

// Raw (un-imputed) features: value + presence per feature slot.
void raw_features(const ObservationWindow& w, std::vector<double>& vals, std::vector<uint8_t>& present) {
    const int64_t t = w.t_len - 1;  // final timestep
    const int64_t v_total = w.v_tab + w.v_band;
    vals.assign(static_cast<size_t>(v_total), 0.0);
    present.assign(static_cast<size_t>(v_total), 0);
    for (int64_t v = 0; v < w.v_tab; ++v) {
        if (!w.mask[t * v_total + v]) continue;
        vals[static_cast<size_t>(v)] = w.values[static_cast<size_t>(t * w.v_tab + v)];
        present[static_cast<size_t>(v)] = 1;
    }
    for (int64_t b = 0; b < w.v_band; ++b) {
        if (!w.mask[t * v_total + w.v_tab + b]) continue;
        double sum = 0.0;
        int64_t n = 0;
        for (int64_t p = 0; p < kBandPixels; ++p) {
            const size_t off = static_cast<size_t>((t * w.v_band + b) * kBandPixels + p);
            if (!w.pixel_present[off]) continue;
            sum += w.band_pixels[off];
            ++n;
        }
        if (n > 0) {
            vals[static_cast<size_t>(w.v_tab + b)] = sum / static_cast<double>(n);
            present[static_cast<size_t>(w.v_tab + b)] = 1;
        }
    }
}

// Cholesky solve of the SPD system g w = rhs; returns false on a
// non-positive pivot (rank deficiency).
bool cholesky_solve(std::vector<double>& g, std::vector<double>& rhs, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j <= i; ++j) {
            double sum = g[static_cast<size_t>(i * n + j)];
            for (int64_t k = 0; k < j; ++k)
                sum -= g[static_cast<size_t>(i * n + k)] * g[static_cast<size_t>(j * n + k)];
            if (i == j) {
                if (sum <= 1e-12) return false;
                g[static_cast<size_t>(i * n + i)] = std::sqrt(sum);
            } else {
                g[static_cast<size_t>(i * n + j)] = sum / g[static_cast<size_t>(j * n + j)];
            }
        }
    }
    for (int64_t i = 0; i < n; ++i) {
        double sum = rhs[static_cast<size_t>(i)];
        for (int64_t k = 0; k < i; ++k) sum -= g[static_cast<size_t>(i * n + k)] * rhs[static_cast<size_t>(k)];
        rhs[static_cast<size_t>(i)] = sum / g[static_cast<size_t>(i * n + i)];
    }
    for (int64_t i = n - 1; i >= 0; --i) {
        double sum = rhs[static_cast<size_t>(i)];
        for (int64_t k = i + 1; k < n; ++k)
            sum -= g[static_cast<size_t>(k * n + i)] * rhs[static_cast<size_t>(k)];
        rhs[static_cast<size_t>(i)] = sum / g[static_cast<size_t>(i * n + i)];
    }
    return true;
}

}  // namespace

std::vector<double> LinearBaseline::features(const ObservationWindow& w) const {
    if (w.v_tab != v_tab || w.v_band != v_band)
        throw ContractError("baseline: window variables do not match the fitted feature layout");
    std::vector<double> vals;
    std::vector<uint8_t> present;
    raw_features(w, vals, present);
    for (size_t i = 0; i < vals.size(); ++i)
        if (!present[i]) vals[i] = feature_means[i];
    return vals;
}

double LinearBaseline::predict(const ObservationWindow& w) const {
    const auto x = features(w);
    double y = intercept;
    for (size_t i = 0; i < x.size(); ++i) y += weights[i] * x[i];
    return y;
}

LinearBaseline fit_linear_baseline(const std::vector<ObservationWindow>& windows, double lambda) {
    if (lambda < 0.0) throw ConfigError("baseline: lambda must be >= 0");
    if (windows.empty()) throw ContractError("baseline: no training windows");
    const int64_t v_tab = windows.front().v_tab;
    const int64_t v_band = windows.front().v_band;
    const int64_t f = v_tab + v_band;
    if (static_cast<int64_t>(windows.size()) < f + 1)
        throw ContractError("baseline: need at least " + std::to_string(f + 1) + " samples, have " +
                            std::to_string(windows.size()));

    // pass 1: training means for imputation
    std::vector<double> mean_sum(static_cast<size_t>(f), 0.0);
    std::vector<int64_t> mean_n(static_cast<size_t>(f), 0);
    std::vector<double> vals;
    std::vector<uint8_t> present;
    for (const auto& w : windows) {
        raw_features(w, vals, present);
        for (int64_t i = 0; i < f; ++i)
            if (present[static_cast<size_t>(i)]) {
                mean_sum[static_cast<size_t>(i)] += vals[static_cast<size_t>(i)];
                ++mean_n[static_cast<size_t>(i)];
            }
    }
    LinearBaseline model;
    model.v_tab = v_tab;
    model.v_band = v_band;
    model.lambda = lambda;
    model.feature_means.assign(static_cast<size_t>(f), 0.0);
    for (int64_t i = 0; i < f; ++i)
        if (mean_n[static_cast<size_t>(i)] > 0)
            model.feature_means[static_cast<size_t>(i)] =
                mean_sum[static_cast<size_t>(i)] / static_cast<double>(mean_n[static_cast<size_t>(i)]);

    // pass 2: accumulate normal equations on centered data
    const auto n_samples = static_cast<double>(windows.size());
    std::vector<double> x_mean(static_cast<size_t>(f), 0.0);
    double y_mean = 0.0;
    std::vector<std::vector<double>> cache;
    cache.reserve(windows.size());
    std::vector<double> targets;
    targets.reserve(windows.size());
    for (const auto& w : windows) {
        raw_features(w, vals, present);
        for (int64_t i = 0; i < f; ++i)
            if (!present[static_cast<size_t>(i)])
                vals[static_cast<size_t>(i)] = model.feature_means[static_cast<size_t>(i)];
        for (int64_t i = 0; i < f; ++i) x_mean[static_cast<size_t>(i)] += vals[static_cast<size_t>(i)];
        y_mean += w.target;
        cache.push_back(vals);
        targets.push_back(w.target);
    }
    for (auto& m : x_mean) m /= n_samples;
    y_mean /= n_samples;

    std::vector<double> gram(static_cast<size_t>(f * f), 0.0);
    std::vector<double> rhs(static_cast<size_t>(f), 0.0);
    for (size_t s = 0; s < cache.size(); ++s) {
        const auto& x = cache[s];
        const double yc = targets[s] - y_mean;
        for (int64_t i = 0; i < f; ++i) {
            const double xi = x[static_cast<size_t>(i)] - x_mean[static_cast<size_t>(i)];
            rhs[static_cast<size_t>(i)] += xi * yc;
            for (int64_t j = 0; j <= i; ++j)
                gram[static_cast<size_t>(i * f + j)] +=
                    xi * (x[static_cast<size_t>(j)] - x_mean[static_cast<size_t>(j)]);
        }
    }
    for (int64_t i = 0; i < f; ++i) {
        for (int64_t j = i + 1; j < f; ++j)
            gram[static_cast<size_t>(i * f + j)] = gram[static_cast<size_t>(j * f + i)];
        gram[static_cast<size_t>(i * f + i)] += lambda;
    }

    if (!cholesky_solve(gram, rhs, f))
        throw ContractError(
            "baseline: normal equations are rank deficient at lambda=0; use lambda > 0");
    model.weights = rhs;
    double dot = 0.0;
    for (int64_t i = 0; i < f; ++i) dot += model.weights[static_cast<size_t>(i)] * x_mean[static_cast<size_t>(i)];
    model.intercept = y_mean - dot;
    return model;
}

LinearBaseline fit_linear_baseline(const WindowDataset& train, double lambda) {
    std::vector<ObservationWindow> windows;
    windows.reserve(train.refs().size());
    for (const auto& ref : train.refs()) windows.push_back(train.materialize(ref));
    return fit_linear_baseline(windows, lambda);
}

void write_baseline(const std::string& path, const LinearBaseline& b) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    char buf[40];
    auto full = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "baseline_version=1\n";
    out << "v_tab=" << b.v_tab << "\n";
    out << "v_band=" << b.v_band << "\n";
    out << "lambda=" << full(b.lambda) << "\n";
    out << "intercept=" << full(b.intercept) << "\n";
    for (size_t i = 0; i < b.weights.size(); ++i)
        out << "w." << i << "=" << full(b.weights[i]) << "\n";
    for (size_t i = 0; i < b.feature_means.size(); ++i)
        out << "m." << i << "=" << full(b.feature_means[i]) << "\n";
}

LinearBaseline read_baseline(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    LinearBaseline b;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(path + ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "baseline_version") {
            if (val != "1") throw FormatError(path + ": unsupported baseline version");
        } else if (key == "v_tab") {
            b.v_tab = std::stoll(val);
        } else if (key == "v_band") {
            b.v_band = std::stoll(val);
        } else if (key == "lambda") {
            b.lambda = std::stod(val);
        } else if (key == "intercept") {
            b.intercept = std::stod(val);
        } else if (key.rfind("w.", 0) == 0) {
            const size_t idx = std::stoul(key.substr(2));
            if (b.weights.size() <= idx) b.weights.resize(idx + 1, 0.0);
            b.weights[idx] = std::stod(val);
        } else if (key.rfind("m.", 0) == 0) {
            const size_t idx = std::stoul(key.substr(2));
            if (b.feature_means.size() <= idx) b.feature_means.resize(idx + 1, 0.0);
            b.feature_means[idx] = std::stod(val);
        } else {
            throw FormatError(path + ": unknown key " + key);
        }
    }
    if (static_cast<int64_t>(b.weights.size()) != b.n_features())
        throw FormatError(path + ": weight count does not match feature layout");
    return b;
}

}  // namespace ecp
