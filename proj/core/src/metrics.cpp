#include "ecoperceiver/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ecp {

double nse(std::span<const double> pred, std::span<const double> obs) {
    if (pred.size() != obs.size())
        throw ContractError("nse: length mismatch " + std::to_string(pred.size()) + " vs " +
                            std::to_string(obs.size()));
    if (obs.size() < 2) throw ContractError("nse: need at least 2 samples");
    double mean = 0.0;
    for (double y : obs) mean += y;
    mean /= static_cast<double>(obs.size());
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < obs.size(); ++i) {
        num += (obs[i] - pred[i]) * (obs[i] - pred[i]);
        den += (obs[i] - mean) * (obs[i] - mean);
    }
    if (den == 0.0)
        throw ContractError("nse: observations are all identical, variance undefined");
    return 1.0 - num / den;
}

double rmse(std::span<const double> pred, std::span<const double> obs) {
    if (pred.size() != obs.size())
        throw ContractError("rmse: length mismatch " + std::to_string(pred.size()) + " vs " +
                            std::to_string(obs.size()));
    if (obs.empty()) throw ContractError("rmse: empty input");
    double acc = 0.0;
    for (size_t i = 0; i < obs.size(); ++i) acc += (pred[i] - obs[i]) * (pred[i] - obs[i]);
    return std::sqrt(acc / static_cast<double>(obs.size()));
}

namespace {

// Continued fraction for the regularized incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw ContractError("incomplete_beta: continued fraction failed to converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw ContractError("incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log(1.0 - x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, int64_t df) {
    if (df < 1) throw ContractError("student_t: df must be >= 1");
    const double d = static_cast<double>(df);
    return incomplete_beta(d / 2.0, 0.5, d / (d + t * t));
}

TTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ContractError("paired_t_test: length mismatch " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
    const auto n = static_cast<int64_t>(a.size());
    if (n < 2) throw ContractError("paired_t_test: need at least 2 pairs");
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += a[static_cast<size_t>(i)] - b[static_cast<size_t>(i)];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = a[static_cast<size_t>(i)] - b[static_cast<size_t>(i)] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) throw DegenerateError("paired_t_test: zero-variance differences");
    TTest r;
    r.df = n - 1;
    r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

// --- evaluation reports -------------------------------------------------

std::vector<std::string> EvalReport::igbp_classes() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.igbp);
    return {s.begin(), s.end()};
}

std::vector<double> EvalReport::nse_per_seed(const std::string& igbp) const {
    std::vector<std::pair<int64_t, double>> rows;
    for (const auto& e : entries)
        if (e.igbp == igbp) rows.emplace_back(e.seed, e.nse);
    std::sort(rows.begin(), rows.end());
    std::vector<double> out;
    for (const auto& [seed, v] : rows) out.push_back(v);
    return out;
}

double EvalReport::mean_nse(const std::string& igbp) const {
    double acc = 0.0;
    int64_t n = 0;
    for (const auto& e : entries)
        if (e.igbp == igbp) {
            acc += e.nse;
            ++n;
        }
    if (n == 0) throw ContractError("report: no entries for " + igbp);
    return acc / static_cast<double>(n);
}

double EvalReport::mean_rmse(const std::string& igbp) const {
    double acc = 0.0;
    int64_t n = 0;
    for (const auto& e : entries)
        if (e.igbp == igbp) {
            acc += e.rmse;
            ++n;
        }
    if (n == 0) throw ContractError("report: no entries for " + igbp);
    return acc / static_cast<double>(n);
}

EvalReport evaluate(const std::vector<PredictionSet>& prediction_sets) {
    if (prediction_sets.empty()) throw ContractError("evaluate: no prediction sets");
    EvalReport report;
    for (const auto& ps : prediction_sets) {
        for (const auto& [igbp, po] : ps.by_igbp) {
            const auto& [pred, obs] = po;
            if (obs.empty()) {
                report.warnings.push_back("igbp " + igbp + " seed " + std::to_string(ps.seed) +
                                          ": zero test samples, excluded");
                continue;
            }
            EvalEntry e;
            e.igbp = igbp;
            e.seed = ps.seed;
            e.n = static_cast<int64_t>(obs.size());
            e.nse = nse(pred, obs);
            e.rmse = rmse(pred, obs);
            report.entries.push_back(std::move(e));
        }
    }
    return report;
}

std::vector<ComparisonRow> compare_reports(const EvalReport& a, const EvalReport& b) {
    std::vector<ComparisonRow> rows;
    for (const auto& igbp : a.igbp_classes()) {
        auto a_nse = a.nse_per_seed(igbp);
        auto b_nse = b.nse_per_seed(igbp);
        if (b_nse.empty()) continue;
        ComparisonRow row;
        row.igbp = igbp;
        row.a_nse = a.mean_nse(igbp);
        row.a_rmse = a.mean_rmse(igbp);
        row.b_nse = b.mean_nse(igbp);
        row.b_rmse = b.mean_rmse(igbp);
        // a deterministic single-entry side broadcasts across the other's seeds
        if (a_nse.size() > 1 && b_nse.size() == 1) b_nse.assign(a_nse.size(), b_nse[0]);
        if (b_nse.size() > 1 && a_nse.size() == 1) a_nse.assign(b_nse.size(), a_nse[0]);
        if (a_nse.size() == b_nse.size() && a_nse.size() >= 2) {
            row.test = paired_t_test(a_nse, b_nse);
            row.has_test = true;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

void write_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "igbp,seed,nse,rmse,n\n";
    for (const auto& e : report.entries)
        out << e.igbp << "," << e.seed << "," << fmt(e.nse) << "," << fmt(e.rmse) << "," << e.n << "\n";
    for (const auto& w : report.warnings) out << "# warning: " << w << "\n";
    if (!out) throw IoError("short write to " + path);
}

EvalReport read_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    EvalReport report;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "igbp,seed,nse,rmse,n") continue;
        if (line.rfind("# warning: ", 0) == 0) {
            report.warnings.push_back(line.substr(11));
            continue;
        }
        std::vector<std::string> f;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                f.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        f.push_back(cur);
        if (f.size() != 5)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected 5 fields");
        EvalEntry e;
        e.igbp = f[0];
        e.seed = std::stoll(f[1]);
        e.nse = std::stod(f[2]);
        e.rmse = std::stod(f[3]);
        e.n = std::stoll(f[4]);
        report.entries.push_back(std::move(e));
    }
    return report;
}

void write_summary_csv(const std::string& path, const std::vector<ComparisonRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "igbp,a_nse,a_rmse,b_nse,b_rmse,t,p,df\n";
    for (const auto& r : rows) {
        out << r.igbp << "," << fmt(r.a_nse) << "," << fmt(r.a_rmse) << "," << fmt(r.b_nse) << ","
            << fmt(r.b_rmse) << ",";
        if (r.has_test)
            out << fmt(r.test.t) << "," << fmt(r.test.p) << "," << r.test.df;
        else
            out << ",,";
        out << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

}  // namespace ecp
