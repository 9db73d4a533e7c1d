#include "ecoperceiver/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include "ecoperceiver/rng.hpp"
#include "ecoperceiver/timeutil.hpp"

namespace ecp {

namespace {

int8_t worsen_qc(int8_t qc) {
    const int v = qc < 0 ? 0 : qc;
    return static_cast<int8_t>(v >= 3 ? 3 : v + 1);
}

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

// --- fusion -----------------------------------------------------------------

TimeTable fuse_releases(const std::vector<RawRelease>& releases, const VariableCatalog& catalog) {
    if (releases.empty()) throw ContractError("fuse_releases: no releases");

    // unit consistency per catalog across all releases
    for (const auto& rel : releases)
        for (const auto& [code, unit] : rel.units) {
            const int64_t idx = catalog.index_of(code);
            const std::string expected = idx >= 0 ? catalog.at(idx).unit : "umol CO2 m-2 s-1";
            if (!expected.empty() && unit != expected)
                throw FormatError("fusion: release " + rel.release_id + " reports " + code + " in '" +
                                  unit + "', catalog unit is '" + expected + "'");
        }

    std::vector<const RawRelease*> newest_first;
    for (const auto& r : releases) newest_first.push_back(&r);
    std::stable_sort(newest_first.begin(), newest_first.end(),
                     [](const RawRelease* a, const RawRelease* b) { return a->release_date > b->release_date; });

    int cadence = 60;
    int64_t lo = releases[0].table.start_minutes.front();
    int64_t hi = releases[0].table.start_minutes.back();
    for (const auto& r : releases) {
        cadence = std::min(cadence, r.table.cadence_minutes);
        lo = std::min(lo, r.table.start_minutes.front());
        hi = std::max(hi, r.table.start_minutes.back());
    }

    TimeTable out;
    out.cadence_minutes = cadence;
    for (int64_t t = lo; t <= hi; t += cadence) out.start_minutes.push_back(t);

    // column order: union in catalog-then-target order, then first appearance
    std::vector<std::string> codes;
    auto add_code = [&codes](const std::string& c) {
        if (std::find(codes.begin(), codes.end(), c) == codes.end()) codes.push_back(c);
    };
    for (const auto& v : catalog.vars)
        for (const auto& r : releases)
            if (r.table.has(v.code)) {
                add_code(v.code);
                break;
            }
    for (const auto& tgt : target_codes())
        for (const auto& r : releases)
            if (r.table.has(tgt)) {
                add_code(tgt);
                break;
            }

    const int64_t n = out.rows();
    for (const auto& code : codes) {
        Column col;
        col.values.assign(static_cast<size_t>(n), 0.0);
        col.present.assign(static_cast<size_t>(n), 0);
        std::vector<int8_t> flags(static_cast<size_t>(n), -1);
        bool any_qc = false;

        for (int64_t row = 0; row < n; ++row) {
            const int64_t ts = out.start_minutes[static_cast<size_t>(row)];
            for (const RawRelease* rel : newest_first) {
                const Column* rc = rel->table.find(code);
                if (!rc) continue;
                const int64_t first = rel->table.start_minutes.front();
                if (ts < first || ts > rel->table.start_minutes.back()) continue;
                if ((ts - first) % rel->table.cadence_minutes != 0) continue;
                const int64_t r2 = (ts - first) / rel->table.cadence_minutes;
                if (!rc->present[static_cast<size_t>(r2)]) continue;  // fall back to older release
                col.values[static_cast<size_t>(row)] = rc->values[static_cast<size_t>(r2)];
                col.present[static_cast<size_t>(row)] = 1;
                auto qit = rel->table.qc.find(code);
                if (qit != rel->table.qc.end()) {
                    flags[static_cast<size_t>(row)] = qit->second[static_cast<size_t>(r2)];
                    any_qc = true;
                }
                break;
            }
        }
        out.order.push_back(code);
        out.cols.emplace(code, std::move(col));
        if (any_qc) out.qc.emplace(code, std::move(flags));
    }
    out.validate_grid();
    return out;
}

// --- downsampling -----------------------------------------------------------

TimeTable downsample_hourly(const TimeTable& t, const VariableCatalog& catalog) {
    if (t.cadence_minutes != 30)
        throw FormatError("downsample: table cadence is " + std::to_string(t.cadence_minutes) +
                          " minutes, expected 30");
    if (t.rows() == 0) throw ContractError("downsample: empty table");
    if (t.start_minutes.front() % 60 != 0)
        throw FormatError("downsample: first timestamp " + format_timestamp(t.start_minutes.front()) +
                          " is not aligned to the hour");

    TimeTable out;
    out.cadence_minutes = 60;
    const int64_t first = t.start_minutes.front();
    const int64_t last = t.start_minutes.back();
    for (int64_t h = first; h <= last; h += 60) out.start_minutes.push_back(h);
    const int64_t n_out = out.rows();

    auto slot = [&](int64_t minutes) -> int64_t {
        if (minutes < first || minutes > last) return -1;
        return (minutes - first) / 30;
    };

    for (const auto& code : t.order) {
        const Column& src = t.cols.at(code);
        const auto qit = t.qc.find(code);
        AggKind agg = AggKind::Mean;
        const int64_t ci = catalog.index_of(code);
        if (ci >= 0) agg = catalog.at(ci).agg;

        Column col;
        col.values.assign(static_cast<size_t>(n_out), 0.0);
        col.present.assign(static_cast<size_t>(n_out), 0);
        std::vector<int8_t> flags(static_cast<size_t>(n_out), -1);

        for (int64_t row = 0; row < n_out; ++row) {
            const int64_t h = out.start_minutes[static_cast<size_t>(row)];
            const int64_t ia = slot(h);
            const int64_t ib = slot(h + 30);
            const bool pa = ia >= 0 && src.present[static_cast<size_t>(ia)];
            const bool pb = ib >= 0 && src.present[static_cast<size_t>(ib)];
            if (!pa && !pb) continue;
            const double va = pa ? src.values[static_cast<size_t>(ia)] : 0.0;
            const double vb = pb ? src.values[static_cast<size_t>(ib)] : 0.0;
            const int8_t qa = (pa && qit != t.qc.end()) ? qit->second[static_cast<size_t>(ia)] : -1;
            const int8_t qb = (pb && qit != t.qc.end()) ? qit->second[static_cast<size_t>(ib)] : -1;

            double v;
            if (pa && pb) {
                switch (agg) {
                    case AggKind::Sum:
                        v = va + vb;
                        break;
                    case AggKind::CircularMean: {
                        const double ra = va * M_PI / 180.0, rb = vb * M_PI / 180.0;
                        double ang = std::atan2((std::sin(ra) + std::sin(rb)) / 2.0,
                                                (std::cos(ra) + std::cos(rb)) / 2.0) *
                                     180.0 / M_PI;
                        if (ang < 0) ang += 360.0;
                        if (ang >= 360.0) ang -= 360.0;
                        if (ang == 0.0) ang = 0.0;  // normalize -0
                        v = ang;
                        break;
                    }
                    case AggKind::Mean:
                    default:
                        v = (va + vb) / 2.0;
                }
                flags[static_cast<size_t>(row)] = std::max(qa, qb);
            } else {
                v = pa ? va : vb;  // lone half-hour carries the hour, QC worsened
                flags[static_cast<size_t>(row)] = worsen_qc(pa ? qa : qb);
            }
            col.values[static_cast<size_t>(row)] = v;
            col.present[static_cast<size_t>(row)] = 1;
        }
        out.order.push_back(code);
        out.cols.emplace(code, std::move(col));
        if (qit != t.qc.end()) out.qc.emplace(code, std::move(flags));
    }
    out.validate_grid();
    return out;
}

// --- QC leniency ------------------------------------------------------------

TimeTable apply_qc_leniency(const TimeTable& t, int max_qc, QcStats* stats) {
    if (max_qc < 0 || max_qc > 3)
        throw ConfigError("qc leniency: max_qc must lie in [0,3], got " + std::to_string(max_qc));
    TimeTable out = t;
    if (stats) *stats = QcStats{};
    for (auto& [code, col] : out.cols) {
        auto qit = out.qc.find(code);
        if (qit == out.qc.end()) continue;
        for (int64_t r = 0; r < out.rows(); ++r) {
            if (!col.present[static_cast<size_t>(r)]) continue;
            if (stats) ++stats->cells_checked;
            const int8_t flag = qit->second[static_cast<size_t>(r)];
            if (flag > max_qc) {
                col.present[static_cast<size_t>(r)] = 0;
                col.values[static_cast<size_t>(r)] = 0.0;
                if (stats) {
                    ++stats->cells_removed;
                    ++stats->removed_per_column[code];
                }
            }
        }
    }
    return out;
}

// --- normalization ----------------------------------------------------------

NormalizationManifest compute_manifest(const std::vector<SiteTable>& training_sites,
                                       const VariableCatalog& catalog) {
    if (training_sites.empty()) throw ContractError("compute_manifest: no training sites");
    NormalizationManifest m;

    for (const auto& var : catalog.vars) {
        VarStats vs;
        vs.kind = var.kind;
        if (var.kind == VarKind::Cyclic) {
            vs.min = var.cycle_min;
            vs.max = var.cycle_max;
            m.vars[var.code] = vs;
            continue;
        }
        double mn = std::numeric_limits<double>::infinity();
        double mx = -std::numeric_limits<double>::infinity();
        int64_t count = 0;
        if (var.kind == VarKind::SpectralBand) {
            const int64_t band = catalog.index_of(var.code) - catalog.tabular_count();
            for (const auto& site : training_sites) {
                if (!site.band_samples) continue;
                for (double px : (*site.band_samples)[static_cast<size_t>(band)]) {
                    mn = std::min(mn, px);
                    mx = std::max(mx, px);
                    ++count;
                }
            }
        } else {
            for (const auto& site : training_sites) {
                const Column* col = site.table ? site.table->find(var.code) : nullptr;
                if (!col) continue;
                for (size_t r = 0; r < col->values.size(); ++r)
                    if (col->present[r]) {
                        mn = std::min(mn, col->values[r]);
                        mx = std::max(mx, col->values[r]);
                        ++count;
                    }
            }
        }
        if (count == 0)
            throw ContractError("manifest: variable " + var.code +
                                " has zero observations over the training corpus");
        vs.min = mn;
        vs.max = mx;
        vs.degenerate = !(mn < mx);
        m.vars[var.code] = vs;
    }

    // target statistics (physical units) per site and per IGBP
    struct Acc {
        double sum = 0, sum2 = 0;
        int64_t n = 0;
    };
    std::map<std::string, Acc> accs;
    for (const auto& site : training_sites) {
        if (!site.table) continue;
        for (const auto& tgt : target_codes()) {
            const Column* col = site.table->find(tgt);
            if (!col) continue;
            Acc& a_site = accs[tgt + "|site|" + site.site_id];
            Acc& a_igbp = accs[tgt + "|igbp|" + site.igbp];
            for (size_t r = 0; r < col->values.size(); ++r)
                if (col->present[r]) {
                    const double v = col->values[r];
                    a_site.sum += v;
                    a_site.sum2 += v * v;
                    ++a_site.n;
                    a_igbp.sum += v;
                    a_igbp.sum2 += v * v;
                    ++a_igbp.n;
                }
        }
    }
    for (const auto& [key, acc] : accs) {
        if (acc.n == 0) continue;
        TargetStats ts;
        ts.n = acc.n;
        ts.mean = acc.sum / static_cast<double>(acc.n);
        ts.variance = acc.sum2 / static_cast<double>(acc.n) - ts.mean * ts.mean;
        m.target_stats[key] = ts;
    }
    return m;
}

double normalize_value(double x, const VarStats& vs, bool* clamped) {
    if (clamped) *clamped = false;
    if (vs.degenerate) return 0.0;
    const double span = vs.max - vs.min;
    if (vs.kind == VarKind::Cyclic) {
        double r = std::fmod(x - vs.min, span);
        if (r < 0) r += span;
        return 2.0 * r / span - 1.0;
    }
    double z = (x - vs.min) / span - 0.5;
    if (z < -0.5) {
        z = -0.5;
        if (clamped) *clamped = true;
    } else if (z > 0.5) {
        z = 0.5;
        if (clamped) *clamped = true;
    }
    return z;
}

double denormalize_value(double z, const VarStats& vs) {
    if (vs.degenerate) return vs.min;
    const double span = vs.max - vs.min;
    if (vs.kind == VarKind::Cyclic) return vs.min + (z + 1.0) * 0.5 * span;
    return vs.min + (z + 0.5) * span;
}

void normalize_table(TimeTable& t, const VariableCatalog& catalog, const NormalizationManifest& m,
                     ClampStats* stats) {
    for (const auto& var : catalog.vars) {
        if (var.kind == VarKind::SpectralBand) continue;
        auto cit = t.cols.find(var.code);
        if (cit == t.cols.end()) continue;
        const auto sit = m.vars.find(var.code);
        if (sit == m.vars.end()) throw ContractError("normalize: no manifest entry for " + var.code);
        Column& col = cit->second;
        for (int64_t r = 0; r < t.rows(); ++r) {
            if (!col.present[static_cast<size_t>(r)]) continue;
            bool clamped = false;
            col.values[static_cast<size_t>(r)] =
                normalize_value(col.values[static_cast<size_t>(r)], sit->second, &clamped);
            if (clamped && stats) {
                ++stats->clamped;
                ++stats->per_column[var.code];
            }
        }
    }
}

void write_manifest(const std::string& path, const NormalizationManifest& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "manifest_version=1\n";
    for (const auto& [code, vs] : m.vars) {
        const char* kind = vs.kind == VarKind::Cyclic      ? "cyclic"
                           : vs.kind == VarKind::SpectralBand ? "band"
                                                               : "acyclic";
        out << "var." << code << ".kind=" << kind << "\n";
        out << "var." << code << ".min=" << fmt_full(vs.min) << "\n";
        out << "var." << code << ".max=" << fmt_full(vs.max) << "\n";
        out << "var." << code << ".degenerate=" << (vs.degenerate ? 1 : 0) << "\n";
    }
    for (const auto& [key, ts] : m.target_stats) {
        out << "stat." << key << ".mean=" << fmt_full(ts.mean) << "\n";
        out << "stat." << key << ".var=" << fmt_full(ts.variance) << "\n";
        out << "stat." << key << ".n=" << ts.n << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

NormalizationManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    NormalizationManifest m;
    std::string line;
    int64_t lineno = 0;
    bool version_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "manifest_version") {
            if (val != "1") throw FormatError(path + ": unsupported manifest version " + val);
            version_seen = true;
            continue;
        }
        if (key.rfind("var.", 0) == 0) {
            const auto lastdot = key.rfind('.');
            const std::string code = key.substr(4, lastdot - 4);
            const std::string field = key.substr(lastdot + 1);
            VarStats& vs = m.vars[code];
            if (field == "kind") {
                vs.kind = val == "cyclic" ? VarKind::Cyclic
                          : val == "band" ? VarKind::SpectralBand
                                          : VarKind::Acyclic;
            } else if (field == "min") {
                vs.min = std::stod(val);
            } else if (field == "max") {
                vs.max = std::stod(val);
            } else if (field == "degenerate") {
                vs.degenerate = val == "1";
            } else {
                throw FormatError(path + ":" + std::to_string(lineno) + ": unknown field " + field);
            }
        } else if (key.rfind("stat.", 0) == 0) {
            const auto lastdot = key.rfind('.');
            const std::string skey = key.substr(5, lastdot - 5);
            const std::string field = key.substr(lastdot + 1);
            TargetStats& ts = m.target_stats[skey];
            if (field == "mean")
                ts.mean = std::stod(val);
            else if (field == "var")
                ts.variance = std::stod(val);
            else if (field == "n")
                ts.n = std::stoll(val);
            else
                throw FormatError(path + ":" + std::to_string(lineno) + ": unknown field " + field);
        } else {
            throw FormatError(path + ":" + std::to_string(lineno) + ": unknown key " + key);
        }
    }
    if (!version_seen) throw FormatError(path + ": missing manifest_version");
    return m;
}

// --- splitting --------------------------------------------------------------

bool SplitPlan::is_test(const std::string& site_id) const {
    for (const auto& [igbp, ids] : test)
        if (std::find(ids.begin(), ids.end(), site_id) != ids.end()) return true;
    return false;
}

std::vector<std::string> SplitPlan::train_sites() const {
    std::vector<std::string> out;
    for (const auto& [igbp, ids] : train) out.insert(out.end(), ids.begin(), ids.end());
    return out;
}

std::vector<std::string> SplitPlan::test_sites() const {
    std::vector<std::string> out;
    for (const auto& [igbp, ids] : test) out.insert(out.end(), ids.begin(), ids.end());
    return out;
}

SplitPlan stratified_split(const std::vector<SiteRef>& sites, uint64_t seed) {
    if (sites.empty()) throw ContractError("stratified_split: no sites");
    std::map<std::string, std::vector<std::string>> by_igbp;
    std::set<std::string> seen;
    for (const auto& s : sites) {
        if (!seen.insert(s.site_id).second)
            throw ContractError("stratified_split: duplicate site id " + s.site_id);
        by_igbp[s.igbp].push_back(s.site_id);
    }
    SplitPlan plan;
    plan.seed = seed;
    for (auto& [igbp, ids] : by_igbp) {
        std::sort(ids.begin(), ids.end());
        Rng rng = Rng::derive(seed, "split/" + igbp);
        std::vector<std::string> pool = ids;
        rng.shuffle(pool);
        const int64_t k = test_count_for(static_cast<int64_t>(ids.size()));
        std::vector<std::string> test_ids(pool.begin(), pool.begin() + k);
        std::vector<std::string> train_ids(pool.begin() + k, pool.end());
        std::sort(test_ids.begin(), test_ids.end());
        std::sort(train_ids.begin(), train_ids.end());
        plan.test[igbp] = std::move(test_ids);
        plan.train[igbp] = std::move(train_ids);
    }
    return plan;
}

std::pair<std::vector<std::string>, std::vector<std::string>> train_val_split(
    std::vector<std::string> train_sites, double fraction, uint64_t seed) {
    if (train_sites.size() < 2)
        throw ContractError("train_val_split: need at least 2 sites, got " +
                            std::to_string(train_sites.size()));
    if (fraction <= 0.0 || fraction >= 1.0)
        throw ConfigError("train_val_split: fraction must lie in (0,1)");
    std::sort(train_sites.begin(), train_sites.end());
    Rng rng = Rng::derive(seed, "val_split");
    rng.shuffle(train_sites);
    const auto n = static_cast<int64_t>(train_sites.size());
    const auto val_n = static_cast<int64_t>(std::ceil(fraction * static_cast<double>(n)));
    std::vector<std::string> val(train_sites.begin(), train_sites.begin() + val_n);
    std::vector<std::string> train(train_sites.begin() + val_n, train_sites.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    return {train, val};
}

void write_split_plan(const std::string& path, const SplitPlan& plan) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "split_version=1\n";
    out << "seed=" << plan.seed << "\n";
    out << "site,igbp,partition\n";
    for (const auto& [igbp, ids] : plan.train)
        for (const auto& id : ids) out << id << "," << igbp << ",train\n";
    for (const auto& [igbp, ids] : plan.test)
        for (const auto& id : ids) out << id << "," << igbp << ",test\n";
    if (!out) throw IoError("short write to " + path);
}

SplitPlan read_split_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    SplitPlan plan;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("split_version=", 0) == 0) {
            if (line != "split_version=1") throw FormatError(path + ": unsupported split version");
            continue;
        }
        if (line.rfind("seed=", 0) == 0) {
            plan.seed = std::stoull(line.substr(5));
            continue;
        }
        if (line == "site,igbp,partition") continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        fields.push_back(cur);
        if (fields.size() != 3)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected site,igbp,partition");
        if (fields[2] == "train")
            plan.train[fields[1]].push_back(fields[0]);
        else if (fields[2] == "test")
            plan.test[fields[1]].push_back(fields[0]);
        else
            throw FormatError(path + ":" + std::to_string(lineno) + ": unknown partition " + fields[2]);
    }
    return plan;
}

}  // namespace ecp
