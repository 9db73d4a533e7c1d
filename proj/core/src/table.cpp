#include "ecoperceiver/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ecoperceiver/timeutil.hpp"

namespace ecp {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& s, const std::string& path, int64_t lineno) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": malformed number '" + s + "'");
    }
}

std::string fmt_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

bool is_qc_code(const std::string& code) {
    return code.size() > 3 && code.compare(code.size() - 3, 3, "_QC") == 0;
}

}  // namespace

Column& TimeTable::column(const std::string& code) {
    auto it = cols.find(code);
    if (it == cols.end()) throw ContractError("table: no column " + code);
    return it->second;
}

const Column* TimeTable::find(const std::string& code) const {
    auto it = cols.find(code);
    return it == cols.end() ? nullptr : &it->second;
}

void TimeTable::add_column(const std::string& code) {
    if (cols.count(code)) return;
    order.push_back(code);
    Column c;
    c.values.assign(static_cast<size_t>(rows()), 0.0);
    c.present.assign(static_cast<size_t>(rows()), 0);
    cols.emplace(code, std::move(c));
}

void TimeTable::validate_grid() const {
    if (cadence_minutes != 30 && cadence_minutes != 60)
        throw FormatError("table: cadence must be 30 or 60 minutes, got " +
                          std::to_string(cadence_minutes));
    for (size_t i = 1; i < start_minutes.size(); ++i)
        if (start_minutes[i] - start_minutes[i - 1] != cadence_minutes)
            throw FormatError("table: timestamps not strictly increasing at fixed cadence near " +
                              format_timestamp(start_minutes[i]));
    for (const auto& [code, col] : cols) {
        if (col.values.size() != start_minutes.size() || col.present.size() != start_minutes.size())
            throw ContractError("table: column " + code + " length mismatch");
    }
}

RawRelease read_release_csv(const std::string& path, const VariableCatalog& catalog) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    RawRelease rel;
    {
        const std::string stem = std::filesystem::path(path).stem().string();
        const auto us = stem.find('_');
        if (us == std::string::npos)
            throw FormatError(path + ": release file name must be <YYYYMMDD>_<release_id>.csv");
        rel.release_date = parse_date(stem.substr(0, us));
        rel.release_id = stem.substr(us + 1);
        if (rel.release_id.empty()) throw FormatError(path + ": empty release id in file name");
    }

    std::string line;
    int64_t lineno = 0;
    std::vector<std::string> header;
    std::vector<std::string> unit_row;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("#units,", 0) == 0) unit_row = split_csv(line.substr(1));
            continue;
        }
        header = split_csv(line);
        break;
    }
    if (header.empty() || header[0] != "TIMESTAMP_START")
        throw FormatError(path + ":" + std::to_string(lineno) +
                          ": first column must be TIMESTAMP_START");

    // classify columns: kept (catalog/target), QC, pruned
    const int64_t ncols = static_cast<int64_t>(header.size());
    std::vector<int> role(static_cast<size_t>(ncols), 0);  // 0 prune, 1 value, 2 qc
    for (int64_t c = 1; c < ncols; ++c) {
        const std::string& code = header[static_cast<size_t>(c)];
        if (is_qc_code(code)) {
            const std::string base = code.substr(0, code.size() - 3);
            if (catalog.contains(base) || is_target_code(base)) role[static_cast<size_t>(c)] = 2;
        } else if (catalog.contains(code) || is_target_code(code)) {
            role[static_cast<size_t>(c)] = 1;
        }
        if (role[static_cast<size_t>(c)] == 0) rel.pruned_columns.push_back(code);
    }
    if (!unit_row.empty()) {
        if (unit_row.size() != header.size())
            throw FormatError(path + ": #units row has " + std::to_string(unit_row.size()) +
                              " fields, header has " + std::to_string(header.size()));
        for (int64_t c = 1; c < ncols; ++c)
            if (role[static_cast<size_t>(c)] == 1 && !unit_row[static_cast<size_t>(c)].empty())
                rel.units[header[static_cast<size_t>(c)]] = unit_row[static_cast<size_t>(c)];
    }

    TimeTable& t = rel.table;
    for (int64_t c = 1; c < ncols; ++c)
        if (role[static_cast<size_t>(c)] == 1) {
            t.order.push_back(header[static_cast<size_t>(c)]);
            t.cols.emplace(header[static_cast<size_t>(c)], Column{});
        }
    for (int64_t c = 1; c < ncols; ++c)
        if (role[static_cast<size_t>(c)] == 2)
            t.qc.emplace(header[static_cast<size_t>(c)].substr(0, header[static_cast<size_t>(c)].size() - 3),
                         std::vector<int8_t>{});

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv(line);
        if (static_cast<int64_t>(fields.size()) != ncols)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(ncols) + " fields, got " + std::to_string(fields.size()));
        t.start_minutes.push_back(parse_timestamp(fields[0]));
        for (int64_t c = 1; c < ncols; ++c) {
            const std::string& cell = fields[static_cast<size_t>(c)];
            const std::string& code = header[static_cast<size_t>(c)];
            if (role[static_cast<size_t>(c)] == 1) {
                auto& col = t.cols[code];
                if (cell == "NA" || cell.empty()) {
                    col.values.push_back(0.0);
                    col.present.push_back(0);
                } else {
                    col.values.push_back(parse_number(cell, path, lineno));
                    col.present.push_back(1);
                }
            } else if (role[static_cast<size_t>(c)] == 2) {
                auto& flags = t.qc[code.substr(0, code.size() - 3)];
                if (cell == "NA" || cell.empty()) {
                    flags.push_back(-1);
                } else {
                    const double v = parse_number(cell, path, lineno);
                    if (v < 0 || v > 3 || v != std::floor(v))
                        throw FormatError(path + ":" + std::to_string(lineno) + ": QC flag '" + cell +
                                          "' outside 0..3");
                    flags.push_back(static_cast<int8_t>(v));
                }
            }
        }
    }
    if (t.start_minutes.empty()) throw FormatError(path + ": no data rows");

    // cadence from the first step
    if (t.start_minutes.size() >= 2) {
        const int64_t step = t.start_minutes[1] - t.start_minutes[0];
        if (step != 30 && step != 60)
            throw FormatError(path + ": cadence " + std::to_string(step) + " minutes unsupported");
        t.cadence_minutes = static_cast<int>(step);
    }
    // QC coverage: every non-exempt catalog predictor present in the file
    // must carry its QC column
    for (const auto& code : t.order) {
        const int64_t idx = catalog.index_of(code);
        if (idx >= 0 && !catalog.at(idx).qc_exempt && t.qc.find(code) == t.qc.end())
            throw FormatError(path + ": variable " + code +
                              " requires a QC column (not declared QC-exempt)");
    }
    t.validate_grid();
    return rel;
}

void write_table_csv(const std::string& path, const TimeTable& t) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "TIMESTAMP_START";
    for (const auto& code : t.order) out << "," << code;
    out << "\n";
    for (int64_t r = 0; r < t.rows(); ++r) {
        out << format_timestamp(t.start_minutes[static_cast<size_t>(r)]);
        for (const auto& code : t.order) {
            const auto& col = t.cols.at(code);
            out << ",";
            if (col.present[static_cast<size_t>(r)])
                out << fmt_value(col.values[static_cast<size_t>(r)]);
            else
                out << "NA";
        }
        out << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

TimeTable read_table_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    TimeTable t;
    std::string line;
    int64_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        header = split_csv(line);
        break;
    }
    if (header.empty() || header[0] != "TIMESTAMP_START")
        throw FormatError(path + ": first column must be TIMESTAMP_START");
    for (size_t c = 1; c < header.size(); ++c) {
        t.order.push_back(header[c]);
        t.cols.emplace(header[c], Column{});
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv(line);
        if (fields.size() != header.size())
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(header.size()) + " fields");
        t.start_minutes.push_back(parse_timestamp(fields[0]));
        for (size_t c = 1; c < header.size(); ++c) {
            auto& col = t.cols[header[c]];
            if (fields[c] == "NA" || fields[c].empty()) {
                col.values.push_back(0.0);
                col.present.push_back(0);
            } else {
                col.values.push_back(parse_number(fields[c], path, lineno));
                col.present.push_back(1);
            }
        }
    }
    if (t.start_minutes.empty()) throw FormatError(path + ": no data rows");
    if (t.start_minutes.size() >= 2) {
        const int64_t step = t.start_minutes[1] - t.start_minutes[0];
        if (step != 30 && step != 60)
            throw FormatError(path + ": cadence " + std::to_string(step) + " minutes unsupported");
        t.cadence_minutes = static_cast<int>(step);
    }
    t.validate_grid();
    return t;
}

SiteMeta read_site_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    SiteMeta m;
    std::string line;
    int64_t lineno = 0;
    bool have_id = false, have_igbp = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "site_id") {
            m.site_id = val;
            have_id = true;
        } else if (key == "latitude") {
            m.latitude = parse_number(val, path, lineno);
        } else if (key == "longitude") {
            m.longitude = parse_number(val, path, lineno);
        } else if (key == "igbp") {
            m.igbp = val;
            have_igbp = true;
        } else if (key == "timestamps") {
            m.timestamps_utc = (val == "utc");
        } else {
            throw FormatError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (!have_id || !have_igbp) throw FormatError(path + ": site_id and igbp are required");
    return m;
}

void write_site_meta(const std::string& path, const SiteMeta& meta) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "site_id=" << meta.site_id << "\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", meta.latitude);
    out << "latitude=" << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.6f", meta.longitude);
    out << "longitude=" << buf << "\n";
    out << "igbp=" << meta.igbp << "\n";
    if (meta.timestamps_utc) out << "timestamps=utc\n";
}

}  // namespace ecp
