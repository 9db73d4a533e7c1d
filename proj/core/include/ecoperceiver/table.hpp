#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecoperceiver/catalog.hpp"
#include "ecoperceiver/errors.hpp"

namespace ecp {

struct Column {
    std::vector<double> values;
    std::vector<uint8_t> present;
};

// Fixed-cadence site table: one row per timestamp, value columns with
// presence flags, QC flags kept beside their columns (-1 = no flag).
struct TimeTable {
    int cadence_minutes = 60;
    std::vector<int64_t> start_minutes;  // strictly increasing, fixed step
    std::vector<std::string> order;      // column output order
    std::map<std::string, Column> cols;
    std::map<std::string, std::vector<int8_t>> qc;

    int64_t rows() const { return static_cast<int64_t>(start_minutes.size()); }

    Column& column(const std::string& code);
    const Column* find(const std::string& code) const;
    bool has(const std::string& code) const { return cols.count(code) > 0; }
    void add_column(const std::string& code);
    void validate_grid() const;
};

// One source-network release of a site's data.
struct RawRelease {
    std::string release_id;
    int64_t release_date = 0;  // epoch day
    TimeTable table;
    std::map<std::string, std::string> units;  // optional, from a #units line
    std::vector<std::string> pruned_columns;   // dropped at load (not in catalog)
};

// Reads a release CSV. The filename must be <YYYYMMDD>_<release_id>.csv; the
// header row is TIMESTAMP_START plus variable and *_QC columns. A '#units'
// comment row, when present, pins units per column. Columns that are neither
// catalog variables, targets, nor QC columns are pruned (recorded, not an
// error). Missing cells are the literal NA.
RawRelease read_release_csv(const std::string& path, const VariableCatalog& catalog);

// Writes a table as CSV (TIMESTAMP_START + order columns, NA for missing).
void write_table_csv(const std::string& path, const TimeTable& t);

// Reads a plain value table back (no QC columns, no catalog screening);
// inverse of write_table_csv.
TimeTable read_table_csv(const std::string& path);

// Site metadata (meta.txt key=value: site_id, latitude, longitude, igbp).
struct SiteMeta {
    std::string site_id;
    double latitude = 0.0;
    double longitude = 0.0;
    std::string igbp;
    bool timestamps_utc = false;  // ONEFlux uses local standard time
};

SiteMeta read_site_meta(const std::string& path);
void write_site_meta(const std::string& path, const SiteMeta& meta);

}  // namespace ecp
