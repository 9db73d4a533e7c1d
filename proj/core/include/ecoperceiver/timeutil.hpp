#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

#include "ecoperceiver/errors.hpp"

namespace ecp {

// Proleptic Gregorian day count with epoch 1970-01-01 = day 0.
inline int64_t days_from_civil(int64_t y, int64_t m, int64_t d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const int64_t yoe = y - era * 400;
    const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

inline void civil_from_days(int64_t z, int64_t& y, int64_t& m, int64_t& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const int64_t doe = z - era * 146097;
    const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const int64_t mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = yoe + era * 400 + (m <= 2 ? 1 : 0);
}

// "YYYYMMDDHHMM" (ONEFlux TIMESTAMP_START) -> minutes since 1970-01-01 00:00.
inline int64_t parse_timestamp(const std::string& s) {
    if (s.size() != 12) throw FormatError("timestamp '" + s + "' is not YYYYMMDDHHMM");
    for (char c : s)
        if (c < '0' || c > '9') throw FormatError("timestamp '" + s + "' is not numeric");
    const int64_t y = std::stoll(s.substr(0, 4));
    const int64_t mo = std::stoll(s.substr(4, 2));
    const int64_t d = std::stoll(s.substr(6, 2));
    const int64_t h = std::stoll(s.substr(8, 2));
    const int64_t mi = std::stoll(s.substr(10, 2));
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59)
        throw FormatError("timestamp '" + s + "' out of range");
    return days_from_civil(y, mo, d) * 1440 + h * 60 + mi;
}

inline std::string format_timestamp(int64_t minutes) {
    int64_t day = minutes >= 0 ? minutes / 1440 : (minutes - 1439) / 1440;
    int64_t rem = minutes - day * 1440;
    int64_t y, mo, d;
    civil_from_days(day, y, mo, d);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d%02u%02u%02u%02u", static_cast<int>(y),
                  static_cast<unsigned>(mo), static_cast<unsigned>(d),
                  static_cast<unsigned>(rem / 60), static_cast<unsigned>(rem % 60));
    return buf;
}

// Calendar day of a local timestamp, counted from the epoch.
inline int64_t epoch_day(int64_t minutes) {
    return minutes >= 0 ? minutes / 1440 : (minutes - 1439) / 1440;
}

// "YYYYMMDD" -> day count (release dates).
inline int64_t parse_date(const std::string& s) {
    if (s.size() != 8) throw FormatError("date '" + s + "' is not YYYYMMDD");
    return parse_timestamp(s + "0000") / 1440;
}

}  // namespace ecp
