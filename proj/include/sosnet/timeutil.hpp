#pragma once

#include <chrono>
#include <cstdio>
#include <string>

#include "sosnet/errors.hpp"

namespace sosnet {

inline bool valid_date(int year, int month, int day) {
    if (month < 1 || month > 12 || day < 1 || day > 31) return false;
    std::chrono::year_month_day ymd{std::chrono::year{year},
                                    std::chrono::month{unsigned(month)},
                                    std::chrono::day{unsigned(day)}};
    return ymd.ok();
}

// days since 1970-01-01 (can be negative)
inline long long days_from_civil(int year, int month, int day) {
    std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{unsigned(month)},
                                    std::chrono::day{unsigned(day)}};
    return std::chrono::sys_days(ymd).time_since_epoch().count();
}

inline void civil_from_days(long long z, int& year, int& month, int& day) {
    using namespace std::chrono;
    year_month_day ymd{sys_days{days{z}}};
    year = int(ymd.year());
    month = int(unsigned(ymd.month()));
    day = int(unsigned(ymd.day()));
}

inline int day_of_year(int year, int month, int day) {
    if (!valid_date(year, month, day))
        throw DataError("invalid date: " + std::to_string(year) + "-" + std::to_string(month) +
                        "-" + std::to_string(day));
    return int(days_from_civil(year, month, day) - days_from_civil(year, 1, 1)) + 1;
}

// UTC instant at second resolution
struct UtcTime {
    int year = 1970, month = 1, day = 1;
    int hour = 0, minute = 0, second = 0;

    long long epoch_seconds() const {
        return days_from_civil(year, month, day) * 86400LL + hour * 3600LL + minute * 60LL +
               second;
    }

    static UtcTime from_epoch_seconds(long long s) {
        long long d = s / 86400, rem = s % 86400;
        if (rem < 0) {
            rem += 86400;
            d -= 1;
        }
        UtcTime t;
        civil_from_days(d, t.year, t.month, t.day);
        t.hour = int(rem / 3600);
        t.minute = int(rem % 3600 / 60);
        t.second = int(rem % 60);
        return t;
    }

    std::string iso() const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", year, month, day, hour,
                      minute, second);
        return buf;
    }
};

// Accepts YYYY-MM-DDTHH:MM:SS with optional trailing Z. UTC only.
inline UtcTime parse_iso8601(const std::string& s) {
    UtcTime t;
    char tail[4] = {0};
    int n = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%1s", &t.year, &t.month, &t.day,
                        &t.hour, &t.minute, &t.second, tail);
    bool ok = (n == 6 || (n == 7 && tail[0] == 'Z' && s.back() == 'Z'));
    ok = ok && valid_date(t.year, t.month, t.day) && t.hour >= 0 && t.hour < 24 &&
         t.minute >= 0 && t.minute < 60 && t.second >= 0 && t.second < 60;
    if (!ok) throw DataError("unparseable ISO-8601 timestamp: '" + s + "'");
    return t;
}

}  // namespace sosnet
