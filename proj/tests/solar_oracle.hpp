#pragma once

// Independent sunrise/sunset oracle for cross-checking the solar module.
// Uses the NOAA/Spencer equation-of-time + declination Fourier series and
// iterates the hour angle from a solar-noon guess; deliberately shares no
// code or constants with include/sosnet/solar.hpp.

#include <cmath>
#include <numbers>

#include "sosnet/timeutil.hpp"

namespace solar_oracle {

struct Result {
    bool never_rises = false;
    bool never_sets = false;
    bool has_event = false;
    double ut_hours = 0.0;  // in [0,24)
};

inline double fractional_year_rad(int jday, double ut_hours) {
    return 2.0 * std::numbers::pi / 365.0 * (jday - 1 + (ut_hours - 12.0) / 24.0);
}

inline double eqtime_minutes(double g) {
    return 229.18 * (0.000075 + 0.001868 * std::cos(g) - 0.032077 * std::sin(g) -
                     0.014615 * std::cos(2 * g) - 0.040849 * std::sin(2 * g));
}

inline double declination_rad(double g) {
    return 0.006918 - 0.399912 * std::cos(g) + 0.070257 * std::sin(g) -
           0.006758 * std::cos(2 * g) + 0.000907 * std::sin(2 * g) -
           0.002697 * std::cos(3 * g) + 0.00148 * std::sin(3 * g);
}

// lon east-positive, zenith in degrees
inline Result event(double lat_deg, double lon_deg, int year, int month, int day, bool rise,
                    double zenith_deg = 90.833) {
    const double rad = std::numbers::pi / 180.0;
    int jday = sosnet::day_of_year(year, month, day);
    double lat = lat_deg * rad;

    double ut = 12.0 - lon_deg / 15.0;  // solar-noon guess
    Result r;
    for (int iter = 0; iter < 3; ++iter) {
        double g = fractional_year_rad(jday, ut);
        double decl = declination_rad(g);
        double cos_ha =
            (std::cos(zenith_deg * rad) - std::sin(decl) * std::sin(lat)) /
            (std::cos(decl) * std::cos(lat));
        if (cos_ha > 1.0) {
            r.never_rises = true;
            return r;
        }
        if (cos_ha < -1.0) {
            r.never_sets = true;
            return r;
        }
        double ha_deg = std::acos(cos_ha) / rad;
        double eq = eqtime_minutes(g);
        double ut_min = rise ? 720.0 - 4.0 * (lon_deg + ha_deg) - eq
                             : 720.0 - 4.0 * (lon_deg - ha_deg) - eq;
        ut = ut_min / 60.0;
    }
    r.has_event = true;
    r.ut_hours = std::fmod(ut, 24.0);
    if (r.ut_hours < 0) r.ut_hours += 24.0;
    return r;
}

// smallest distance on the 24 h circle
inline double circular_diff_hours(double a, double b) {
    double d = std::fabs(a - b);
    d = std::fmod(d, 24.0);
    return std::min(d, 24.0 - d);
}

}  // namespace solar_oracle
