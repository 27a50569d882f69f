#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "sosnet/errors.hpp"
#include "sosnet/timeutil.hpp"

namespace sosnet {

// Class label shared by the whole pipeline: records, pairs, losses.
// Sunrise maps to class index 0, Sunset to 1.
enum class Label { Sunrise, Sunset };

inline int class_index(Label l) { return l == Label::Sunrise ? 0 : 1; }
inline std::string label_name(Label l) { return l == Label::Sunrise ? "Sunrise" : "Sunset"; }

namespace solar {

struct GeoPoint {
    double lat_deg = 0.0;
    double lon_deg = 0.0;  // east positive

    GeoPoint() = default;
    GeoPoint(double lat, double lon) : lat_deg(lat), lon_deg(lon) {
        if (!(std::isfinite(lat) && lat >= -90.0 && lat <= 90.0))
            throw DataError("latitude out of range: " + std::to_string(lat));
        if (!(std::isfinite(lon) && lon >= -180.0 && lon <= 180.0))
            throw DataError("longitude out of range: " + std::to_string(lon));
    }
};

enum class EventKind { Rise, Set };
enum class EventOutcome { At, NeverRises, NeverSets };

struct SolarEvent {
    EventKind kind = EventKind::Rise;
    EventOutcome outcome = EventOutcome::At;
    double utc_hours = 0.0;  // valid iff outcome == At; in [0,24)
};

// zenith of the sun's center at the "official" rise/set (90 deg 50 min)
inline constexpr double kOfficialZenithDeg = 90.833;

namespace detail {

inline double dsin(double deg) { return std::sin(deg * std::numbers::pi / 180.0); }
inline double dcos(double deg) { return std::cos(deg * std::numbers::pi / 180.0); }
inline double dtan(double deg) { return std::tan(deg * std::numbers::pi / 180.0); }
inline double dasin(double x) { return std::asin(x) * 180.0 / std::numbers::pi; }
inline double dacos(double x) { return std::acos(x) * 180.0 / std::numbers::pi; }
inline double datan(double x) { return std::atan(x) * 180.0 / std::numbers::pi; }

inline double wrap360(double deg) {
    double r = std::fmod(deg, 360.0);
    return r < 0 ? r + 360.0 : r;
}

inline double wrap24(double hours) {
    double r = std::fmod(hours, 24.0);
    return r < 0 ? r + 24.0 : r;
}

struct RawEvent {
    bool never = false;
    bool never_rises = false;  // valid iff never
    double ut_raw = 0.0;       // hours from the given date's UTC midnight, un-normalized
};

// Almanac-style computation. ut_raw is NOT wrapped to [0,24): it is anchored
// so that date-midnight-UTC + ut_raw is the absolute instant of the event
// belonging to this local day, which may fall outside the UTC day at large
// |lon|. Anchoring picks the 24 h-periodic representative nearest the
// nominal 06:00/18:00 local mean time; events stay within +-6 h of those.
inline RawEvent solar_event_raw(const GeoPoint& geo, int year, int month, int day,
                                EventKind kind, double zenith_deg) {
    int n = day_of_year(year, month, day);
    double lng_hour = geo.lon_deg / 15.0;
    double t = (kind == EventKind::Rise) ? n + (6.0 - lng_hour) / 24.0
                                         : n + (18.0 - lng_hour) / 24.0;

    double m = 0.9856 * t - 3.289;                                      // mean anomaly
    double l = wrap360(m + 1.916 * dsin(m) + 0.020 * dsin(2 * m) + 282.634);  // true longitude

    double ra = wrap360(datan(0.91764 * dtan(l)));  // right ascension, degrees
    // put RA in the same quadrant as L, then convert to hours
    double l_quadrant = std::floor(l / 90.0) * 90.0;
    double ra_quadrant = std::floor(ra / 90.0) * 90.0;
    ra = (ra + (l_quadrant - ra_quadrant)) / 15.0;

    double sin_dec = 0.39782 * dsin(l);
    double cos_dec = dcos(dasin(sin_dec));

    double cos_h = (dcos(zenith_deg) - sin_dec * dsin(geo.lat_deg)) /
                   (cos_dec * dcos(geo.lat_deg));
    if (cos_h > 1.0) return {true, true, 0.0};    // sun stays below the horizon
    if (cos_h < -1.0) return {true, false, 0.0};  // sun stays above the horizon

    double h = (kind == EventKind::Rise) ? 360.0 - dacos(cos_h) : dacos(cos_h);
    h /= 15.0;

    double mean_t = h + ra - 0.06571 * t - 6.622;
    double ut = mean_t - lng_hour;
    double anchor = (kind == EventKind::Rise ? 6.0 : 18.0) - lng_hour;
    ut += 24.0 * std::round((anchor - ut) / 24.0);
    return {false, false, ut};
}

}  // namespace detail

inline SolarEvent solar_event(const GeoPoint& geo, int year, int month, int day, EventKind kind,
                              double zenith_deg = kOfficialZenithDeg) {
    detail::RawEvent raw = detail::solar_event_raw(geo, year, month, day, kind, zenith_deg);
    SolarEvent ev;
    ev.kind = kind;
    if (raw.never) {
        ev.outcome = raw.never_rises ? EventOutcome::NeverRises : EventOutcome::NeverSets;
        return ev;
    }
    ev.outcome = EventOutcome::At;
    ev.utc_hours = detail::wrap24(raw.ut_raw);
    return ev;
}

// Calendar day index (days since epoch) of the local solar day containing
// the instant; local time = UTC + lon/15 hours, no political time zones.
inline long long local_solar_day(const GeoPoint& geo, long long epoch_sec) {
    double local_sec = double(epoch_sec) + geo.lon_deg / 15.0 * 3600.0;
    return (long long)std::floor(local_sec / 86400.0);
}

// Label iff the timestamp is within tolerance of exactly one of the local
// day's two events; Never* days and ambiguous/far timestamps yield nothing.
inline std::optional<Label> label_window(const GeoPoint& geo, const UtcTime& timestamp_utc,
                                         double tolerance_min = 15.0,
                                         double zenith_deg = kOfficialZenithDeg) {
    long long t = timestamp_utc.epoch_seconds();
    long long day_idx = local_solar_day(geo, t);
    int y, m, d;
    civil_from_days(day_idx, y, m, d);

    auto instant_of = [&](EventKind kind) -> std::optional<double> {
        detail::RawEvent raw = detail::solar_event_raw(geo, y, m, d, kind, zenith_deg);
        if (raw.never) return std::nullopt;
        return double(day_idx) * 86400.0 + raw.ut_raw * 3600.0;
    };

    std::optional<double> rise = instant_of(EventKind::Rise);
    std::optional<double> set = instant_of(EventKind::Set);
    double tol_sec = tolerance_min * 60.0;

    bool near_rise = rise && std::abs(double(t) - *rise) <= tol_sec;
    bool near_set = set && std::abs(double(t) - *set) <= tol_sec;
    if (near_rise == near_set) return std::nullopt;
    return near_rise ? Label::Sunrise : Label::Sunset;
}

}  // namespace solar
}  // namespace sosnet
