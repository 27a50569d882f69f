#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sosnet/errors.hpp"
#include "sosnet/image_io.hpp"
#include "sosnet/rng.hpp"
#include "sosnet/solar.hpp"
#include "sosnet/timeutil.hpp"

namespace sosnet::catalog {

struct ImageRecord {
    std::string id;
    std::string camera_id;
    solar::GeoPoint geo;
    UtcTime timestamp_utc;
    std::optional<Label> label;
    std::optional<double> temperature_c;
    std::string path;  // relative to the catalog file's directory unless absolute
};

// Label a record from its own geo/timestamp; delegates to the solar module.
inline std::optional<Label> label_window(const ImageRecord& rec, double tolerance_min = 15.0) {
    return solar::label_window(rec.geo, rec.timestamp_utc, tolerance_min);
}

// ids of labeled records whose stored label disagrees with label_window
inline std::vector<std::string> validate_label_consistency(const std::vector<ImageRecord>& recs,
                                                           double tolerance_min = 15.0) {
    std::vector<std::string> bad;
    for (const ImageRecord& r : recs) {
        if (!r.label) continue;
        std::optional<Label> computed = label_window(r, tolerance_min);
        if (!computed || *computed != *r.label) bad.push_back(r.id);
    }
    return bad;
}

// ==========================================================================
// CSV ingestion
// ==========================================================================

inline constexpr const char* kCatalogHeader =
    "id,camera_id,lat,lon,timestamp_utc,label,temperature_c,path";

struct RejectedRow {
    std::size_t line_no;  // 1-based; the header is line 1
    std::string reason;
};

struct LoadResult {
    std::vector<ImageRecord> records;
    std::vector<RejectedRow> rejected;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline bool parse_finite_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size() && std::isfinite(out);
}

// throws DataError with a row-scoped reason; caller converts to a rejection
inline ImageRecord parse_row(const std::vector<std::string>& f) {
    ImageRecord rec;
    if (f[0].empty()) throw DataError("empty id");
    rec.id = f[0];
    if (f[1].empty()) throw DataError("empty camera_id");
    rec.camera_id = f[1];
    double lat, lon;
    if (!parse_finite_double(f[2], lat)) throw DataError("bad lat '" + f[2] + "'");
    if (!parse_finite_double(f[3], lon)) throw DataError("bad lon '" + f[3] + "'");
    rec.geo = solar::GeoPoint(lat, lon);  // range-checked here
    rec.timestamp_utc = parse_iso8601(f[4]);
    if (f[5] == "Sunrise")
        rec.label = Label::Sunrise;
    else if (f[5] == "Sunset")
        rec.label = Label::Sunset;
    else if (!f[5].empty())
        throw DataError("bad label '" + f[5] + "'");
    if (!f[6].empty()) {
        double t;
        if (!parse_finite_double(f[6], t)) throw DataError("bad temperature '" + f[6] + "'");
        rec.temperature_c = t;
    }
    if (f[7].empty()) throw DataError("empty path");
    rec.path = f[7];
    return rec;
}

}  // namespace detail

// All rows parse or land in the rejection report; duplicate ids abort the
// load outright (they poison every downstream id-keyed structure).
inline LoadResult load_catalog(const std::string& metadata_file) {
    std::ifstream in(metadata_file);
    if (!in) throw DataError("cannot open catalog: " + metadata_file);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty catalog file: " + metadata_file);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCatalogHeader)
        throw DataError("bad catalog header in " + metadata_file + ": expected '" +
                        kCatalogHeader + "'");

    LoadResult res;
    std::unordered_set<std::string> ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = detail::split_csv_line(line);
        if (fields.size() != 8) {
            res.rejected.push_back({line_no, "expected 8 fields, got " +
                                                 std::to_string(fields.size())});
            continue;
        }
        ImageRecord rec;
        try {
            rec = detail::parse_row(fields);
        } catch (const DataError& e) {
            res.rejected.push_back({line_no, e.what()});
            continue;
        }
        if (!ids.insert(rec.id).second)
            throw DataError("duplicate id '" + rec.id + "' at line " + std::to_string(line_no) +
                            " of " + metadata_file);
        res.records.push_back(std::move(rec));
    }
    if (res.records.empty())
        throw DataError("catalog has no valid records: " + metadata_file);
    return res;
}

inline void write_catalog(const std::string& metadata_file,
                          const std::vector<ImageRecord>& recs) {
    std::ofstream out(metadata_file);
    if (!out) throw DataError("cannot write catalog: " + metadata_file);
    out << kCatalogHeader << "\n";
    char buf[64];
    for (const ImageRecord& r : recs) {
        out << r.id << "," << r.camera_id << ",";
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.geo.lat_deg, r.geo.lon_deg);
        out << buf << "," << r.timestamp_utc.iso() << ",";
        if (r.label) out << label_name(*r.label);
        out << ",";
        if (r.temperature_c) {
            std::snprintf(buf, sizeof buf, "%.6f", *r.temperature_c);
            out << buf;
        }
        out << "," << r.path << "\n";
    }
    if (!out) throw DataError("short write: " + metadata_file);
}

// ==========================================================================
// Splits
// ==========================================================================

enum class SplitMode { Easy, Hard };

struct Split {
    SplitMode mode = SplitMode::Easy;
    std::vector<ImageRecord> train;
    std::vector<ImageRecord> test;
};

namespace detail {

inline void require_both_classes(const std::vector<ImageRecord>& recs, const char* side) {
    bool rise = false, set = false;
    for (const ImageRecord& r : recs) {
        if (!r.label) throw DataError("unlabeled record in split input: " + r.id);
        (*r.label == Label::Sunrise ? rise : set) = true;
    }
    if (!rise || !set)
        throw DataError(std::string("class missing from ") + side +
                        " side: degenerate evaluation");
}

}  // namespace detail

inline Split split_easy(const std::vector<ImageRecord>& recs, double test_fraction,
                        std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw DataError("test_fraction must be in (0,1)");
    const std::size_t n = recs.size();
    if (n < 2) throw DataError("need at least 2 records to split");
    std::size_t n_test = std::size_t(std::llround(test_fraction * double(n)));
    if (n_test == 0 || n_test >= n)
        throw DataError("test_fraction leaves an empty side");

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng(seed).shuffle(idx);
    std::vector<char> in_test(n, 0);
    for (std::size_t i = 0; i < n_test; ++i) in_test[idx[i]] = 1;

    Split sp;
    sp.mode = SplitMode::Easy;
    for (std::size_t i = 0; i < n; ++i)
        (in_test[i] ? sp.test : sp.train).push_back(recs[i]);
    detail::require_both_classes(sp.train, "train");
    detail::require_both_classes(sp.test, "test");
    return sp;
}

inline std::vector<std::string> distinct_cameras(const std::vector<ImageRecord>& recs) {
    std::set<std::string> s;
    for (const ImageRecord& r : recs) s.insert(r.camera_id);
    return {s.begin(), s.end()};
}

inline Split split_hard(const std::vector<ImageRecord>& recs,
                        const std::set<std::string>& test_cameras) {
    std::vector<std::string> cams = distinct_cameras(recs);
    if (cams.size() < 2) throw DataError("need at least 2 cameras for a hard split");
    if (test_cameras.empty()) throw DataError("empty test camera set");
    for (const std::string& c : test_cameras)
        if (!std::binary_search(cams.begin(), cams.end(), c))
            throw DataError("requested test camera not present: " + c);
    if (test_cameras.size() == cams.size())
        throw DataError("all cameras requested for test: empty train side");

    Split sp;
    sp.mode = SplitMode::Hard;
    for (const ImageRecord& r : recs)
        (test_cameras.count(r.camera_id) ? sp.test : sp.train).push_back(r);
    detail::require_both_classes(sp.train, "train");
    detail::require_both_classes(sp.test, "test");
    return sp;
}

inline Split split_hard(const std::vector<ImageRecord>& recs, std::size_t n_test_cameras,
                        std::uint64_t seed) {
    std::vector<std::string> cams = distinct_cameras(recs);
    if (cams.size() < 2) throw DataError("need at least 2 cameras for a hard split");
    if (n_test_cameras == 0 || n_test_cameras >= cams.size())
        throw DataError("n_test_cameras must be in [1, n_cameras)");
    Rng(seed).shuffle(cams);
    std::set<std::string> test_set(cams.begin(), cams.begin() + long(n_test_cameras));
    return split_hard(recs, test_set);
}

// ==========================================================================
// Pixel access
// ==========================================================================

using ImageMap = std::unordered_map<std::string, Tensor>;

inline std::string resolve_path(const std::string& base_dir, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

// one decode per record id; base_dir is the catalog file's directory
inline ImageMap load_images(const std::vector<ImageRecord>& recs, const std::string& base_dir) {
    ImageMap m;
    m.reserve(recs.size());
    for (const ImageRecord& r : recs)
        if (!m.count(r.id)) m.emplace(r.id, imageio::load_image(resolve_path(base_dir, r.path)));
    return m;
}

}  // namespace sosnet::catalog
