#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sosnet/catalog.hpp"
#include "sosnet/synth.hpp"

using namespace sosnet;
using namespace sosnet::catalog;
namespace fs = std::filesystem;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmpdir(const std::string& name) {
    std::string d = "tmp_" + name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

const char* kHdr = "id,camera_id,lat,lon,timestamp_utc,label,temperature_c,path\n";

// quick in-memory labeled catalog: n records over n_cams cameras
std::vector<ImageRecord> fake_records(std::size_t n, std::size_t n_cams) {
    std::vector<ImageRecord> recs;
    for (std::size_t i = 0; i < n; ++i) {
        ImageRecord r;
        r.id = "r" + std::to_string(i);
        r.camera_id = "c" + std::to_string(i % n_cams);
        r.geo = solar::GeoPoint(10.0, 20.0);
        r.timestamp_utc = parse_iso8601("2016-06-01T04:30:00Z");
        r.label = (i % 2 == 0) ? Label::Sunrise : Label::Sunset;
        r.path = "x.ppm";
        recs.push_back(r);
    }
    return recs;
}

}  // namespace

TEST_CASE("load_catalog happy path", "[catalog]") {
    std::string d = tmpdir("cat_happy");
    write_file(d + "/c.csv",
               std::string(kHdr) +
                   "a1,cam0,40.9,-74.3,2016-06-01T09:26:00Z,Sunrise,,images/a1.ppm\n"
                   "a2,cam0,40.9,-74.3,2016-06-02T00:31:00Z,Sunset,,images/a2.ppm\n"
                   "a3,cam1,10.0,20.0,2016-06-01T11:00:00Z,,21.5,images/a3.ppm\n");
    LoadResult res = load_catalog(d + "/c.csv");
    REQUIRE(res.records.size() == 3);
    REQUIRE(res.rejected.empty());
    REQUIRE(res.records[0].id == "a1");
    REQUIRE(res.records[0].label.has_value());
    REQUIRE(*res.records[0].label == Label::Sunrise);
    REQUIRE(!res.records[2].label.has_value());
    REQUIRE(res.records[2].temperature_c.has_value());
    REQUIRE(*res.records[2].temperature_c == Catch::Approx(21.5));
    REQUIRE(res.records[1].geo.lon_deg == Catch::Approx(-74.3));
}

TEST_CASE("load_catalog rejects bad rows with line numbers", "[catalog]") {
    std::string d = tmpdir("cat_badrow");
    write_file(d + "/c.csv",
               std::string(kHdr) +
                   "a1,cam0,40.9,-74.3,2016-06-01T09:26:00Z,Sunrise,,a1.ppm\n"
                   "a2,cam0,99.0,-74.3,2016-06-01T09:26:00Z,Sunrise,,a2.ppm\n"
                   "a3,cam0,40.9,-74.3,2016-06-01T09:26:00Z,Sunset,,a3.ppm\n");
    LoadResult res = load_catalog(d + "/c.csv");
    REQUIRE(res.records.size() == 2);
    REQUIRE(res.rejected.size() == 1);
    REQUIRE(res.rejected[0].line_no == 3);
    REQUIRE(res.rejected[0].reason.find("latitude") != std::string::npos);
}

TEST_CASE("load_catalog hard-fails on duplicate ids", "[catalog]") {
    std::string d = tmpdir("cat_dup");
    write_file(d + "/c.csv",
               std::string(kHdr) +
                   "a1,cam0,40.9,-74.3,2016-06-01T09:26:00Z,Sunrise,,a1.ppm\n"
                   "a1,cam1,40.9,-74.3,2016-06-01T09:26:00Z,Sunset,,a2.ppm\n");
    try {
        load_catalog(d + "/c.csv");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        REQUIRE(std::string(e.what()).find("a1") != std::string::npos);
    }
}

TEST_CASE("load_catalog rejects malformed structure", "[catalog]") {
    std::string d = tmpdir("cat_malformed");
    write_file(d + "/empty.csv", "");
    REQUIRE_THROWS_AS(load_catalog(d + "/empty.csv"), DataError);
    write_file(d + "/hdr_only.csv", kHdr);
    REQUIRE_THROWS_AS(load_catalog(d + "/hdr_only.csv"), DataError);
    write_file(d + "/bad_hdr.csv", "id,camera\nx,y\n");
    REQUIRE_THROWS_AS(load_catalog(d + "/bad_hdr.csv"), DataError);
    REQUIRE_THROWS_AS(load_catalog(d + "/missing.csv"), DataError);

    write_file(d + "/short_row.csv", std::string(kHdr) +
                                         "a1,cam0,40.9,-74.3,2016-06-01T09:26:00Z,Sunrise,,p\n"
                                         "a2,cam0,1.0\n");
    LoadResult res = load_catalog(d + "/short_row.csv");
    REQUIRE(res.records.size() == 1);
    REQUIRE(res.rejected.size() == 1);
    REQUIRE(res.rejected[0].reason.find("8 fields") != std::string::npos);
}

TEST_CASE("catalog write/load round trip", "[catalog]") {
    std::string d = tmpdir("cat_roundtrip");
    std::vector<ImageRecord> recs = fake_records(5, 2);
    recs[3].temperature_c = -7.25;
    write_catalog(d + "/c.csv", recs);
    LoadResult res = load_catalog(d + "/c.csv");
    REQUIRE(res.rejected.empty());
    REQUIRE(res.records.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        REQUIRE(res.records[i].id == recs[i].id);
        REQUIRE(res.records[i].camera_id == recs[i].camera_id);
        REQUIRE(res.records[i].geo.lat_deg == Catch::Approx(recs[i].geo.lat_deg));
        REQUIRE(res.records[i].timestamp_utc.iso() == recs[i].timestamp_utc.iso());
        REQUIRE(res.records[i].label == recs[i].label);
        REQUIRE(res.records[i].path == recs[i].path);
    }
    REQUIRE(*res.records[3].temperature_c == Catch::Approx(-7.25));
}

TEST_CASE("split_easy hits the target count exactly", "[catalog][split]") {
    std::vector<ImageRecord> recs = fake_records(12970, 128);
    Split sp = split_easy(recs, 2522.0 / 12970.0, 1);
    REQUIRE(sp.test.size() == 2522);
    REQUIRE(sp.train.size() == 10448);

    std::set<std::string> ids;
    for (const auto& r : sp.train) ids.insert(r.id);
    for (const auto& r : sp.test) REQUIRE(ids.insert(r.id).second);
    REQUIRE(ids.size() == recs.size());
}

TEST_CASE("split_easy determinism and seed sensitivity", "[catalog][split]") {
    std::vector<ImageRecord> recs = fake_records(10, 2);
    Split a = split_easy(recs, 0.2, 0);
    Split b = split_easy(recs, 0.2, 0);
    REQUIRE(a.test.size() == b.test.size());
    for (std::size_t i = 0; i < a.test.size(); ++i) REQUIRE(a.test[i].id == b.test[i].id);
    for (std::size_t i = 0; i < a.train.size(); ++i) REQUIRE(a.train[i].id == b.train[i].id);
}

TEST_CASE("split_easy on 4 records keeps classes or errors", "[catalog][split]") {
    std::vector<ImageRecord> recs = fake_records(4, 1);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        try {
            Split sp = split_easy(recs, 0.5, seed);
            REQUIRE(sp.test.size() == 2);
            REQUIRE(sp.train.size() == 2);
            auto has_both = [](const std::vector<ImageRecord>& v) {
                bool r = false, s = false;
                for (const auto& rec : v) (*rec.label == Label::Sunrise ? r : s) = true;
                return r && s;
            };
            REQUIRE(has_both(sp.train));
            REQUIRE(has_both(sp.test));
        } catch (const DataError&) {
            // degenerate draw: acceptable per contract
        }
    }
}

TEST_CASE("split_easy rejects bad fractions and unlabeled rows", "[catalog][split]") {
    std::vector<ImageRecord> recs = fake_records(10, 2);
    REQUIRE_THROWS_AS(split_easy(recs, 0.0, 0), DataError);
    REQUIRE_THROWS_AS(split_easy(recs, 1.0, 0), DataError);
    recs[0].label.reset();
    REQUIRE_THROWS_AS(split_easy(recs, 0.2, 0), DataError);
}

TEST_CASE("split_hard with counts reproduces the 104/24 camera split", "[catalog][split]") {
    std::vector<ImageRecord> recs = fake_records(12970, 128);
    Split sp = split_hard(recs, 24, 3);
    auto train_cams = distinct_cameras(sp.train);
    auto test_cams = distinct_cameras(sp.test);
    REQUIRE(train_cams.size() == 104);
    REQUIRE(test_cams.size() == 24);
    std::set<std::string> train_set(train_cams.begin(), train_cams.end());
    for (const auto& c : test_cams) REQUIRE(!train_set.count(c));
}

TEST_CASE("split_hard explicit set edge cases", "[catalog][split]") {
    std::vector<ImageRecord> recs = fake_records(40, 5);
    std::set<std::string> all = {"c0", "c1", "c2", "c3", "c4"};
    REQUIRE_THROWS_AS(split_hard(recs, all), DataError);
    REQUIRE_THROWS_AS(split_hard(recs, std::set<std::string>{"nope"}), DataError);
    REQUIRE_THROWS_AS(split_hard(recs, std::set<std::string>{}), DataError);

    Split sp = split_hard(recs, std::set<std::string>{"c2"});
    for (const auto& r : sp.test) REQUIRE(r.camera_id == "c2");
    REQUIRE(sp.train.size() + sp.test.size() == recs.size());
}

TEST_CASE("split_hard seeded disjointness", "[catalog][split]") {
    std::vector<ImageRecord> recs = fake_records(30, 5);
    Split sp = split_hard(recs, 1, 7);
    std::set<std::string> train_ids, test_ids;
    for (const auto& r : sp.train) train_ids.insert(r.id);
    for (const auto& r : sp.test) test_ids.insert(r.id);
    for (const auto& id : test_ids) REQUIRE(!train_ids.count(id));
    REQUIRE(train_ids.size() + test_ids.size() == recs.size());
    auto tc = distinct_cameras(sp.test);
    REQUIRE(tc.size() == 1);
}

TEST_CASE("ppm round trip: black, white, gradient", "[imageio]") {
    std::string d = tmpdir("ppm");
    Tensor black({3, 8, 8});
    imageio::write_ppm(d + "/black.ppm", black);
    Tensor back = imageio::load_image(d + "/black.ppm");
    REQUIRE(back.shape == black.shape);
    for (float v : back.data) REQUIRE(v == 0.0f);

    Tensor white({3, 8, 8});
    for (auto& v : white.data) v = 1.0f;
    imageio::write_ppm(d + "/white.ppm", white);
    back = imageio::load_image(d + "/white.ppm");
    for (float v : back.data) REQUIRE(v == 1.0f);

    // horizontal gradient must survive quantization exactly
    std::size_t w = 16;
    Tensor grad({3, 4, w});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < w; ++x)
                grad.at3(c, y, x) = float(x) / float(w - 1);
    imageio::write_ppm(d + "/grad.ppm", grad);
    back = imageio::load_image(d + "/grad.ppm");
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                float expected =
                    float(std::lround(float(x) / float(w - 1) * 255.0f)) / 255.0f;
                REQUIRE(back.at3(c, y, x) == expected);
                if (x > 0) REQUIRE(back.at3(c, y, x) >= back.at3(c, y, x - 1));
            }
}

TEST_CASE("ppm loader rejects corrupt files", "[imageio]") {
    std::string d = tmpdir("ppm_bad");
    REQUIRE_THROWS_AS(imageio::load_image(d + "/missing.ppm"), DataError);
    write_file(d + "/badmagic.ppm", "P5\n2 2\n255\nxxxx");
    REQUIRE_THROWS_AS(imageio::load_image(d + "/badmagic.ppm"), DataError);
    write_file(d + "/trunc.ppm", "P6\n4 4\n255\nabc");
    REQUIRE_THROWS_AS(imageio::load_image(d + "/trunc.ppm"), DataError);
    write_file(d + "/maxval.ppm", "P6\n1 1\n65535\naaaaaa");
    REQUIRE_THROWS_AS(imageio::load_image(d + "/maxval.ppm"), DataError);
}

TEST_CASE("synthetic catalog: counts and per-day class structure", "[synth]") {
    std::string d = tmpdir("synth_counts");
    synth::SynthConfig cfg;
    cfg.n_cameras = 4;
    cfg.days_per_camera = 3;
    cfg.height = cfg.width = 16;
    cfg.seed = 5;
    synth::SynthResult res = synth::gen_synthetic(cfg, d);
    REQUIRE(res.n_records == 24);

    LoadResult lr = load_catalog(res.catalog_csv);
    REQUIRE(lr.rejected.empty());
    REQUIRE(lr.records.size() == 24);

    int rise = 0, set = 0;
    std::map<std::pair<std::string, long long>, std::pair<int, int>> per_cam_day;
    for (const auto& r : lr.records) {
        REQUIRE(r.label.has_value());
        long long day = solar::local_solar_day(r.geo, r.timestamp_utc.epoch_seconds());
        auto& e = per_cam_day[{r.camera_id, day}];
        if (*r.label == Label::Sunrise) {
            rise++;
            e.first++;
        } else {
            set++;
            e.second++;
        }
    }
    REQUIRE(rise == 12);
    REQUIRE(set == 12);
    REQUIRE(per_cam_day.size() == 12);  // 4 cameras x 3 days
    for (const auto& [key, counts] : per_cam_day) {
        REQUIRE(counts.first == 1);
        REQUIRE(counts.second == 1);
    }
}

TEST_CASE("synthetic labels agree with label_window", "[synth]") {
    std::string d = tmpdir("synth_labels");
    synth::SynthConfig cfg;
    cfg.n_cameras = 6;
    cfg.days_per_camera = 4;
    cfg.height = cfg.width = 16;
    cfg.seed = 11;
    synth::SynthResult res = synth::gen_synthetic(cfg, d);
    LoadResult lr = load_catalog(res.catalog_csv);
    REQUIRE(validate_label_consistency(lr.records).empty());
}

TEST_CASE("synthetic generator is byte-deterministic", "[synth]") {
    synth::SynthConfig cfg;
    cfg.n_cameras = 3;
    cfg.days_per_camera = 2;
    cfg.height = cfg.width = 16;
    cfg.seed = 42;
    std::string d1 = tmpdir("synth_det1"), d2 = tmpdir("synth_det2");
    synth::SynthResult r1 = synth::gen_synthetic(cfg, d1);
    synth::SynthResult r2 = synth::gen_synthetic(cfg, d2);
    REQUIRE(read_bytes(r1.catalog_csv) == read_bytes(r2.catalog_csv));
    LoadResult lr = load_catalog(r1.catalog_csv);
    for (const auto& rec : lr.records)
        REQUIRE(read_bytes(d1 + "/" + rec.path) == read_bytes(d2 + "/" + rec.path));

    synth::SynthConfig other = cfg;
    other.seed = 43;
    std::string d3 = tmpdir("synth_det3");
    synth::SynthResult r3 = synth::gen_synthetic(other, d3);
    REQUIRE(read_bytes(r1.catalog_csv) != read_bytes(r3.catalog_csv));
}

TEST_CASE("synthetic temperature mode", "[synth]") {
    std::string d = tmpdir("synth_temp");
    synth::SynthConfig cfg;
    cfg.n_cameras = 2;
    cfg.days_per_camera = 4;
    cfg.height = cfg.width = 16;
    cfg.temperature_mode = true;
    cfg.nuisance_strength = 0.0;
    cfg.seed = 9;
    synth::SynthResult res = synth::gen_synthetic(cfg, d);
    REQUIRE(res.n_records == 8);
    LoadResult lr = load_catalog(res.catalog_csv);
    for (const auto& r : lr.records) {
        REQUIRE(!r.label.has_value());
        REQUIRE(r.temperature_c.has_value());
        // capture time is 11:00 local solar time, to rounding of one second
        double local_sec = double(r.timestamp_utc.epoch_seconds()) +
                           r.geo.lon_deg / 15.0 * 3600.0;
        double frac = std::fmod(local_sec, 86400.0);
        if (frac < 0) frac += 86400.0;
        REQUIRE(std::fabs(frac - 11.0 * 3600.0) <= 1.0);
    }
    // temperatures must vary across days
    double mn = 1e9, mx = -1e9;
    for (const auto& r : lr.records) {
        mn = std::min(mn, *r.temperature_c);
        mx = std::max(mx, *r.temperature_c);
    }
    REQUIRE(mx - mn > 1.0);
}

TEST_CASE("synthetic config validation", "[synth]") {
    synth::SynthConfig cfg;
    cfg.height = 4;
    REQUIRE_THROWS_AS(cfg.validate(), DataError);
    cfg = synth::SynthConfig{};
    cfg.noise_sigma = -1;
    REQUIRE_THROWS_AS(cfg.validate(), DataError);
    cfg = synth::SynthConfig{};
    cfg.n_cameras = 0;
    REQUIRE_THROWS_AS(cfg.validate(), DataError);
    REQUIRE_NOTHROW(synth::SynthConfig{}.validate());
    synth::SynthConfig zero_cue;
    zero_cue.cue_strength = 0.0;  // legal: the null experiment needs it
    REQUIRE_NOTHROW(zero_cue.validate());
}

TEST_CASE("load_images resolves paths against the catalog dir", "[synth][imageio]") {
    std::string d = tmpdir("synth_load");
    synth::SynthConfig cfg;
    cfg.n_cameras = 2;
    cfg.days_per_camera = 2;
    cfg.height = 12;
    cfg.width = 16;
    cfg.seed = 1;
    synth::SynthResult res = synth::gen_synthetic(cfg, d);
    LoadResult lr = load_catalog(res.catalog_csv);
    ImageMap m = load_images(lr.records, d);
    REQUIRE(m.size() == lr.records.size());
    for (const auto& r : lr.records) {
        const Tensor& img = m.at(r.id);
        REQUIRE(img.shape == std::vector<std::size_t>{3, 12, 16});
        REQUIRE(img.all_finite());
    }
}
