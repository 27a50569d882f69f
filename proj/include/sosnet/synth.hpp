#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "sosnet/catalog.hpp"
#include "sosnet/errors.hpp"
#include "sosnet/image_io.hpp"
#include "sosnet/rng.hpp"
#include "sosnet/solar.hpp"

namespace sosnet::synth {

// Desk-scale stand-in for the webcam corpus. Classification mode emits one
// Sunrise and one Sunset frame per (camera, day) whose timestamps sit at the
// camera's computed solar events; temperature mode emits one 11:00-local
// frame per day whose temperature is affine in a latent warmth.
struct SynthConfig {
    int n_cameras = 8;
    int days_per_camera = 20;
    // 16x16 is deliberate: four 2x pools then leave a 1x1 map, so the global
    // average pool is the identity and the final conv block's asymmetric taps
    // pass the cue's left/right polarity into the embedding first-order.
    // Spatial averaging over a wider final map cancels mirrored patterns and
    // buries the cue 1-2 orders below what the documented schedule can reach.
    int height = 16;
    int width = 16;
    double cue_strength = 0.15;       // class-discriminative luminance ramp
    double nuisance_strength = 1.5;   // per-camera texture/bias amplitude, 10x cue
    double noise_sigma = 0.02;        // i.i.d. pixel noise
    std::uint64_t seed = 0;

    bool temperature_mode = false;
    double temp_gain = 20.0;    // degrees per unit warmth
    double temp_offset = 10.0;  // degrees at warmth 0
    double temp_noise = 0.0;    // measurement noise, degrees

    void validate() const {
        if (n_cameras < 1 || days_per_camera < 1)
            throw DataError("synth: need at least 1 camera and 1 day");
        if (height < 8 || width < 8) throw DataError("synth: image dims must be >= 8");
        if (cue_strength < 0 || nuisance_strength < 0 || noise_sigma < 0)
            throw DataError("synth: strengths must be >= 0");
    }
};

namespace detail {

// Per-camera nuisance: a color bias, a random luminance plane (a direct ramp
// confound), and low-frequency cosine textures from a shared small basis. All
// scales are relative to nuisance_strength. The slope scale keeps the ramp
// confound below the class cue at the default 10x nuisance:cue ratio so the
// cue stays identifiable per camera, while bias and modes dominate raw pixel
// statistics.
inline constexpr double kBiasScale = 0.20;
inline constexpr double kSlopeScale = 0.03;
inline constexpr double kModeScale = 0.22;

// Monotone left-to-right brightening profile, normalized to [-1/2, +1/2].
// The central transition matters: a zero-mean profile is invisible to global
// average pooling except through its conv edge response, and a pure linear
// ramp has no edge, leaving its visibility to the luck of per-camera mask
// asymmetries. tanh(6*rx) concentrates the gradient mid-image.
inline double cue_profile(double rx) { return 0.5 * std::tanh(6.0 * rx) / std::tanh(3.0); }
inline constexpr int kNModes = 3;

struct CamNuisance {
    double bias[3];
    double slope_x[3];
    double slope_y[3];
    struct Mode {
        double amp[3];
        double fx, fy, phase;
    } modes[kNModes];

    double value(int c, double ry, double rx, double yfrac, double xfrac) const {
        double v = bias[c] + slope_x[c] * rx + slope_y[c] * ry;
        for (const Mode& m : modes)
            v += m.amp[c] *
                 std::cos(2.0 * std::numbers::pi * (m.fx * xfrac + m.fy * yfrac) + m.phase);
        return v;
    }
};

inline CamNuisance draw_nuisance(Rng& rng, double strength) {
    CamNuisance n;
    for (int c = 0; c < 3; ++c) n.bias[c] = kBiasScale * strength * rng.normal();
    for (int c = 0; c < 3; ++c) n.slope_x[c] = kSlopeScale * strength * rng.normal();
    for (int c = 0; c < 3; ++c) n.slope_y[c] = kSlopeScale * strength * rng.normal();
    for (auto& m : n.modes) {
        do {
            m.fx = double(rng.below(3));
            m.fy = double(rng.below(3));
        } while (m.fx == 0.0 && m.fy == 0.0);
        m.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (int c = 0; c < 3; ++c) m.amp[c] = kModeScale * strength * rng.normal();
    }
    return n;
}

inline Tensor render(const SynthConfig& cfg, const CamNuisance& nui, double base,
                     double cue_dir, double warmth_term, Rng& noise) {
    const int h = cfg.height, w = cfg.width;
    Tensor img({3, std::size_t(h), std::size_t(w)});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y) {
            double yfrac = double(y) / h;
            double ry = double(y) / (h - 1) - 0.5;
            for (int x = 0; x < w; ++x) {
                double xfrac = double(x) / w;
                double rx = double(x) / (w - 1) - 0.5;
                double v = base + warmth_term + cue_dir * cfg.cue_strength * cue_profile(rx) +
                           nui.value(c, ry, rx, yfrac, xfrac) +
                           cfg.noise_sigma * noise.normal();
                img.at3(std::size_t(c), std::size_t(y), std::size_t(x)) =
                    float(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
            }
        }
    return img;
}

inline std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (int(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace detail

struct SynthResult {
    std::string catalog_csv;
    std::size_t n_records = 0;
};

inline SynthResult gen_synthetic(const SynthConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "images");

    const long long start_day = days_from_civil(2016, 6, 1);
    Rng root(cfg.seed);
    std::vector<catalog::ImageRecord> records;

    for (int cam = 0; cam < cfg.n_cameras; ++cam) {
        Rng cam_rng = root.child(std::uint64_t(cam));
        // keep |lat| moderate so every day has both events
        double lat = cam_rng.uniform(-55.0, 55.0);
        double lon = cam_rng.uniform(-170.0, 170.0);
        solar::GeoPoint geo(lat, lon);
        detail::CamNuisance nui = detail::draw_nuisance(cam_rng, cfg.nuisance_strength);
        double cam_temp_offset = 5.0 * cfg.nuisance_strength * cam_rng.normal();
        std::string cam_id = "cam" + detail::zero_pad(cam, 3);

        for (int day = 0; day < cfg.days_per_camera; ++day) {
            long long day_idx = start_day + day;
            int y, m, d;
            civil_from_days(day_idx, y, m, d);

            if (cfg.temperature_mode) {
                Rng wstream = cam_rng.child(40000u + std::uint64_t(day));
                double warmth = wstream.uniform();
                double temp = cfg.temp_gain * warmth + cfg.temp_offset + cam_temp_offset +
                              cfg.temp_noise * wstream.normal();
                Rng noise = cam_rng.child(100000u + std::uint64_t(day) * 8u);
                Tensor img = detail::render(cfg, nui, 0.35, 0.0, 0.3 * warmth, noise);

                catalog::ImageRecord rec;
                rec.id = cam_id + "_d" + detail::zero_pad(day, 3) + "_tmp";
                rec.camera_id = cam_id;
                rec.geo = geo;
                long long t = day_idx * 86400LL +
                              (long long)std::llround((11.0 - lon / 15.0) * 3600.0);
                rec.timestamp_utc = UtcTime::from_epoch_seconds(t);
                rec.temperature_c = temp;
                rec.path = "images/" + rec.id + ".ppm";
                imageio::write_ppm(catalog::resolve_path(out_dir, rec.path), img);
                records.push_back(std::move(rec));
                continue;
            }

            for (int k = 0; k < 2; ++k) {
                Label lbl = (k == 0) ? Label::Sunrise : Label::Sunset;
                auto kind = (k == 0) ? solar::EventKind::Rise : solar::EventKind::Set;
                auto raw = solar::detail::solar_event_raw(geo, y, m, d, kind,
                                                          solar::kOfficialZenithDeg);
                if (raw.never)
                    throw NumericError("synth: unexpected polar day at lat " +
                                       std::to_string(lat));
                Rng tstream = cam_rng.child(200000u + std::uint64_t(day) * 8u + std::uint64_t(k));
                long long jitter = (long long)std::llround(tstream.uniform(-300.0, 300.0));
                long long t = day_idx * 86400LL +
                              (long long)std::llround(raw.ut_raw * 3600.0) + jitter;

                Rng noise = cam_rng.child(100000u + std::uint64_t(day) * 8u + std::uint64_t(k));
                double dir = (k == 0) ? 1.0 : -1.0;  // sunrise brightens left-to-right
                Tensor img = detail::render(cfg, nui, 0.5, dir, 0.0, noise);

                catalog::ImageRecord rec;
                rec.id = cam_id + "_d" + detail::zero_pad(day, 3) + (k == 0 ? "_sr" : "_ss");
                rec.camera_id = cam_id;
                rec.geo = geo;
                rec.timestamp_utc = UtcTime::from_epoch_seconds(t);
                rec.label = lbl;
                rec.path = "images/" + rec.id + ".ppm";
                imageio::write_ppm(catalog::resolve_path(out_dir, rec.path), img);
                records.push_back(std::move(rec));
            }
        }
    }

    SynthResult res;
    res.catalog_csv = (fs::path(out_dir) / "catalog.csv").string();
    res.n_records = records.size();
    catalog::write_catalog(res.catalog_csv, records);
    return res;
}

}  // namespace sosnet::synth
