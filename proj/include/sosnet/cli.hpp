#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sosnet/catalog.hpp"
#include "sosnet/engine.hpp"
#include "sosnet/errors.hpp"
#include "sosnet/image_io.hpp"
#include "sosnet/network.hpp"
#include "sosnet/pairing.hpp"
#include "sosnet/solar.hpp"
#include "sosnet/synth.hpp"

// Command-line surface. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 numeric failure. Resolved config and seed go to stderr; stdout carries
// only stable line-oriented results.
namespace sosnet::cli {

namespace detail {

inline std::string fmt(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

inline std::string fmt_sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// "HH:MM UT", minutes rounded, wrapping 24:00 to 00:00
inline std::string fmt_event_time(double utc_hours) {
    long long mins = (long long)std::llround(utc_hours * 60.0) % 1440;
    if (mins < 0) mins += 1440;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld UT", mins / 60, mins % 60);
    return buf;
}

inline void parse_date(const std::string& s, int& y, int& m, int& d) {
    char trail = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c", &y, &m, &d, &trail) != 3)
        throw DataError("invalid date, expected YYYY-MM-DD: " + s);
    int ry, rm, rd;
    civil_from_days(days_from_civil(y, m, d), ry, rm, rd);
    if (ry != y || rm != m || rd != d)
        throw DataError("invalid calendar date: " + s);
}

inline std::vector<std::string> read_id_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open id file: " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

inline std::vector<catalog::ImageRecord> filter_by_ids(
    const std::vector<catalog::ImageRecord>& recs, const std::vector<std::string>& ids) {
    std::unordered_map<std::string, const catalog::ImageRecord*> by_id;
    for (const auto& r : recs) by_id.emplace(r.id, &r);
    std::vector<catalog::ImageRecord> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("id not in catalog: " + id);
        out.push_back(*it->second);
    }
    return out;
}

inline catalog::LoadResult load_catalog_logged(const std::string& path, std::ostream& err) {
    catalog::LoadResult res = catalog::load_catalog(path);
    if (!res.rejected.empty())
        err << "warning: " << res.rejected.size() << " rejected catalog rows\n";
    return res;
}

inline std::string default_images_dir(const std::string& catalog_path) {
    std::string dir = std::filesystem::path(catalog_path).parent_path().string();
    return dir.empty() ? std::string(".") : dir;
}

// arch for training runs: defaults except dims, which follow the data
inline network::ArchConfig arch_for(const catalog::ImageMap& images, int embed_dim,
                                    int head1_width) {
    if (images.empty()) throw DataError("no images loaded");
    const Tensor& first = images.begin()->second;
    if (first.shape.size() != 3) throw DataError("images must be 3-d (c,h,w)");
    network::ArchConfig arch;
    arch.in_ch = int(first.shape[0]);
    arch.in_h = int(first.shape[1]);
    arch.in_w = int(first.shape[2]);
    arch.embed_dim = embed_dim;
    arch.head1_width = head1_width;
    arch.validate();
    return arch;
}

inline void write_history(const std::string& path, const std::vector<double>& losses,
                          const engine::TrainConfig& cfg) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write history file: " + path);
    for (std::size_t e = 0; e < losses.size(); ++e)
        f << "epoch=" << e << " loss=" << fmt(losses[e], 8) << " lr="
          << fmt_sci(engine::lr_at(int(e), cfg.epochs, cfg.lr_start, cfg.lr_end)) << "\n";
}

inline void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write file: " + path);
    f << body;
}

inline network::LossKind parse_loss_kind(const std::string& s) {
    if (s == "combined") return network::LossKind::Combined;
    if (s == "contrast") return network::LossKind::Contrast;
    if (s == "contrast-softmax") return network::LossKind::ContrastSoftmax;
    if (s == "softmax") return network::LossKind::SoftmaxOnly;
    if (s == "square") return network::LossKind::Square;
    throw DataError("unknown loss kind: " + s);
}

// CLI11 only processes config files on the root app, so flat per-subcommand
// key=value files are expanded into --key=value tokens before parsing. A key
// already present as a command-line flag is skipped: explicit flags win.
inline void inject_config(std::vector<std::string>& args) {
    std::string path;
    std::size_t insert_at = 0;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            insert_at = i + 2;
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            insert_at = i + 1;
            break;
        }
    }
    if (path.empty()) return;

    std::ifstream in(path);
    if (!in) throw CLI::FileError::Missing(path);

    auto given = [&args](const std::string& key) {
        std::string flag = "--" + key;
        for (const std::string& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };

    std::vector<std::string> extra;
    std::set<std::string> seen;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        std::size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        std::size_t eq = line.find('=', b);
        if (eq == std::string::npos)
            throw CLI::FileError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(b, eq - b);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        std::string val = line.substr(eq + 1);
        std::size_t vb = val.find_first_not_of(" \t");
        std::size_t ve = val.find_last_not_of(" \t\r");
        val = vb == std::string::npos ? "" : val.substr(vb, ve - vb + 1);
        if (key.empty() || key == "config")
            throw CLI::FileError(path + ":" + std::to_string(lineno) + ": bad key");
        if (!seen.insert(key).second)
            throw CLI::FileError(path + ":" + std::to_string(lineno) + ": duplicate key " + key);
        if (!given(key)) extra.push_back("--" + key + "=" + val);
    }
    args.insert(args.begin() + std::ptrdiff_t(insert_at), extra.begin(), extra.end());
}

}  // namespace detail

// Everything below parses `args` (no program name, natural order) and runs
// one subcommand, writing results to `out` and diagnostics to `err`.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"selective-pair comparison learning toolkit"};
    app.require_subcommand(1);

    // ---- solar ----------------------------------------------------------
    struct {
        double lat = 0.0, lon = 0.0;
        std::string date, kind = "rise", zenith = "official";
    } so;
    CLI::App* solar_cmd = app.add_subcommand("solar", "compute a sunrise/sunset time");
    solar_cmd->add_option("--lat", so.lat, "latitude, degrees north")->required();
    solar_cmd->add_option("--lon", so.lon, "longitude, degrees east")->required();
    solar_cmd->add_option("--date", so.date, "calendar date YYYY-MM-DD")->required();
    solar_cmd->add_option("--kind", so.kind, "event kind")
        ->check(CLI::IsMember({"rise", "set"}))
        ->capture_default_str();
    solar_cmd->add_option("--zenith", so.zenith, "zenith convention")
        ->check(CLI::IsMember({"official", "civil"}))
        ->capture_default_str();

    // ---- synth ----------------------------------------------------------
    struct {
        std::string out_dir;
        synth::SynthConfig cfg;
    } sy;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic webcam corpus");
    synth_cmd->add_option("--out", sy.out_dir, "output directory")->required();
    synth_cmd->add_option("--cameras", sy.cfg.n_cameras, "number of cameras")
        ->capture_default_str();
    synth_cmd->add_option("--days", sy.cfg.days_per_camera, "days per camera")
        ->capture_default_str();
    synth_cmd->add_option("--height", sy.cfg.height, "image height")->capture_default_str();
    synth_cmd->add_option("--width", sy.cfg.width, "image width")->capture_default_str();
    synth_cmd->add_option("--cue", sy.cfg.cue_strength, "class cue amplitude")
        ->capture_default_str();
    synth_cmd->add_option("--nuisance", sy.cfg.nuisance_strength, "per-camera nuisance amplitude")
        ->capture_default_str();
    synth_cmd->add_option("--noise", sy.cfg.noise_sigma, "i.i.d. pixel noise sigma")
        ->capture_default_str();
    synth_cmd->add_option("--seed", sy.cfg.seed, "generator seed")->capture_default_str();
    synth_cmd->add_flag("--temperature", sy.cfg.temperature_mode,
                        "emit one 11:00-local frame per day with temperatures");
    synth_cmd->add_option("--temp-gain", sy.cfg.temp_gain, "degrees per unit warmth")
        ->capture_default_str();
    synth_cmd->add_option("--temp-offset", sy.cfg.temp_offset, "degrees at warmth 0")
        ->capture_default_str();
    synth_cmd->add_option("--temp-noise", sy.cfg.temp_noise, "temperature noise, degrees")
        ->capture_default_str();

    // ---- split ----------------------------------------------------------
    struct {
        std::string catalog_path, mode = "hard";
        double test_fraction = 2522.0 / 12970.0;
        std::size_t holdout_cameras = 2;
        std::vector<std::string> test_cameras;
        std::uint64_t seed = 0;
        std::string out_train, out_test;
    } sp;
    CLI::App* split_cmd = app.add_subcommand("split", "split a catalog into train/test");
    split_cmd->add_option("--catalog", sp.catalog_path, "catalog csv")->required();
    split_cmd->add_option("--mode", sp.mode, "easy = random by record, hard = camera-disjoint")
        ->check(CLI::IsMember({"easy", "hard"}))
        ->capture_default_str();
    split_cmd->add_option("--test-fraction", sp.test_fraction, "easy mode: test fraction")
        ->capture_default_str();
    split_cmd
        ->add_option("--holdout-cameras", sp.holdout_cameras,
                     "hard mode: number of held-out cameras")
        ->capture_default_str();
    split_cmd->add_option("--test-cameras", sp.test_cameras,
                          "hard mode: explicit held-out camera ids (overrides --holdout-cameras)");
    split_cmd->add_option("--seed", sp.seed, "split seed")->capture_default_str();
    split_cmd->add_option("--out-train", sp.out_train, "write train ids to this file");
    split_cmd->add_option("--out-test", sp.out_test, "write test ids to this file");

    // ---- pairs ----------------------------------------------------------
    struct {
        std::string catalog_path, ids_file;
        bool ss = false, same_camera = false, same_day = false;
        std::size_t max_pairs = 0;
        std::uint64_t seed = 0;
    } pr;
    CLI::App* pairs_cmd = app.add_subcommand("pairs", "enumerate training pairs");
    pairs_cmd->add_option("--catalog", pr.catalog_path, "catalog csv")->required();
    pairs_cmd->add_option("--ids", pr.ids_file, "restrict to ids listed in this file");
    pairs_cmd->add_flag("--ss", pr.ss, "require one sunrise + one sunset");
    pairs_cmd->add_flag("--same-camera", pr.same_camera, "require the same camera");
    pairs_cmd->add_flag("--same-day", pr.same_day, "require the same local solar day");
    pairs_cmd->add_option("--max-pairs", pr.max_pairs, "seeded subsample cap, 0 = all")
        ->capture_default_str();
    pairs_cmd->add_option("--seed", pr.seed, "subsample seed")->capture_default_str();

    // ---- train ----------------------------------------------------------
    struct {
        std::string catalog_path, images_dir, out_ckpt, train_ids, history, model = "sosnet";
        std::string loss;  // empty = from model preset
        std::string json_path;
        bool ss = false, same_camera = false, same_day = false;
        engine::TrainConfig cfg;
        int embed_dim = 256;
    } tr;
    CLI::App* train_cmd = app.add_subcommand("train", "train a classification model");
    train_cmd->add_option("--catalog", tr.catalog_path, "catalog csv")->required();
    train_cmd->add_option("--images", tr.images_dir, "image base dir (default: catalog dir)");
    train_cmd->add_option("--out", tr.out_ckpt, "checkpoint output path")->required();
    train_cmd->add_option("--train-ids", tr.train_ids, "restrict to ids listed in this file");
    train_cmd->add_option("--history", tr.history,
                          "write per-epoch loss/lr as key=value lines to this file");
    train_cmd->add_option("--json", tr.json_path, "also write a run summary as json");
    train_cmd
        ->add_option("--model", tr.model,
                     "preset: sosnet = combined loss on same-camera same-day sunrise/sunset "
                     "pairs; sosnet-rand = combined loss on random sunrise/sunset pairs; "
                     "single = softmax only; siamese = contrast loss on random pairs, "
                     "classifier head fit on frozen embeddings afterwards")
        ->check(CLI::IsMember({"sosnet", "sosnet-rand", "single", "siamese"}))
        ->capture_default_str();
    train_cmd
        ->add_option("--loss", tr.loss,
                     "override the preset loss: combined, contrast, contrast-softmax, softmax")
        ->check(CLI::IsMember({"combined", "contrast", "contrast-softmax", "softmax"}));
    train_cmd->add_flag("--pair-ss", tr.ss, "override constraints: one sunrise + one sunset");
    train_cmd->add_flag("--pair-same-camera", tr.same_camera,
                        "override constraints: same camera");
    train_cmd->add_flag("--pair-same-day", tr.same_day,
                        "override constraints: same local solar day");
    train_cmd->add_option("--lambda", tr.cfg.loss.lambda, "pair-term weight")
        ->capture_default_str();
    train_cmd->add_option("--margin", tr.cfg.loss.margin, "contrast margin")
        ->capture_default_str();
    train_cmd->add_option("--epochs", tr.cfg.epochs, "training epochs")->capture_default_str();
    train_cmd->add_option("--batch-pairs", tr.cfg.batch_pairs, "pairs per batch")
        ->capture_default_str();
    train_cmd->add_option("--lr-start", tr.cfg.lr_start, "first-epoch learning rate")
        ->capture_default_str();
    train_cmd->add_option("--lr-end", tr.cfg.lr_end, "last-epoch learning rate")
        ->capture_default_str();
    train_cmd->add_option("--momentum", tr.cfg.momentum, "sgd momentum")->capture_default_str();
    train_cmd->add_option("--max-pairs", tr.cfg.max_pairs, "pair budget cap, 0 = all")
        ->capture_default_str();
    train_cmd->add_option("--embed-dim", tr.embed_dim, "embedding width")->capture_default_str();
    train_cmd->add_option("--seed", tr.cfg.seed, "training seed")->capture_default_str();

    // ---- eval -----------------------------------------------------------
    struct {
        std::string catalog_path, images_dir, ckpt, ids_file, json_path;
    } ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (per-class accuracy)");
    eval_cmd->add_option("--catalog", ev.catalog_path, "catalog csv")->required();
    eval_cmd->add_option("--images", ev.images_dir, "image base dir (default: catalog dir)");
    eval_cmd->add_option("--ckpt", ev.ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--ids", ev.ids_file, "restrict to ids listed in this file");
    eval_cmd->add_option("--json", ev.json_path, "also write the report as json");

    // ---- predict --------------------------------------------------------
    struct {
        std::string catalog_path, images_dir, ckpt, ids_file;
        std::vector<std::string> image_files;
    } pd;
    CLI::App* predict_cmd = app.add_subcommand("predict", "label images with a checkpoint");
    predict_cmd->add_option("--ckpt", pd.ckpt, "checkpoint path")->required();
    predict_cmd->add_option("--catalog", pd.catalog_path, "catalog csv");
    predict_cmd->add_option("--images", pd.images_dir, "image base dir (default: catalog dir)");
    predict_cmd->add_option("--ids", pd.ids_file, "restrict to ids listed in this file");
    predict_cmd->add_option("--image", pd.image_files, "predict these ppm files instead");

    // ---- temp-train -----------------------------------------------------
    struct {
        std::string catalog_path, images_dir, out_ckpt, out_model, feature_layer = "mid-conv";
        engine::RegressionConfig cfg;
        int embed_dim = 256;
    } tt;
    CLI::App* ttrain_cmd =
        app.add_subcommand("temp-train", "train the temperature-regression pipeline");
    ttrain_cmd->add_option("--catalog", tt.catalog_path, "catalog csv")->required();
    ttrain_cmd->add_option("--images", tt.images_dir, "image base dir (default: catalog dir)");
    ttrain_cmd->add_option("--out-ckpt", tt.out_ckpt, "stage-1 checkpoint output path")
        ->required();
    ttrain_cmd->add_option("--out-model", tt.out_model, "regression model json output path")
        ->required();
    ttrain_cmd
        ->add_option("--feature-layer", tt.feature_layer, "stage-2 features: mid-conv, embedding")
        ->check(CLI::IsMember({"mid-conv", "embedding"}))
        ->capture_default_str();
    ttrain_cmd->add_option("--ridge", tt.cfg.ridge, "stage-2 ridge strength")
        ->capture_default_str();
    ttrain_cmd->add_option("--epochs", tt.cfg.stage1.epochs, "stage-1 epochs")
        ->capture_default_str();
    ttrain_cmd->add_option("--batch-pairs", tt.cfg.stage1.batch_pairs, "stage-1 pairs per batch")
        ->capture_default_str();
    ttrain_cmd->add_option("--lr-start", tt.cfg.stage1.lr_start, "stage-1 first-epoch lr")
        ->capture_default_str();
    ttrain_cmd->add_option("--lr-end", tt.cfg.stage1.lr_end, "stage-1 last-epoch lr")
        ->capture_default_str();
    ttrain_cmd->add_option("--max-pairs", tt.cfg.stage1.max_pairs, "stage-1 pair budget cap")
        ->capture_default_str();
    ttrain_cmd->add_option("--embed-dim", tt.embed_dim, "embedding width")
        ->capture_default_str();
    ttrain_cmd->add_option("--seed", tt.cfg.stage1.seed, "training seed")->capture_default_str();

    // ---- temp-eval ------------------------------------------------------
    struct {
        std::string catalog_path, images_dir, ckpt, model_json, ids_file;
    } te;
    CLI::App* teval_cmd = app.add_subcommand("temp-eval", "evaluate a regression model");
    teval_cmd->add_option("--catalog", te.catalog_path, "catalog csv")->required();
    teval_cmd->add_option("--images", te.images_dir, "image base dir (default: catalog dir)");
    teval_cmd->add_option("--ckpt", te.ckpt, "stage-1 checkpoint path")->required();
    teval_cmd->add_option("--model", te.model_json, "regression model json path")->required();
    teval_cmd->add_option("--ids", te.ids_file, "restrict to ids listed in this file");

    // ---- gradcheck ------------------------------------------------------
    struct {
        std::string loss = "combined";
        double eps = 1e-4;
        int coords = 200;
        std::uint64_t seed = 0;
    } gc;
    CLI::App* grad_cmd =
        app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
    grad_cmd
        ->add_option("--loss", gc.loss,
                     "loss to check: combined, contrast, contrast-softmax, softmax, square")
        ->check(CLI::IsMember({"combined", "contrast", "contrast-softmax", "softmax", "square"}))
        ->capture_default_str();
    grad_cmd->add_option("--eps", gc.eps, "central-difference step")->capture_default_str();
    grad_cmd->add_option("--coords", gc.coords, "minimum coordinates checked")
        ->capture_default_str();
    grad_cmd->add_option("--seed", gc.seed, "batch/params seed")->capture_default_str();

    for (CLI::App* sub : app.get_subcommands(nullptr))
        sub->add_option("--config")->description("read flags from a key=value config file");

    try {
        detail::inject_config(args);
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));

        if (solar_cmd->parsed()) {
            int y, m, d;
            detail::parse_date(so.date, y, m, d);
            double zen = so.zenith == "civil" ? 96.0 : solar::kOfficialZenithDeg;
            auto kind = so.kind == "rise" ? solar::EventKind::Rise : solar::EventKind::Set;
            err << "config solar: lat=" << detail::fmt_sci(so.lat)
                << " lon=" << detail::fmt_sci(so.lon) << " date=" << so.date
                << " kind=" << so.kind << " zenith=" << so.zenith << "\n";
            solar::GeoPoint geo(so.lat, so.lon);
            solar::SolarEvent evn = solar::solar_event(geo, y, m, d, kind, zen);
            if (evn.outcome == solar::EventOutcome::NeverRises)
                out << "never-rises\n";
            else if (evn.outcome == solar::EventOutcome::NeverSets)
                out << "never-sets\n";
            else
                out << detail::fmt_event_time(evn.utc_hours) << "\n";
            return 0;
        }

        if (synth_cmd->parsed()) {
            err << "config synth: cameras=" << sy.cfg.n_cameras
                << " days=" << sy.cfg.days_per_camera << " hw=" << sy.cfg.height << "x"
                << sy.cfg.width << " cue=" << detail::fmt_sci(sy.cfg.cue_strength)
                << " nuisance=" << detail::fmt_sci(sy.cfg.nuisance_strength)
                << " noise=" << detail::fmt_sci(sy.cfg.noise_sigma)
                << " temperature=" << (sy.cfg.temperature_mode ? 1 : 0)
                << " seed=" << sy.cfg.seed << "\n";
            synth::SynthResult res = synth::gen_synthetic(sy.cfg, sy.out_dir);
            out << "catalog " << res.catalog_csv << "\n";
            out << "records " << res.n_records << "\n";
            return 0;
        }

        if (split_cmd->parsed()) {
            err << "config split: catalog=" << sp.catalog_path << " mode=" << sp.mode
                << (sp.mode == "easy"
                        ? " test_fraction=" + detail::fmt_sci(sp.test_fraction)
                        : " holdout_cameras=" + std::to_string(sp.holdout_cameras))
                << " seed=" << sp.seed << "\n";
            auto loaded = detail::load_catalog_logged(sp.catalog_path, err);
            catalog::Split split;
            if (sp.mode == "easy") {
                split = catalog::split_easy(loaded.records, sp.test_fraction, sp.seed);
            } else if (!sp.test_cameras.empty()) {
                split = catalog::split_hard(
                    loaded.records,
                    std::set<std::string>(sp.test_cameras.begin(), sp.test_cameras.end()));
            } else {
                split = catalog::split_hard(loaded.records, sp.holdout_cameras, sp.seed);
            }
            std::string train_ids, test_ids;
            for (const auto& r : split.train) train_ids += r.id + "\n";
            for (const auto& r : split.test) test_ids += r.id + "\n";
            for (const auto& r : split.train) out << "train\t" << r.id << "\n";
            for (const auto& r : split.test) out << "test\t" << r.id << "\n";
            if (!sp.out_train.empty()) detail::write_text(sp.out_train, train_ids);
            if (!sp.out_test.empty()) detail::write_text(sp.out_test, test_ids);
            err << "train " << split.train.size() << " test " << split.test.size() << "\n";
            return 0;
        }

        if (pairs_cmd->parsed()) {
            pairing::PairConstraint c{pr.ss, pr.same_camera, pr.same_day};
            err << "config pairs: catalog=" << pr.catalog_path << " constraint=" << c.str()
                << " max_pairs=" << pr.max_pairs << " seed=" << pr.seed << "\n";
            auto loaded = detail::load_catalog_logged(pr.catalog_path, err);
            std::vector<catalog::ImageRecord> recs = loaded.records;
            if (!pr.ids_file.empty())
                recs = detail::filter_by_ids(recs, detail::read_id_file(pr.ids_file));
            std::vector<pairing::Pair> ps =
                pr.max_pairs > 0 ? pairing::enumerate_pairs_capped(recs, c, pr.max_pairs, pr.seed)
                                 : pairing::enumerate_pairs(recs, c);
            for (const auto& p : ps) out << p.x_r.id << "\t" << p.x_s.id << "\n";
            err << "pairs " << ps.size() << "\n";
            return 0;
        }

        if (train_cmd->parsed()) {
            // preset, then explicit overrides
            if (tr.model == "sosnet") {
                tr.cfg.loss.kind = network::LossKind::Combined;
                tr.cfg.constraint = {true, true, true};
            } else if (tr.model == "sosnet-rand") {
                tr.cfg.loss.kind = network::LossKind::Combined;
                tr.cfg.constraint = {true, false, false};
            } else if (tr.model == "single") {
                tr.cfg.loss.kind = network::LossKind::SoftmaxOnly;
                tr.cfg.constraint = {false, false, false};
            } else {  // siamese
                tr.cfg.loss.kind = network::LossKind::Contrast;
                tr.cfg.constraint = {false, false, false};
            }
            if (!tr.loss.empty()) tr.cfg.loss.kind = detail::parse_loss_kind(tr.loss);
            if (train_cmd->count("--pair-ss") || train_cmd->count("--pair-same-camera") ||
                train_cmd->count("--pair-same-day"))
                tr.cfg.constraint = {tr.ss, tr.same_camera, tr.same_day};

            err << "config train: model=" << tr.model
                << " loss=" << network::loss_kind_name(tr.cfg.loss.kind)
                << " constraint=" << tr.cfg.constraint.str()
                << " lambda=" << detail::fmt_sci(tr.cfg.loss.lambda)
                << " margin=" << detail::fmt_sci(tr.cfg.loss.margin)
                << " epochs=" << tr.cfg.epochs << " batch_pairs=" << tr.cfg.batch_pairs
                << " lr=" << detail::fmt_sci(tr.cfg.lr_start) << ".."
                << detail::fmt_sci(tr.cfg.lr_end)
                << " momentum=" << detail::fmt_sci(tr.cfg.momentum)
                << " max_pairs=" << tr.cfg.max_pairs << " embed_dim=" << tr.embed_dim
                << " seed=" << tr.cfg.seed << "\n";

            auto loaded = detail::load_catalog_logged(tr.catalog_path, err);
            std::vector<catalog::ImageRecord> recs = loaded.records;
            if (!tr.train_ids.empty())
                recs = detail::filter_by_ids(recs, detail::read_id_file(tr.train_ids));
            std::string base = tr.images_dir.empty()
                                   ? detail::default_images_dir(tr.catalog_path)
                                   : tr.images_dir;
            catalog::ImageMap images = catalog::load_images(recs, base);
            network::ArchConfig arch = detail::arch_for(images, tr.embed_dim, 2);

            engine::TrainResult res = engine::train(arch, recs, images, tr.cfg);
            if (tr.cfg.loss.kind == network::LossKind::Contrast)
                engine::fit_softmax_head_on_features(res.params, recs, images);
            network::save_checkpoint(tr.out_ckpt, res.params);
            if (!tr.history.empty()) detail::write_history(tr.history, res.epoch_loss, tr.cfg);
            if (!tr.json_path.empty()) {
                nlohmann::json j;
                j["model"] = tr.model;
                j["loss"] = network::loss_kind_name(tr.cfg.loss.kind);
                j["constraint"] = tr.cfg.constraint.str();
                j["epochs"] = tr.cfg.epochs;
                j["seed"] = tr.cfg.seed;
                j["units"] = res.n_units;
                j["epoch_loss"] = res.epoch_loss;
                j["checkpoint"] = tr.out_ckpt;
                detail::write_text(tr.json_path, j.dump(2) + "\n");
            }

            out << "units " << res.n_units << "\n";
            out << "final_loss " << detail::fmt(res.epoch_loss.back(), 6) << "\n";
            out << "checkpoint " << tr.out_ckpt << "\n";
            return 0;
        }

        if (eval_cmd->parsed()) {
            err << "config eval: catalog=" << ev.catalog_path << " ckpt=" << ev.ckpt << "\n";
            auto loaded = detail::load_catalog_logged(ev.catalog_path, err);
            std::vector<catalog::ImageRecord> recs = loaded.records;
            if (!ev.ids_file.empty())
                recs = detail::filter_by_ids(recs, detail::read_id_file(ev.ids_file));
            std::string base = ev.images_dir.empty()
                                   ? detail::default_images_dir(ev.catalog_path)
                                   : ev.images_dir;
            catalog::ImageMap images = catalog::load_images(recs, base);
            network::NetParams params = network::load_checkpoint<float>(ev.ckpt);
            engine::EvalReport rep = engine::evaluate_classification(params, recs, images);
            out << "acc_sunrise " << detail::fmt(rep.acc_sunrise_pct, 4) << "\n";
            out << "acc_sunset " << detail::fmt(rep.acc_sunset_pct, 4) << "\n";
            out << "macc " << detail::fmt(rep.macc_pct, 4) << "\n";
            if (!ev.json_path.empty()) {
                nlohmann::json j;
                j["acc_sunrise_pct"] = rep.acc_sunrise_pct;
                j["acc_sunset_pct"] = rep.acc_sunset_pct;
                j["macc_pct"] = rep.macc_pct;
                j["n_sunrise"] = rep.n_sunrise;
                j["n_sunset"] = rep.n_sunset;
                j["correct_sunrise"] = rep.correct_sunrise;
                j["correct_sunset"] = rep.correct_sunset;
                detail::write_text(ev.json_path, j.dump(2) + "\n");
            }
            return 0;
        }

        if (predict_cmd->parsed()) {
            err << "config predict: ckpt=" << pd.ckpt << "\n";
            network::NetParams params = network::load_checkpoint<float>(pd.ckpt);
            if (!pd.image_files.empty()) {
                for (const auto& path : pd.image_files) {
                    auto p = network::predict(params, imageio::load_image(path));
                    out << path << "\t" << label_name(p.cls == 0 ? Label::Sunrise : Label::Sunset)
                        << "\t" << detail::fmt(p.prob, 6) << "\n";
                }
                return 0;
            }
            if (pd.catalog_path.empty())
                throw DataError("predict: need --catalog or at least one --image");
            auto loaded = detail::load_catalog_logged(pd.catalog_path, err);
            std::vector<catalog::ImageRecord> recs = loaded.records;
            if (!pd.ids_file.empty())
                recs = detail::filter_by_ids(recs, detail::read_id_file(pd.ids_file));
            std::string base = pd.images_dir.empty()
                                   ? detail::default_images_dir(pd.catalog_path)
                                   : pd.images_dir;
            catalog::ImageMap images = catalog::load_images(recs, base);
            for (const auto& r : recs) {
                auto p = network::predict(params, images.at(r.id));
                out << r.id << "\t" << label_name(p.cls == 0 ? Label::Sunrise : Label::Sunset)
                    << "\t" << detail::fmt(p.prob, 6) << "\n";
            }
            return 0;
        }

        if (ttrain_cmd->parsed()) {
            tt.cfg.feature_layer = tt.feature_layer == "embedding"
                                       ? network::FeatureLayer::Embedding
                                       : network::FeatureLayer::MidConv;
            err << "config temp-train: feature_layer=" << tt.feature_layer
                << " ridge=" << detail::fmt_sci(tt.cfg.ridge)
                << " epochs=" << tt.cfg.stage1.epochs
                << " batch_pairs=" << tt.cfg.stage1.batch_pairs
                << " lr=" << detail::fmt_sci(tt.cfg.stage1.lr_start) << ".."
                << detail::fmt_sci(tt.cfg.stage1.lr_end)
                << " max_pairs=" << tt.cfg.stage1.max_pairs << " embed_dim=" << tt.embed_dim
                << " seed=" << tt.cfg.stage1.seed << "\n";

            auto loaded = detail::load_catalog_logged(tt.catalog_path, err);
            std::string base = tt.images_dir.empty()
                                   ? detail::default_images_dir(tt.catalog_path)
                                   : tt.images_dir;
            catalog::ImageMap images = catalog::load_images(loaded.records, base);
            tt.cfg.arch = detail::arch_for(images, tt.embed_dim, 1);

            auto [model, report] = engine::train_regression(loaded.records, images, tt.cfg);
            network::save_checkpoint(tt.out_ckpt, model.params);
            nlohmann::json j;
            j["feature_layer"] =
                model.layer == network::FeatureLayer::Embedding ? "embedding" : "mid-conv";
            j["feat_mean"] = model.feat_mean;
            j["feat_scale"] = model.feat_scale;
            j["head_w"] = model.head_w;
            j["holdout"] = {{"r2", report.r2}, {"rmse", report.rmse}, {"n", report.n}};
            detail::write_text(tt.out_model, j.dump(2) + "\n");

            out << "r2 " << detail::fmt(report.r2, 6) << "\n";
            out << "rmse " << detail::fmt(report.rmse, 6) << "\n";
            out << "n " << report.n << "\n";
            out << "model " << tt.out_model << "\n";
            out << "checkpoint " << tt.out_ckpt << "\n";
            return 0;
        }

        if (teval_cmd->parsed()) {
            err << "config temp-eval: ckpt=" << te.ckpt << " model=" << te.model_json << "\n";
            engine::RegressionModel model;
            model.params = network::load_checkpoint<float>(te.ckpt);
            nlohmann::json j;
            try {
                std::ifstream f(te.model_json);
                if (!f) throw DataError("cannot open model json: " + te.model_json);
                j = nlohmann::json::parse(f);
                model.layer = j.at("feature_layer").get<std::string>() == "embedding"
                                  ? network::FeatureLayer::Embedding
                                  : network::FeatureLayer::MidConv;
                model.feat_mean = j.at("feat_mean").get<std::vector<double>>();
                model.feat_scale = j.at("feat_scale").get<std::vector<double>>();
                model.head_w = j.at("head_w").get<std::vector<double>>();
            } catch (const nlohmann::json::exception& e) {
                throw DataError(std::string("model json malformed: ") + e.what());
            }
            if (model.feat_mean.size() != model.feat_scale.size() ||
                model.head_w.size() != model.feat_mean.size() + 1)
                throw DataError("model json: inconsistent feature/head sizes");

            auto loaded = detail::load_catalog_logged(te.catalog_path, err);
            std::vector<catalog::ImageRecord> recs = loaded.records;
            if (!te.ids_file.empty())
                recs = detail::filter_by_ids(recs, detail::read_id_file(te.ids_file));
            std::string base = te.images_dir.empty()
                                   ? detail::default_images_dir(te.catalog_path)
                                   : te.images_dir;
            catalog::ImageMap images = catalog::load_images(recs, base);
            std::vector<double> preds, targets;
            for (const auto& r : recs) {
                if (!r.temperature_c.has_value()) continue;
                preds.push_back(engine::predict_temperature(model, images.at(r.id)));
                targets.push_back(*r.temperature_c);
            }
            engine::RegressionReport rep = engine::evaluate_regression(preds, targets);
            out << "r2 " << detail::fmt(rep.r2, 6) << "\n";
            out << "rmse " << detail::fmt(rep.rmse, 6) << "\n";
            out << "n " << rep.n << "\n";
            return 0;
        }

        if (grad_cmd->parsed()) {
            network::LossKind kind = detail::parse_loss_kind(gc.loss);
            err << "config gradcheck: loss=" << gc.loss << " eps=" << detail::fmt_sci(gc.eps)
                << " coords=" << gc.coords << " seed=" << gc.seed << "\n";

            network::ArchConfig arch;
            arch.in_ch = 3;
            arch.in_h = 16;
            arch.in_w = 16;
            arch.channels = {4, 8};
            arch.embed_dim = 32;
            arch.head1_width = kind == network::LossKind::Square ? 1 : 2;
            using P = network::NetParamsT<double>;
            P params = network::init_params<double>(arch, Rng::mix(gc.seed, 0xC0));

            Rng rng(Rng::mix(gc.seed, 0xC1));
            auto rand_img = [&](void) {
                TensorT<double> t({3, 16, 16});
                for (auto& v : t.data) v = rng.uniform();
                return t;
            };
            std::vector<TensorT<double>> imgs;
            for (int i = 0; i < 6; ++i) imgs.push_back(rand_img());
            // calibrated scales keep the loss O(1); raw init would leave the
            // contrast term large enough for cancellation to drown eps steps
            std::vector<const TensorT<double>*> probe;
            for (const auto& im : imgs) probe.push_back(&im);
            network::calibrate_init(params, probe, 1.0, 0.1);

            network::GradCheckReport rep;
            if (kind == network::LossKind::SoftmaxOnly) {
                std::vector<network::SingleSample<double>> batch;
                for (int i = 0; i < 6; ++i) batch.push_back({&imgs[i], i % 2});
                rep = network::grad_check_singles(params, batch, gc.eps, gc.coords, gc.seed);
            } else {
                network::LossSpec spec;
                spec.kind = kind;
                std::vector<network::PairSample<double>> batch;
                for (int i = 0; i < 3; ++i) {
                    network::PairSample<double> s;
                    s.img_r = &imgs[2 * i];
                    s.img_s = &imgs[2 * i + 1];
                    s.y_r = i % 2;
                    s.y_s = 1 - (i % 2);
                    s.target_r = rng.uniform(-1.0, 1.0);
                    s.target_s = rng.uniform(-1.0, 1.0);
                    batch.push_back(s);
                }
                rep = network::grad_check(params, batch, spec, gc.eps, gc.coords, gc.seed);
            }
            out << "max_rel_err " << detail::fmt_sci(rep.max_rel_err) << "\n";
            out << "coords " << rep.coords_checked << "\n";
            out << "kinks_skipped " << rep.kinks_skipped << "\n";
            if (!(rep.max_rel_err < 1e-4))
                throw NumericError("gradcheck: max relative error " +
                                   detail::fmt_sci(rep.max_rel_err) + " >= 1e-4");
            return 0;
        }

        err << "no subcommand selected\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            const CLI::App* h = &app;
            for (const CLI::App* s : app.get_subcommands())
                h = s;  // help for the subcommand being parsed
            out << h->help();
            return 0;
        }
        err << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace sosnet::cli
