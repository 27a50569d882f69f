#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sosnet/catalog.hpp"
#include "sosnet/errors.hpp"
#include "sosnet/rng.hpp"
#include "sosnet/solar.hpp"

namespace sosnet::pairing {

// The five sampling regimes are (require_ss, same_camera, same_day) in
// {FFF, TFF, TFT, TTF, TTT}; TTT is the selective-pair setting.
struct PairConstraint {
    bool require_ss = false;
    bool same_camera = false;
    bool same_day = false;  // same local solar calendar day

    std::string str() const {
        std::string s;
        if (require_ss) s += "ss,";
        if (same_camera) s += "same-camera,";
        if (same_day) s += "same-day,";
        if (s.empty()) return "none";
        s.pop_back();
        return s;
    }
};

// With require_ss, x_r is the Sunrise member and x_s the Sunset member;
// otherwise members are stored in ascending id order.
struct Pair {
    catalog::ImageRecord x_r;
    catalog::ImageRecord x_s;
};

inline long long local_day_of(const catalog::ImageRecord& r) {
    return solar::local_solar_day(r.geo, r.timestamp_utc.epoch_seconds());
}

// Pure predicate over an unordered record pair; unlabeled records simply
// fail the SS requirement.
inline bool satisfies(const catalog::ImageRecord& a, const catalog::ImageRecord& b,
                      const PairConstraint& c) {
    if (a.id == b.id) return false;
    if (c.require_ss) {
        if (!a.label || !b.label) return false;
        if (*a.label == *b.label) return false;
    }
    if (c.same_camera && a.camera_id != b.camera_id) return false;
    if (c.same_day && local_day_of(a) != local_day_of(b)) return false;
    return true;
}

inline bool satisfies(const Pair& p, const PairConstraint& c) {
    return satisfies(p.x_r, p.x_s, c);
}

inline Pair make_pair_under(const catalog::ImageRecord& a, const catalog::ImageRecord& b,
                            const PairConstraint& c) {
    if (c.require_ss) {
        bool a_is_rise = a.label && *a.label == Label::Sunrise;
        return a_is_rise ? Pair{a, b} : Pair{b, a};
    }
    return a.id <= b.id ? Pair{a, b} : Pair{b, a};
}

namespace detail {

inline void sort_pairs(std::vector<Pair>& ps) {
    std::sort(ps.begin(), ps.end(), [](const Pair& l, const Pair& r) {
        if (l.x_r.id != r.x_r.id) return l.x_r.id < r.x_r.id;
        return l.x_s.id < r.x_s.id;
    });
}

inline std::string zero_pair_diagnostic(const std::vector<catalog::ImageRecord>& recs,
                                        const PairConstraint& c) {
    std::map<std::string, std::pair<int, int>> per_cam;  // camera -> (rise, set)
    for (const auto& r : recs) {
        auto& e = per_cam[r.camera_id];
        if (r.label && *r.label == Label::Sunrise) e.first++;
        if (r.label && *r.label == Label::Sunset) e.second++;
    }
    std::string msg = "no pairs satisfy constraint (" + c.str() + "); " +
                      std::to_string(recs.size()) + " records across " +
                      std::to_string(per_cam.size()) + " cameras;";
    int shown = 0;
    for (const auto& [cam, counts] : per_cam) {
        if (++shown > 8) {
            msg += " ...";
            break;
        }
        msg += " " + cam + ": rise=" + std::to_string(counts.first) +
               " set=" + std::to_string(counts.second);
    }
    return msg;
}

}  // namespace detail

// Exactly the satisfying unordered pairs, sorted by (x_r.id, x_s.id).
inline std::vector<Pair> enumerate_pairs(const std::vector<catalog::ImageRecord>& recs,
                                         const PairConstraint& c) {
    std::vector<Pair> out;
    if (c.same_camera) {
        // bucket by camera: the selective regimes are near-linear in records
        std::map<std::string, std::vector<std::size_t>> buckets;
        for (std::size_t i = 0; i < recs.size(); ++i)
            buckets[recs[i].camera_id].push_back(i);
        for (const auto& [cam, idx] : buckets)
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = i + 1; j < idx.size(); ++j)
                    if (satisfies(recs[idx[i]], recs[idx[j]], c))
                        out.push_back(make_pair_under(recs[idx[i]], recs[idx[j]], c));
    } else {
        for (std::size_t i = 0; i < recs.size(); ++i)
            for (std::size_t j = i + 1; j < recs.size(); ++j)
                if (satisfies(recs[i], recs[j], c))
                    out.push_back(make_pair_under(recs[i], recs[j], c));
    }
    if (out.empty()) throw DataError(detail::zero_pair_diagnostic(recs, c));
    detail::sort_pairs(out);
    return out;
}

// Quadratic regimes can explode; keep at most max_pairs via a seeded uniform
// subsample (reservoir), then restore deterministic sorted order.
inline std::vector<Pair> enumerate_pairs_capped(const std::vector<catalog::ImageRecord>& recs,
                                                const PairConstraint& c, std::size_t max_pairs,
                                                std::uint64_t seed) {
    if (max_pairs == 0) throw DataError("max_pairs must be >= 1");
    std::vector<Pair> all = enumerate_pairs(recs, c);
    if (all.size() <= max_pairs) return all;
    Rng rng(seed);
    std::vector<Pair> res(all.begin(), all.begin() + long(max_pairs));
    for (std::size_t i = max_pairs; i < all.size(); ++i) {
        std::size_t j = std::size_t(rng.below(i + 1));
        if (j < max_pairs) res[j] = all[i];
    }
    detail::sort_pairs(res);
    return res;
}

// A seeded permutation of [0, n_pairs) chunked into batches; the final
// partial batch is kept. Every pair index appears exactly once.
inline std::vector<std::vector<std::size_t>> sample_epoch(std::size_t n_pairs, int batch_pairs,
                                                          std::uint64_t seed) {
    if (n_pairs == 0) throw DataError("sample_epoch: empty pair list");
    if (batch_pairs < 1) throw DataError("sample_epoch: batch_pairs must be >= 1");
    std::vector<std::size_t> perm(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) perm[i] = i;
    Rng(seed).shuffle(perm);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n_pairs; start += std::size_t(batch_pairs)) {
        std::size_t end = std::min(n_pairs, start + std::size_t(batch_pairs));
        batches.emplace_back(perm.begin() + long(start), perm.begin() + long(end));
    }
    return batches;
}

}  // namespace sosnet::pairing
