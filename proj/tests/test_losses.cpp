#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sosnet/losses.hpp"
#include "sosnet/rng.hpp"

using namespace sosnet;
using namespace sosnet::losses;

TEST_CASE("softmax_ce closed forms", "[losses]") {
    REQUIRE(std::fabs(softmax_ce(0.0, 0.0, 0) - std::log(2.0)) < 1e-12);
    REQUIRE(std::fabs(softmax_ce(0.0, 0.0, 1) - std::log(2.0)) < 1e-12);
    REQUIRE(std::fabs(softmax_ce(2.0, 1.0, 0) - std::log(1.0 + std::exp(-1.0))) < 1e-12);
    REQUIRE(softmax_ce(1000.0, 0.0, 0) >= 0.0);
    REQUIRE(softmax_ce(1000.0, 0.0, 0) < 1e-12);
    REQUIRE(std::isfinite(softmax_ce(1000.0, 0.0, 1)));
    REQUIRE_THROWS_AS(softmax_ce(0.0, 0.0, 2), DataError);
}

TEST_CASE("softmax_ce shift invariance", "[losses]") {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        double l0 = rng.uniform(-5, 5), l1 = rng.uniform(-5, 5), c = rng.uniform(-50, 50);
        int y = int(rng.below(2));
        REQUIRE(std::fabs(softmax_ce(l0 + c, l1 + c, y) - softmax_ce(l0, l1, y)) < 1e-9);
    }
}

TEST_CASE("ranking_loss closed forms and stability", "[losses]") {
    REQUIRE(std::fabs(ranking_loss(0.0, 0.0) - 0.5) < 1e-12);
    REQUIRE(std::fabs(ranking_loss(std::log(3.0), 0.0) - 0.25) < 1e-12);
    REQUIRE(std::fabs(ranking_loss(-std::log(3.0), 0.0) - 0.75) < 1e-12);
    REQUIRE(ranking_loss(1000.0, 0.0) >= 0.0);
    REQUIRE(ranking_loss(1000.0, 0.0) < 1e-12);
    REQUIRE(std::fabs(ranking_loss(-1000.0, 0.0) - 1.0) < 1e-12);
    REQUIRE(std::isfinite(ranking_loss(-1e8, 1e8)));
}

TEST_CASE("ranking_loss complement and monotonicity", "[losses]") {
    Rng rng(2);
    double prev = ranking_loss(-10.0, 0.0);
    for (double d = -9.5; d <= 10.0; d += 0.5) {
        double cur = ranking_loss(d, 0.0);
        REQUIRE(cur < prev);  // strictly decreasing in s_r - s_s
        prev = cur;
    }
    for (int i = 0; i < 200; ++i) {
        double a = rng.uniform(-20, 20), b = rng.uniform(-20, 20);
        REQUIRE(std::fabs(ranking_loss(a, b) + ranking_loss(b, a) - 1.0) < 1e-12);
        REQUIRE(ranking_loss(a, b) > 0.0);
        REQUIRE(ranking_loss(a, b) < 1.0);
    }
}

TEST_CASE("contrast_loss cases", "[losses]") {
    std::vector<double> v(256, 0.5), w(256, 0.5);
    REQUIRE(contrast_loss(v, w, 0, 0) == 0.0);
    REQUIRE(contrast_loss(v, w, 0, 1) == 1.0);  // margin 1, identical vectors

    w[0] = 2.5;  // squared distance 4
    REQUIRE(contrast_loss(v, w, 0, 1) == 0.0);
    REQUIRE(contrast_loss(v, w, 1, 1) == Catch::Approx(4.0));

    std::vector<double> bad(8, 0.0);
    REQUIRE_THROWS_AS(contrast_loss(v, bad, 0, 1), DataError);
}

TEST_CASE("contrast_loss symmetry and non-negativity", "[losses]") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> a(16), b(16);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();
        int ci = int(rng.below(2)), cj = int(rng.below(2));
        double m = rng.uniform(0.5, 2.0);
        REQUIRE(contrast_loss(a, b, ci, cj, m) == contrast_loss(b, a, cj, ci, m));
        REQUIRE(contrast_loss(a, b, ci, cj, m) >= 0.0);
    }
}

TEST_CASE("square_loss cases", "[losses]") {
    REQUIRE(square_loss(3.0, 3.0) == 0.0);
    REQUIRE(square_loss(5.0, 3.0) == 4.0);
    double mean = (square_loss(1.0, 0.0) + square_loss(0.0, 1.0)) / 2.0;
    REQUIRE(mean == 1.0);
}

TEST_CASE("combined_loss zero-output pair", "[losses]") {
    PairHeads<double> p{};
    p.y_r = 0;
    p.y_s = 1;
    LossValueT<double> v = combined_loss(std::vector<PairHeads<double>>{p}, 1.0);
    REQUIRE(std::fabs(v.total - (2.0 * std::log(2.0) + 0.5)) < 1e-12);
    REQUIRE(v.total == v.softmax_r + v.softmax_s + 1.0 * v.ranking);  // exact reconciliation
}

TEST_CASE("combined_loss lambda=0 degenerates to softmax mean", "[losses]") {
    Rng rng(4);
    std::vector<PairHeads<double>> batch(8);
    for (auto& p : batch) {
        p.logits_r[0] = rng.normal();
        p.logits_r[1] = rng.normal();
        p.logits_s[0] = rng.normal();
        p.logits_s[1] = rng.normal();
        p.score_r = rng.normal();
        p.score_s = rng.normal();
        p.y_r = 0;
        p.y_s = 1;
    }
    LossValueT<double> v = combined_loss(batch, 0.0);
    double expect = 0.0;
    for (const auto& p : batch)
        expect += softmax_ce(p.logits_r[0], p.logits_r[1], p.y_r) +
                  softmax_ce(p.logits_s[0], p.logits_s[1], p.y_s);
    expect /= double(batch.size());
    REQUIRE(std::fabs(v.total - expect) < 1e-12);
}

namespace {
// scalar-by-scalar recomputation with naive formulas (safe at small logits)
double naive_combined(const std::vector<PairHeads<double>>& batch, double lambda) {
    double total = 0.0;
    for (const auto& p : batch) {
        auto ce = [](double l0, double l1, int y) {
            double z = std::exp(l0) + std::exp(l1);
            return -std::log(std::exp(y == 0 ? l0 : l1) / z);
        };
        double rank = 1.0 / (1.0 + std::exp(p.score_r - p.score_s));
        total += ce(p.logits_r[0], p.logits_r[1], p.y_r) +
                 ce(p.logits_s[0], p.logits_s[1], p.y_s) + lambda * rank;
    }
    return total / double(batch.size());
}
}  // namespace

TEST_CASE("combined_loss matches an independent recomputation", "[losses][oracle]") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<PairHeads<double>> batch(1 + rng.below(16));
        for (auto& p : batch) {
            p.logits_r[0] = rng.uniform(-3, 3);
            p.logits_r[1] = rng.uniform(-3, 3);
            p.logits_s[0] = rng.uniform(-3, 3);
            p.logits_s[1] = rng.uniform(-3, 3);
            p.score_r = rng.uniform(-3, 3);
            p.score_s = rng.uniform(-3, 3);
            p.y_r = int(rng.below(2));
            p.y_s = int(rng.below(2));
        }
        double lambda = rng.uniform(0, 2);
        LossValueT<double> v = combined_loss(batch, lambda);
        REQUIRE(std::fabs(v.total - naive_combined(batch, lambda)) < 1e-10);
    }
}

TEST_CASE("combined_loss batch permutation invariance", "[losses]") {
    Rng rng(6);
    std::vector<PairHeads<double>> batch(32);
    for (auto& p : batch) {
        p.logits_r[0] = rng.normal();
        p.logits_r[1] = rng.normal();
        p.logits_s[0] = rng.normal();
        p.logits_s[1] = rng.normal();
        p.score_r = rng.normal();
        p.score_s = rng.normal();
        p.y_r = int(rng.below(2));
        p.y_s = int(rng.below(2));
    }
    LossValueT<double> a = combined_loss(batch, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        rng.shuffle(batch);
        LossValueT<double> b = combined_loss(batch, 1.0);
        REQUIRE(std::fabs(a.total - b.total) <= 1e-10 * std::fabs(a.total));
    }
}

TEST_CASE("combined_loss input validation", "[losses]") {
    std::vector<PairHeads<double>> batch(1);
    REQUIRE_THROWS_AS(combined_loss(batch, -0.5), DataError);
    REQUIRE_THROWS_AS(combined_loss(std::vector<PairHeads<double>>{}, 1.0), DataError);
}

TEST_CASE("all losses are non-negative", "[losses]") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        REQUIRE(softmax_ce(rng.normal(), rng.normal(), int(rng.below(2))) >= 0.0);
        REQUIRE(ranking_loss(rng.normal(), rng.normal()) >= 0.0);
        REQUIRE(square_loss(rng.normal(), rng.normal()) >= 0.0);
    }
}
