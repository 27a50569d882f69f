#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace sosnet {

// Deterministic randomness. The engine is mt19937_64 (bit-exact by the
// standard); every mapping to doubles/ints is done here so outputs never
// depend on the stdlib's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

    // uniform in [0,1) with 53-bit resolution
    double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0,n); rejection keeps it unbiased
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = eng_(); } while (x >= limit);
        return x % n;
    }

    // standard normal, Box-Muller with one cached value
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do { u1 = uniform(); } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::size_t(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream derived from (seed, salt) only, so the
    // parent's draw position does not affect the child.
    Rng child(std::uint64_t salt) const { return Rng(mix(seed_, salt)); }

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        // splitmix64 finalizer over the combined words
        std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace sosnet
