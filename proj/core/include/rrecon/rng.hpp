#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rrecon {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic RNG with explicit substream derivation. The normal sampler
// is a fixed Box-Muller so draws do not depend on the standard library's
// distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    Rng substream(std::uint64_t id) const {
        return Rng(splitmix64(seed_ ^ (0x9e3779b97f4a7c15ull * (id + 1))));
    }

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased draw from [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        cached_ = r * std::sin(two_pi * u2);
        have_cached_ = true;
        return r * std::cos(two_pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename It>
    void shuffle(It first, It last) {
        const std::uint64_t n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const std::uint64_t j = uniform_int(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

} // namespace rrecon
