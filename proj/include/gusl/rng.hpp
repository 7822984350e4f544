#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace gusl {

// Deterministic PRNG with platform-independent output. std:: distributions are
// implementation-defined, so sampling helpers are implemented here directly.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        state_ = seed;
        has_cached_normal_ = false;
        // Warm up so nearby seeds decorrelate.
        next();
        next();
    }

    // splitmix64 step.
    uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = next();
        while (x >= limit) x = next();
        return x % n;
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (has_cached_normal_) {
            has_cached_normal_ = false;
            return cached_normal_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_normal_ = r * std::sin(a);
        has_cached_normal_ = true;
        return r * std::cos(a);
    }

    // Independent child stream; `tag` distinguishes call sites.
    Rng child(uint64_t tag) const {
        uint64_t z = state_ ^ (0xA0761D6478BD642FULL + tag * 0xE7037ED1A0B428DBULL);
        z = (z ^ (z >> 32)) * 0xD6E8FEB86659FD93ULL;
        return Rng(z ^ (z >> 32));
    }

private:
    uint64_t state_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// k distinct indices from [0, n), ascending. Partial Fisher-Yates on an index
// pool, then sorted so downstream gathers are sequential.
std::vector<size_t> sample_indices(size_t n, size_t k, Rng& rng);

// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace gusl
