#pragma once

#include <cmath>
#include <cstdint>

namespace cog3d {

// splitmix64; identical sequences on every platform, which the determinism
// contracts (subsampling, synthetic scenes, seeded weight init) rely on.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline uint64_t hash_mix(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // Unbiased bounded draw (rejection sampling).
    uint64_t next_below(uint64_t bound) {
        if (bound <= 1) return 0;
        const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % bound);
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % bound;
    }

    // Uniform in [0, 1).
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    float uniform_f(float lo, float hi) { return float(uniform(lo, hi)); }

    // Box-Muller, one value per call (second draw discarded to keep the
    // stream position independent of how callers pair requests).
    double gaussian() {
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    uint64_t state_;
};

}  // namespace cog3d
