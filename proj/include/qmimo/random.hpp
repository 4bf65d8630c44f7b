// SPDX-License-Identifier: Apache-2.0
//
// Seeded random streams with bit-exact output on every platform.
//
// std::mt19937_64 is fully specified by the standard, but the <random>
// distributions are not, so the uniform and normal transforms are done here.
// Substreams are keyed by (seed, tag, index) through splitmix64 so that a
// trial's draws never depend on which worker runs it.

#ifndef QMIMO_RANDOM_HPP
#define QMIMO_RANDOM_HPP

#include "core.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace qmimo {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

enum class StreamTag : std::uint64_t {
    Drop = 1,
    Trial = 2,
    Adc = 3,
    Aux = 4,
};

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    // Independent substream for (seed, tag, index).
    static RandomStream derive(std::uint64_t seed, StreamTag tag, std::uint64_t index) {
        std::uint64_t key = splitmix64(seed);
        key = splitmix64(key ^ static_cast<std::uint64_t>(tag));
        key = splitmix64(key ^ index);
        return RandomStream(key);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] (inclusive), rejection-sampled, no modulo bias.
    int uniform_int(int lo, int hi) {
        detail::require(lo <= hi, "uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return lo + static_cast<int>(x % span);
    }

    // Standard normal via the Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    // Circularly-symmetric CN(0, variance): each real component has variance/2.
    cdouble complex_normal(double variance = 1.0) {
        const double sd = std::sqrt(0.5 * variance);
        const double re = normal();
        const double im = normal();
        return {sd * re, sd * im};
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace qmimo

#endif
