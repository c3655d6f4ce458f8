#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace oga {

/// Counter-based 64-bit generator (splitmix64). The state advances by the
/// fixed increment 0x9E3779B97F4A7C15 and each output is a bijective mix of
/// the state, so a seed fully determines the stream. Used everywhere a seed
/// appears so that runs are reproducible byte for byte.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Uniform integer in [0, n). Uses the modulo reduction; the bias is
    /// below 2^-40 for every n used in this library.
    std::uint64_t uniform_below(std::uint64_t n) {
        return next() % n;
    }

    bool coin() { return (next() >> 63) != 0; }

    /// Standard normal via Box-Muller (cosine branch only), two draws per
    /// value; no rejection, so the draw count per call is fixed.
    double normal() {
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0,1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace oga
