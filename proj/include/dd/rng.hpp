#pragma once

#include <cmath>
#include <cstdint>

namespace dd {

/// SplitMix64 (Steele/Lea/Burton).  Small, fast, and fully specified, so
/// streams are reproducible across platforms and standard libraries.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

/// Derive an independent stream seed from (seed, counter).  Used to give every
/// Monte-Carlo realization its own generator, independent of thread schedule.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t counter) {
    SplitMix64 mix(seed ^ (0x9e3779b97f4a7c15ULL * (counter + 1)));
    mix.next();
    return mix.next();
}

/// Standard normal variates via Box-Muller.  Pinned implementation: results
/// must not depend on std::normal_distribution internals.
struct GaussianStream {
    SplitMix64 rng;
    double spare = 0;
    bool has_spare = false;

    explicit GaussianStream(std::uint64_t seed) : rng(seed) {}

    double next() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        // u1 in (0,1] so the log is finite.
        double u1 = 1.0 - rng.uniform01();
        double u2 = rng.uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare = r * std::sin(a);
        has_spare = true;
        return r * std::cos(a);
    }
};

}  // namespace dd
