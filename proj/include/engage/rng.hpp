#pragma once

#include <cmath>
#include <cstdint>

namespace engage {

// Seedable, splittable 64-bit generator (splitmix64 core). Substreams are
// derived deterministically from (seed, index), so parallel consumers get
// schedule-independent results.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Independent substream for iteration i of a parallel loop; derived from
    // the construction seed, so it does not depend on how many draws the
    // parent has made.
    Rng substream(std::uint64_t i) const {
        Rng probe(seed_ ^ (0x632be59bd9b4e019ULL * (i + 1)));
        probe.next();
        return probe;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n). Lemire's multiply-shift with rejection.
    std::uint64_t bounded(std::uint64_t n) {
        std::uint64_t x = next();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        std::uint64_t l = static_cast<std::uint64_t>(m);
        if (l < n) {
            std::uint64_t t = -n % n;
            while (l < t) {
                x = next();
                m = static_cast<__uint128_t>(x) * n;
                l = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace engage
