#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "torusflow/grid.hpp"

namespace torusflow {

/// Philox-4x32-10 counter-based generator (Salmon et al., SC'11 constants).
///
/// Every draw is a pure function of (key, stream, counter), so streams can be
/// consumed in any order, from any thread, and still reproduce bit-exactly.
/// Stream ids used by the library:
///   BrownianPath increments:  stream = path seed, counter = step*m + component
///   bridge refinement:        stream = mix(path seed, level), counter likewise
///   random field synthesis:   stream = mix(seed, component)
class CounterRng {
public:
    CounterRng(std::uint64_t key, std::uint64_t stream) : key_(key), stream_(stream) {}

    /// Four raw 32-bit words for a counter value.
    std::array<std::uint32_t, 4> block(std::uint64_t counter) const {
        std::uint32_t c0 = static_cast<std::uint32_t>(counter);
        std::uint32_t c1 = static_cast<std::uint32_t>(counter >> 32);
        std::uint32_t c2 = static_cast<std::uint32_t>(stream_);
        std::uint32_t c3 = static_cast<std::uint32_t>(stream_ >> 32);
        std::uint32_t k0 = static_cast<std::uint32_t>(key_);
        std::uint32_t k1 = static_cast<std::uint32_t>(key_ >> 32);
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c0;
            const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c2;
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t n0 = hi1 ^ c1 ^ k0;
            const std::uint32_t n1 = lo1;
            const std::uint32_t n2 = hi0 ^ c3 ^ k1;
            const std::uint32_t n3 = lo0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return {c0, c1, c2, c3};
    }

    /// Two iid uniforms; first in (0,1], second in [0,1).
    std::array<double, 2> uniform_pair(std::uint64_t counter) const {
        const auto b = block(counter);
        const std::uint64_t w0 = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
        const std::uint64_t w1 = (static_cast<std::uint64_t>(b[2]) << 32) | b[3];
        const double u0 = (static_cast<double>(w0 >> 11) + 1.0) * 0x1.0p-53;
        const double u1 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
        return {u0, u1};
    }

    /// Two iid standard normals via Box-Muller (rejection-free, deterministic).
    std::array<double, 2> normal_pair(std::uint64_t counter) const {
        const auto u = uniform_pair(counter);
        const double r = std::sqrt(-2.0 * std::log(u[0]));
        const double a = two_pi * u[1];
        return {r * std::cos(a), r * std::sin(a)};
    }

    double normal(std::uint64_t counter) const { return normal_pair(counter)[0]; }
    double uniform(std::uint64_t counter) const { return uniform_pair(counter)[0]; }

private:
    std::uint64_t key_;
    std::uint64_t stream_;
};

/// splitmix64 finalizer; used to derive sub-stream ids.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace torusflow
