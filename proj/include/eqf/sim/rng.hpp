/**
 * @file rng.hpp
 * @brief Reproducible Gaussian streams.
 *
 * Stream seeds come from SplitMix64 applied to (seed XOR index), so every trial
 * owns an independent, order-free sub-stream. The engine is std::mt19937_64,
 * whose output sequence is fixed by the standard. Uniforms are the top 53
 * bits of each draw; normals use Box-Muller on consecutive uniform pairs,
 * cos branch first, then the cached sin branch. Together this makes the
 * draw sequence identical across platforms and standard libraries.
 */
#pragma once

#include <eqf/lie.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace eqf::sim {

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) { return splitmix64(seed ^ index); }

class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    static GaussianStream for_trial(std::uint64_t seed, std::uint64_t trial) {
        return GaussianStream(substream_seed(seed, trial));
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    Vec3 normal3(double sigma) {
        const double x = normal();
        const double y = normal();
        const double z = normal();
        return sigma * Vec3{x, y, z};
    }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace eqf::sim
