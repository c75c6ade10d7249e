#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace voxshape {

// Deterministic random source. mt19937_64 is fully specified by the
// standard; the distributions are hand-rolled because the std::*_distribution
// classes are implementation-defined and would break byte-identical
// reproducibility across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive integer range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(gen_() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, no spare caching: every draw consumes exactly two uniforms.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0,1], keeps log finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Inverse-CDF exponential with the given rate.
    double exponential(double rate) {
        const double u = 1.0 - uniform();
        return -std::log(u) / rate;
    }

private:
    std::mt19937_64 gen_;
};

// SplitMix64 finalizer; used to derive independent per-sample streams.
inline std::uint64_t mix_u64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Documented seed-splitting rule: every per-sample stream is
// mix(mix(mix(master ^ tag) ^ a) ^ b). Stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    return mix_u64(mix_u64(mix_u64(master ^ mix_u64(tag)) ^ a) ^ b);
}

}  // namespace voxshape
