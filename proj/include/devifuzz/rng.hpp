#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace devifuzz {

/// Deterministic random source. mt19937_64 gives identical bit streams on
/// every platform; the distributions below are hand-rolled because the
/// standard library ones are implementation-defined and would break
/// cross-platform reproducibility of search traces and reports.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1), 53 bits of entropy.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform index in [0, n). Rejection sampling keeps it unbiased.
    std::size_t uniform_index(std::size_t n) {
        if (n <= 1) return 0;
        const std::uint64_t span = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= span);
        return static_cast<std::size_t>(x % n);
    }

    /// Standard normal via Box-Muller (no cached state, two draws per call).
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool coin() { return (gen_() & 1u) != 0; }

private:
    std::mt19937_64 gen_;
};

/// splitmix64 mixing step; used to derive independent per-trial seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic seed for trial (a, b) under a base experiment seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = splitmix64(base ^ 0x6a09e667f3bcc908ULL);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return h;
}

} // namespace devifuzz
