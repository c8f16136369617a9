#pragma once

#include <cmath>
#include <cstdint>

namespace prefact {

/// Splittable counter-based 64-bit generator (splitmix64 core). Every
/// stochastic operation in the library takes one of these explicitly, so
/// equal seeds give byte-identical results on any platform. Gaussian
/// variates come from Box-Muller on top of the uniform stream; the spare
/// value is cached and is not carried over by split().
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Integer in [0, n), n >= 1.
    std::uint64_t next_below(std::uint64_t n) {
        // 64-bit multiply-shift; bias is negligible for the small n used here.
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal variate.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        double u1 = 1.0 - next_double();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Derive an independent stream. The child state is one output of this
    /// generator, so parent and child sequences do not overlap in practice.
    Rng split() { return Rng(next_u64()); }

    /// Deterministic stream for (seed, index) tuples, e.g. per-epoch shuffles.
    static Rng from(std::uint64_t seed, std::uint64_t index) {
        Rng r(seed ^ (0x632BE59BD9B4E019ull * (index + 1)));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace prefact
