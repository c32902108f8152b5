#pragma once

// Portable seeded random source.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard <random> distributions are not (libstdc++ and libc++
// produce different streams), so every variate used by the library is derived
// here from raw 64-bit draws. Identical seeds replay identically on any
// conforming platform.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace immunesom {

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer on [0, n). Rejection sampling removes modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) {
            return 0;
        }
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = next();
        while (x >= limit) {
            x = next();
        }
        return x % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller; no cached second variate so the
    /// stream position depends only on the number of calls.
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) {
            u1 = uniform01();
        }
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Log-normal parameterised by the mean and standard deviation of the
    /// variate itself (not of its logarithm).
    double lognormal_from_moments(double mean, double sd) {
        if (mean <= 0.0) {
            return 0.0;
        }
        const double cv2 = (sd * sd) / (mean * mean);
        const double sigma2 = std::log1p(cv2);
        const double mu = std::log(mean) - 0.5 * sigma2;
        return std::exp(mu + std::sqrt(sigma2) * normal());
    }

    /// Poisson count. Knuth multiplication below mean 30, rounded normal
    /// approximation above.
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) {
            return 0;
        }
        if (mean < 30.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double prod = uniform01();
            while (prod > limit) {
                ++k;
                prod *= uniform01();
            }
            return k;
        }
        const double x = std::round(mean + std::sqrt(mean) * normal());
        return x <= 0.0 ? 0 : static_cast<std::uint64_t>(x);
    }

    // UniformRandomBitGenerator interface, for std::shuffle and friends.
    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return next(); }

private:
    std::mt19937_64 engine_;
};

/// Fisher-Yates using Rng::below, portable unlike std::shuffle.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = rng.below(i);
        using std::swap;
        swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
    }
}

} // namespace immunesom
