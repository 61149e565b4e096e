#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace dak {

/// Identity of the random stream, embedded in every report so results can be
/// reproduced bit-exactly.
inline constexpr const char* kGeneratorId =
    "mt19937_64; seeds=splitmix64(seed,stream...); uniform=53-bit open; normal=polar";

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic substream seed for (seed, id_1, id_2, ...). Distinct id paths
/// give statistically independent streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> ids) noexcept {
    std::uint64_t s = mix64(seed);
    for (auto id : ids) s = mix64(s ^ mix64(id + 0x632BE59BD9B4E019ULL));
    return s;
}

/// Seeded random source with the few transforms the library needs. Every
/// transform is written here so the stream does not depend on the standard
/// library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform index in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection keeps the result unbiased.
        const std::uint64_t limit = (~std::uint64_t{0} - n + 1) % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x < limit);
        return x % n;
    }

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

    double cauchy(double location = 0.0, double scale = 1.0) {
        return location + scale * std::tan(std::numbers::pi * (uniform() - 0.5));
    }

    double laplace(double location = 0.0, double scale = 1.0) {
        const double u = uniform() - 0.5;
        const double sgn = u < 0 ? -1.0 : 1.0;
        return location - scale * sgn * std::log(1.0 - 2.0 * std::abs(u));
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 uses the
    /// Gamma(shape+1) * U^(1/shape) boost.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            return g * std::pow(uniform(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dak
