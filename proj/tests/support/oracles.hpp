#pragma once

// Slow reference implementations used only by tests.

#include <cstddef>
#include <vector>

#include "dak/core/rng.hpp"
#include "dak/core/sample_matrix.hpp"
#include "dak/kernel_engine.hpp"

namespace dak::oracle {

/// rho_hat(i, j) for coordinate k straight from the anchor sum.
inline double kernel(const SampleMatrix& z, std::size_t k, std::size_t i, std::size_t j) {
    const std::size_t n = z.n_obs();
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += angular_indicator(z(i, k), z(j, k), z(r, k));
    return s / static_cast<double>(n);
}

/// W_d(t), t = 2..N-2, as 2 T_XY - T_XX - T_YY of coordinate-averaged kernels.
inline std::vector<double> naive_scan(const SampleMatrix& z) {
    const std::size_t n = z.n_obs();
    const std::size_t d = z.n_dims();
    auto avg = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += kernel(z, k, i, j);
        return s / static_cast<double>(d);
    };
    std::vector<double> w;
    for (std::size_t t = 2; t + 2 <= n; ++t) {
        double txy = 0.0, txx = 0.0, tyy = 0.0;
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = t; j < n; ++j) txy += avg(i, j);
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = 0; j < t; ++j)
                if (i != j) txx += avg(i, j);
        for (std::size_t i = t; i < n; ++i)
            for (std::size_t j = t; j < n; ++j)
                if (i != j) tyy += avg(i, j);
        const double a = static_cast<double>(t);
        const double b = static_cast<double>(n - t);
        w.push_back(2.0 * txy / (a * b) - txx / (a * (a - 1.0)) - tyy / (b * (b - 1.0)));
    }
    return w;
}

inline SampleMatrix normal_sample(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    SampleMatrix z(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) z.set(i, k, rng.normal());
    return z;
}

}  // namespace dak::oracle
