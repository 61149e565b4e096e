#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dak/core/error.hpp"
#include "dak/core/sample_matrix.hpp"
#include "dak/kernel_engine.hpp"

namespace dak {

/// Offline scan: W_d(t) for every admissible split, plus the per-coordinate
/// matrix it was averaged from.
struct ScanProfile {
    std::vector<std::size_t> split_set;
    std::vector<double> w_values;
    XiMatrix xi;
    std::size_t n_obs = 0;
    std::size_t n_dims = 0;
};

struct ChangePointEstimate {
    std::size_t tau_hat = 0;  // number of observations before the change
    double max_value = 0.0;
};

/// W_d(t) = (1/d) sum_k xi_k(t), summed in coordinate order.
inline std::vector<double> average_rows(const XiMatrix& xi) {
    std::vector<double> w(xi.n_splits(), 0.0);
    for (std::size_t k = 0; k < xi.n_dims(); ++k) {
        const auto r = xi.row(k);
        for (std::size_t s = 0; s < w.size(); ++s) w[s] += r[s];
    }
    const double d = static_cast<double>(xi.n_dims());
    for (auto& v : w) v /= d;
    return w;
}

inline ScanProfile scan(const SampleMatrix& sample) {
    if (sample.n_obs() < 4) {
        throw input_error("scan requires N >= 4 observations, got " + std::to_string(sample.n_obs()));
    }
    if (sample.n_dims() < 1) throw input_error("scan requires d >= 1");
    ScanProfile p;
    p.n_obs = sample.n_obs();
    p.n_dims = sample.n_dims();
    p.split_set = split_set(p.n_obs);
    p.xi = xi_matrix(sample);
    p.w_values = average_rows(p.xi);
    return p;
}

/// Smallest maximizer over the split set. Shared with the online rule.
inline std::size_t first_argmax(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("argmax of an empty sequence");
    std::size_t best = 0;
    for (std::size_t s = 1; s < v.size(); ++s)
        if (v[s] > v[best]) best = s;
    return best;
}

inline ChangePointEstimate locate(const ScanProfile& profile) {
    if (profile.w_values.empty()) throw std::invalid_argument("locate: empty scan profile");
    const std::size_t s = first_argmax(profile.w_values);
    return {profile.split_set[s], profile.w_values[s]};
}

}  // namespace dak
