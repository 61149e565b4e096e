#pragma once

// Empirical angular kernel and per-coordinate split statistics.
//
// For a single coordinate with values z_1..z_N the pooled-anchor kernel is
//
//     rho(i, j) = #{ r : min(z_i, z_j) < z_r < max(z_i, z_j) } / N,
//
// a count of anchors strictly inside the open interval. Comparisons are strict,
// so the definition is exact under ties. Everything below is kept in integer
// counts until the final division, which makes the incremental split sweep
// bit-identical to a naive triple sum.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dak/core/error.hpp"
#include "dak/core/parallel.hpp"
#include "dak/core/sample_matrix.hpp"

namespace dak {

/// 1 iff the anchor r lies strictly between p and q.
constexpr int angular_indicator(double p, double q, double r) noexcept {
    return ((p - r) * (q - r) < 0.0) ? 1 : 0;
}

/// One coordinate trajectory together with a sorted copy.
class CoordinateSlice {
public:
    explicit CoordinateSlice(std::span<const double> values)
        : values_(values.begin(), values.end()), sorted_(values_) {
        std::sort(sorted_.begin(), sorted_.end());
    }

    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> sorted() const noexcept { return sorted_; }

    /// Number of values strictly inside (lo, hi).
    std::size_t count_strictly_between(double lo, double hi) const noexcept {
        if (!(lo < hi)) return 0;
        const auto first = std::upper_bound(sorted_.begin(), sorted_.end(), lo);
        const auto last = std::lower_bound(sorted_.begin(), sorted_.end(), hi);
        return last > first ? static_cast<std::size_t>(last - first) : 0;
    }

private:
    std::vector<double> values_;
    std::vector<double> sorted_;
};

/// Pooled-anchor kernel for one pair of time indices (0-based).
inline double pooled_pair_kernel(const CoordinateSlice& slice, std::size_t i, std::size_t j) {
    const std::size_t n = slice.size();
    if (i == j) throw std::domain_error("pooled_pair_kernel: i == j (diagonal is defined as 0)");
    if (i >= n || j >= n) throw std::domain_error("pooled_pair_kernel: index out of range");
    const double a = slice.values()[i];
    const double b = slice.values()[j];
    const std::size_t c = slice.count_strictly_between(std::min(a, b), std::max(a, b));
    return static_cast<double>(c) / static_cast<double>(n);
}

/// Symmetric N x N matrix of anchor counts; entry(i,j) = count(i,j) / N.
class PairKernelMatrix {
public:
    PairKernelMatrix() = default;
    explicit PairKernelMatrix(std::size_t n) : n_(n), counts_(n * n, 0) {}

    std::size_t size() const noexcept { return n_; }
    std::int32_t count(std::size_t i, std::size_t j) const noexcept { return counts_[i * n_ + j]; }
    double entry(std::size_t i, std::size_t j) const noexcept {
        return static_cast<double>(count(i, j)) / static_cast<double>(n_);
    }
    void set_count(std::size_t i, std::size_t j, std::int32_t c) noexcept {
        counts_[i * n_ + j] = c;
        counts_[j * n_ + i] = c;
    }
    std::span<const std::int32_t> counts() const noexcept { return counts_; }

private:
    std::size_t n_ = 0;
    std::vector<std::int32_t> counts_;
};

namespace detail {

/// Reusable buffers for the per-coordinate pipeline.
struct KernelWorkspace {
    std::vector<double> sorted;
    std::vector<std::int32_t> less;   // #{r : z_r <  z_i}
    std::vector<std::int32_t> leq;    // #{r : z_r <= z_i}
    std::vector<std::int32_t> counts; // N x N row-major
};

inline void fill_counts(std::span<const double> z, KernelWorkspace& ws) {
    const std::size_t n = z.size();
    ws.sorted.assign(z.begin(), z.end());
    std::sort(ws.sorted.begin(), ws.sorted.end());
    ws.less.resize(n);
    ws.leq.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ws.less[i] = static_cast<std::int32_t>(
            std::lower_bound(ws.sorted.begin(), ws.sorted.end(), z[i]) - ws.sorted.begin());
        ws.leq[i] = static_cast<std::int32_t>(
            std::upper_bound(ws.sorted.begin(), ws.sorted.end(), z[i]) - ws.sorted.begin());
    }
    ws.counts.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            std::int32_t c = 0;
            if (z[i] < z[j]) c = ws.less[j] - ws.leq[i];
            else if (z[j] < z[i]) c = ws.less[i] - ws.leq[j];
            ws.counts[i * n + j] = c;
            ws.counts[j * n + i] = c;
        }
    }
}

/// xi(t) from the exact integer block sums: cross = sum over i<=t<j (unordered),
/// within_x / within_y = sums over ordered pairs i != j on each side.
inline double xi_from_block_sums(std::int64_t cross, std::int64_t within_x, std::int64_t within_y,
                                 std::size_t t, std::size_t n) noexcept {
    const double nt = static_cast<double>(t);
    const double nr = static_cast<double>(n - t);
    const double term_xy = 2.0 * static_cast<double>(cross) / (nt * nr);
    const double term_xx = static_cast<double>(within_x) / (nt * (nt - 1.0));
    const double term_yy = static_cast<double>(within_y) / (nr * (nr - 1.0));
    return (term_xy - term_xx - term_yy) / static_cast<double>(n);
}

/// Sweeps t = 2..N-2 over a row-major N x N count matrix; writes N-3 values.
inline void sweep_splits(std::span<const std::int32_t> counts, std::size_t n, std::span<double> out) {
    std::int64_t within_x = 0;
    std::int64_t within_y = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) within_y += counts[i * n + j];
    std::int64_t cross = 0;
    // Move row m from the right block to the left block; left then holds m+1 rows.
    for (std::size_t m = 0; m + 2 < n; ++m) {
        const std::int32_t* row = counts.data() + m * n;
        std::int64_t to_left = 0, to_right = 0;
        for (std::size_t i = 0; i < m; ++i) to_left += row[i];
        for (std::size_t j = m + 1; j < n; ++j) to_right += row[j];
        within_x += 2 * to_left;
        within_y -= 2 * to_right;
        cross += to_right - to_left;
        const std::size_t t = m + 1;
        if (t >= 2) out[t - 2] = xi_from_block_sums(cross, within_x, within_y, t, n);
    }
}

}  // namespace detail

/// Batched pooled_pair_kernel for all pairs; O(N log N + N^2).
inline PairKernelMatrix build_pair_kernel(const CoordinateSlice& slice) {
    const std::size_t n = slice.size();
    PairKernelMatrix pk(n);
    if (n < 2) return pk;
    detail::KernelWorkspace ws;
    detail::fill_counts(slice.values(), ws);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pk.set_count(i, j, ws.counts[i * n + j]);
    return pk;
}

/// Split profile xi(t), t in {2, ..., N-2}, of one coordinate.
inline std::vector<double> xi_profile(const PairKernelMatrix& pk) {
    const std::size_t n = pk.size();
    if (n < 4) throw input_error("xi_profile requires N >= 4");
    std::vector<double> out(n - 3);
    detail::sweep_splits(pk.counts(), n, out);
    return out;
}

/// The admissible split set {2, ..., N-2}.
inline std::vector<std::size_t> split_set(std::size_t n) {
    std::vector<std::size_t> t;
    for (std::size_t s = 2; s + 2 <= n; ++s) t.push_back(s);
    return t;
}

/// d x |T| matrix with entry (k, t) = xi_k(t); rows are contiguous.
class XiMatrix {
public:
    XiMatrix() = default;
    XiMatrix(std::size_t n_obs, std::size_t n_dims)
        : n_obs_(n_obs), n_dims_(n_dims), n_splits_(n_obs >= 4 ? n_obs - 3 : 0),
          values_(n_dims * n_splits_, 0.0) {}

    std::size_t n_obs() const noexcept { return n_obs_; }
    std::size_t n_dims() const noexcept { return n_dims_; }
    std::size_t n_splits() const noexcept { return n_splits_; }
    std::vector<std::size_t> splits() const { return split_set(n_obs_); }

    /// Entry for coordinate k and split index s (s = t - 2).
    double operator()(std::size_t k, std::size_t s) const noexcept { return values_[k * n_splits_ + s]; }
    double& operator()(std::size_t k, std::size_t s) noexcept { return values_[k * n_splits_ + s]; }

    std::span<const double> row(std::size_t k) const noexcept {
        return {values_.data() + k * n_splits_, n_splits_};
    }
    std::span<double> row(std::size_t k) noexcept { return {values_.data() + k * n_splits_, n_splits_}; }

    /// (xi_1(t), ..., xi_d(t)) for split index s.
    std::vector<double> column(std::size_t s) const {
        std::vector<double> c(n_dims_);
        for (std::size_t k = 0; k < n_dims_; ++k) c[k] = (*this)(k, s);
        return c;
    }

    void scale(double c) noexcept {
        for (auto& v : values_) v *= c;
    }

private:
    std::size_t n_obs_ = 0;
    std::size_t n_dims_ = 0;
    std::size_t n_splits_ = 0;
    std::vector<double> values_;
};

/// Per-coordinate split statistics for the whole sample. Rows are computed
/// independently (in parallel when enabled); output does not depend on the
/// thread count.
inline XiMatrix xi_matrix(const SampleMatrix& sample) {
    const std::size_t n = sample.n_obs();
    if (n < 4) throw input_error("need at least 4 observations (N >= 4), got " + std::to_string(n));
    const std::size_t d = sample.n_dims();
    XiMatrix xi(n, d);
    constexpr std::size_t kChunk = 256;
    const std::size_t chunks = (d + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        detail::KernelWorkspace ws;
        const std::size_t end = std::min(d, (c + 1) * kChunk);
        for (std::size_t k = c * kChunk; k < end; ++k) {
            detail::fill_counts(sample.column(k), ws);
            detail::sweep_splits(ws.counts, n, xi.row(k));
        }
    });
    return xi;
}

}  // namespace dak
