#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dak/core/error.hpp"

namespace dak {

/// N x d block of observations; row = time index, column = coordinate.
///
/// Storage is column-major because every hot loop in the library works one
/// coordinate at a time. All entries are finite; this is checked on
/// construction and on every write through set().
class SampleMatrix {
public:
    SampleMatrix() = default;

    /// Zero-filled N x d matrix.
    SampleMatrix(std::size_t n_obs, std::size_t n_dims)
        : n_obs_(n_obs), n_dims_(n_dims), values_(n_obs * n_dims, 0.0) {}

    /// Builds from row vectors. Throws input_error on ragged rows or
    /// non-finite entries.
    static SampleMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return SampleMatrix{};
        const std::size_t d = rows.front().size();
        SampleMatrix m(rows.size(), d);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != d) {
                throw input_error("row " + std::to_string(i + 1) + " has " +
                                  std::to_string(rows[i].size()) + " values, expected " +
                                  std::to_string(d));
            }
            for (std::size_t k = 0; k < d; ++k) m.set(i, k, rows[i][k]);
        }
        return m;
    }

    /// Builds from row-major contiguous data.
    static SampleMatrix from_row_major(std::size_t n_obs, std::size_t n_dims,
                                       std::span<const double> data) {
        if (data.size() != n_obs * n_dims) {
            throw input_error("row-major buffer size does not match N*d");
        }
        SampleMatrix m(n_obs, n_dims);
        for (std::size_t i = 0; i < n_obs; ++i)
            for (std::size_t k = 0; k < n_dims; ++k) m.set(i, k, data[i * n_dims + k]);
        return m;
    }

    std::size_t n_obs() const noexcept { return n_obs_; }
    std::size_t n_dims() const noexcept { return n_dims_; }
    bool empty() const noexcept { return values_.empty(); }

    double operator()(std::size_t i, std::size_t k) const noexcept {
        return values_[k * n_obs_ + i];
    }

    void set(std::size_t i, std::size_t k, double v) {
        if (!std::isfinite(v)) {
            throw input_error("non-finite value at row " + std::to_string(i + 1) +
                              ", column " + std::to_string(k + 1));
        }
        values_[k * n_obs_ + i] = v;
    }

    /// Coordinate trajectory (Z_{1,k}, ..., Z_{N,k}).
    std::span<const double> column(std::size_t k) const noexcept {
        return {values_.data() + k * n_obs_, n_obs_};
    }

    std::vector<double> row(std::size_t i) const {
        std::vector<double> r(n_dims_);
        for (std::size_t k = 0; k < n_dims_; ++k) r[k] = (*this)(i, k);
        return r;
    }

    /// New matrix whose row i is row perm[i] of this one.
    SampleMatrix permute_rows(std::span<const std::size_t> perm) const {
        if (perm.size() != n_obs_) throw input_error("permutation length must equal N");
        SampleMatrix out(n_obs_, n_dims_);
        for (std::size_t k = 0; k < n_dims_; ++k)
            for (std::size_t i = 0; i < n_obs_; ++i)
                out.values_[k * n_obs_ + i] = values_[k * n_obs_ + perm[i]];
        return out;
    }

    friend bool operator==(const SampleMatrix&, const SampleMatrix&) = default;

private:
    std::size_t n_obs_ = 0;
    std::size_t n_dims_ = 0;
    std::vector<double> values_;
};

}  // namespace dak
