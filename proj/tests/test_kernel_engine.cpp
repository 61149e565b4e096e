#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "dak/core/parallel.hpp"
#include "dak/core/rng.hpp"
#include "dak/kernel_engine.hpp"
#include "support/oracles.hpp"

using namespace dak;

namespace {

CoordinateSlice slice_of(std::vector<double> v) { return CoordinateSlice(v); }

// xi(t) from naive integer block sums over the count matrix, same final formula.
std::vector<double> naive_xi(const PairKernelMatrix& pk) {
    const std::size_t n = pk.size();
    std::vector<double> out;
    for (std::size_t t = 2; t + 2 <= n; ++t) {
        std::int64_t cross = 0, wx = 0, wy = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const bool li = i < t, lj = j < t;
                if (li && lj) wx += pk.count(i, j);
                else if (!li && !lj) wy += pk.count(i, j);
                else if (li) cross += pk.count(i, j);
            }
        const double a = static_cast<double>(t), b = static_cast<double>(n - t);
        out.push_back((2.0 * static_cast<double>(cross) / (a * b) - static_cast<double>(wx) / (a * (a - 1.0)) -
                       static_cast<double>(wy) / (b * (b - 1.0))) /
                      static_cast<double>(n));
    }
    return out;
}

std::vector<double> random_column(Rng& rng, std::size_t n, bool with_ties) {
    std::vector<double> v(n);
    for (auto& x : v) x = with_ties ? static_cast<double>(rng.below(4)) : rng.normal();
    return v;
}

}  // namespace

TEST_CASE("angular indicator is one only for anchors strictly inside") {
    CHECK(angular_indicator(1, 3, 2) == 1);
    CHECK(angular_indicator(1, 3, 1) == 0);
    CHECK(angular_indicator(1, 3, 3) == 0);
    CHECK(angular_indicator(1, 3, 0) == 0);
    CHECK(angular_indicator(3, 1, 2) == 1);
}

TEST_CASE("pooled pair kernel counts strict interior anchors") {
    const auto s = slice_of({10, 20, 30, 40});
    CHECK(pooled_pair_kernel(s, 0, 3) == 0.5);
    CHECK(pooled_pair_kernel(s, 0, 1) == 0.0);
    CHECK(pooled_pair_kernel(slice_of({5, 5, 5, 9}), 0, 3) == 0.0);
    CHECK_THROWS_AS(pooled_pair_kernel(s, 1, 1), std::domain_error);
    CHECK_THROWS_AS(pooled_pair_kernel(s, 0, 4), std::domain_error);
}

TEST_CASE("build_pair_kernel matches direct counts") {
    const auto pk = build_pair_kernel(slice_of({10, 20, 30, 40}));
    CHECK(pk.entry(0, 3) == 0.5);
    CHECK(pk.entry(0, 2) == 0.25);
    CHECK(pk.entry(1, 2) == 0.0);

    const auto two = build_pair_kernel(slice_of({-3, 8}));
    CHECK(two.entry(0, 1) == 0.0);
    const auto flat = build_pair_kernel(slice_of({2, 2, 2, 2, 2}));
    for (auto c : flat.counts()) CHECK(c == 0);
}

TEST_CASE("pair kernel invariants on random columns with and without ties") {
    Rng rng(11);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 2 + rng.below(15);
        const auto col = random_column(rng, n, rep % 2 == 1);
        const CoordinateSlice s(col);
        const auto pk = build_pair_kernel(s);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(pk.count(i, i) == 0);
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(pk.count(i, j) == pk.count(j, i));
                CHECK(pk.count(i, j) >= 0);
                CHECK(pk.count(i, j) <= static_cast<std::int32_t>(n) - 2);
                if (i != j) {
                    CHECK(pk.entry(i, j) == pooled_pair_kernel(s, i, j));
                    int direct = 0;
                    for (std::size_t r = 0; r < n; ++r) direct += angular_indicator(col[i], col[j], col[r]);
                    CHECK(pk.count(i, j) == direct);
                }
            }
        }
    }
}

TEST_CASE("rank shortcut on distinct values") {
    Rng rng(12);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 3 + rng.below(20);
        const auto col = random_column(rng, n, false);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return col[a] < col[b]; });
        std::vector<long> rank(n);
        for (std::size_t r = 0; r < n; ++r) rank[order[r]] = static_cast<long>(r);
        const auto pk = build_pair_kernel(CoordinateSlice(col));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) CHECK(pk.count(i, j) == std::labs(rank[i] - rank[j]) - 1);
    }
}

TEST_CASE("strictly increasing maps leave the kernel unchanged") {
    Rng rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 4 + rng.below(12);
        auto col = random_column(rng, n, rep % 3 == 0);
        std::vector<double> mapped(n);
        std::transform(col.begin(), col.end(), mapped.begin(), [](double x) { return std::exp(0.5 * x) + x * x * x; });
        const auto a = build_pair_kernel(CoordinateSlice(col));
        const auto b = build_pair_kernel(CoordinateSlice(mapped));
        CHECK(std::equal(a.counts().begin(), a.counts().end(), b.counts().begin()));
    }
}

TEST_CASE("xi_profile on hand-built kernels") {
    PairKernelMatrix zero(7);
    for (double v : xi_profile(zero)) CHECK(v == 0.0);

    // N = 4, cross entries c = 1/4, within entries 0: xi(2) = 2c.
    PairKernelMatrix pk(4);
    pk.set_count(0, 2, 1);
    pk.set_count(0, 3, 1);
    pk.set_count(1, 2, 1);
    pk.set_count(1, 3, 1);
    const auto xi = xi_profile(pk);
    REQUIRE(xi.size() == 1);
    CHECK(xi[0] == 2.0 * 0.25);

    CHECK_THROWS_AS(xi_profile(PairKernelMatrix(3)), input_error);
}

TEST_CASE("incremental sweep is bit-identical to naive block sums") {
    Rng rng(14);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 4 + rng.below(30);
        // random symmetric count matrix, not necessarily realizable by data
        PairKernelMatrix pk(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pk.set_count(i, j, static_cast<std::int32_t>(rng.below(n - 1)));
        const auto fast = xi_profile(pk);
        const auto slow = naive_xi(pk);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t s = 0; s < fast.size(); ++s) CHECK(fast[s] == slow[s]);
    }
}

TEST_CASE("xi is bounded by 2 in absolute value") {
    Rng rng(15);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 4 + rng.below(25);
        const auto col = random_column(rng, n, rep % 2 == 0);
        for (double v : xi_profile(build_pair_kernel(CoordinateSlice(col)))) CHECK(std::abs(v) <= 2.0);
    }
    // extreme: two well separated blocks
    std::vector<double> col(20);
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = i < 10 ? static_cast<double>(i) : 100.0 + i;
    for (double v : xi_profile(build_pair_kernel(CoordinateSlice(col)))) CHECK(std::abs(v) <= 2.0);
}

TEST_CASE("xi_matrix rows equal per-column profiles") {
    auto z = oracle::normal_sample(9, 4, 16);
    for (std::size_t i = 0; i < 9; ++i) z.set(i, 3, z(i, 1));  // duplicated column
    for (std::size_t i = 0; i < 9; ++i) z.set(i, 2, std::atan(z(i, 0)) * 5.0 - 1.0);  // monotone image of column 0
    const auto xi = xi_matrix(z);
    REQUIRE(xi.n_dims() == 4);
    REQUIRE(xi.n_splits() == 6);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto expect = xi_profile(build_pair_kernel(CoordinateSlice(z.column(k))));
        for (std::size_t s = 0; s < 6; ++s) CHECK(xi(k, s) == expect[s]);
    }
    for (std::size_t s = 0; s < 6; ++s) {
        CHECK(xi(1, s) == xi(3, s));
        CHECK(xi(0, s) == xi(2, s));
    }
    CHECK_THROWS_AS(xi_matrix(SampleMatrix(3, 2)), input_error);
}

TEST_CASE("xi_matrix does not depend on the thread count") {
    const auto z = oracle::normal_sample(12, 1500, 17);
    set_thread_count(1);
    const auto a = xi_matrix(z);
    set_thread_count(4);
    const auto b = xi_matrix(z);
    set_thread_count(0);
    for (std::size_t k = 0; k < z.n_dims(); ++k)
        for (std::size_t s = 0; s < a.n_splits(); ++s) REQUIRE(a(k, s) == b(k, s));
}
