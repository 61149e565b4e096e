#pragma once

// Studentization and thresholds for the offline test.
//
// The null covariance of the scan factorizes as K(N) * V, so only one scalar
// needs estimating. It is recovered per split from the coordinate sequence
// xi_1(t), ..., xi_d(t) with a Bartlett HAC estimator, divided by K_tt, and
// aggregated by the median over splits. The threshold is the (1 - alpha)
// quantile of max_t Z_t with Z ~ N(0, K).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dak/core/error.hpp"
#include "dak/core/parallel.hpp"
#include "dak/core/rng.hpp"
#include "dak/core/sample_matrix.hpp"
#include "dak/scan.hpp"
#include "dak/theory.hpp"

namespace dak {

/// Largest L with L^3 <= d.
inline std::size_t integer_cube_root(std::size_t d) noexcept {
    auto r = static_cast<std::size_t>(std::cbrt(static_cast<double>(d)));
    while (r > 0 && r * r * r > d) --r;
    while ((r + 1) * (r + 1) * (r + 1) <= d) ++r;
    return r;
}

struct HacConfig {
    std::optional<std::size_t> explicit_bandwidth;

    /// L(d): the override if set, else floor(d^{1/3}); clamped to [1, d - 1].
    std::size_t bandwidth(std::size_t d) const {
        if (d < 2) throw degenerate_calibration("HAC needs d >= 2 coordinates, got " + std::to_string(d));
        std::size_t l = explicit_bandwidth ? *explicit_bandwidth : integer_cube_root(d);
        return std::clamp<std::size_t>(l, 1, d - 1);
    }
};

/// gamma_r = (1/d) sum_{k < d - r} (x_k - m)(x_{k+r} - m).
inline double autocovariance(std::span<const double> x, double mean, std::size_t r) {
    const std::size_t d = x.size();
    if (r >= d) throw std::domain_error("autocovariance: lag must be < d");
    double s = 0.0;
    for (std::size_t k = 0; k + r < d; ++k) s += (x[k] - mean) * (x[k + r] - mean);
    return s / static_cast<double>(d);
}

/// gamma_0 + 2 sum_{r=1}^{L} (1 - r/(L+1)) gamma_r. Not floored at zero.
inline double hac_lrv(std::span<const double> x, double mean, std::size_t bandwidth) {
    if (bandwidth < 1 || bandwidth >= x.size()) {
        throw std::domain_error("hac_lrv: need 1 <= L < d");
    }
    double v = autocovariance(x, mean, 0);
    const double denom = static_cast<double>(bandwidth + 1);
    for (std::size_t r = 1; r <= bandwidth; ++r) {
        v += 2.0 * (1.0 - static_cast<double>(r) / denom) * autocovariance(x, mean, r);
    }
    return v;
}

/// Median; the mean of the two middle values for even length.
inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of an empty sequence");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

struct CalibrationModel {
    std::size_t n_obs = 0;
    std::size_t n_dims = 0;
    std::size_t bandwidth = 0;
    std::string sigma_method = "hac";
    double sigma2_long = 0.0;  // median of per_split_sigma2, sign kept
    double sigma_long = 0.0;   // sqrt(|sigma2_long|)
    std::vector<double> per_split_sigma2;
    bool degenerate = false;
    std::vector<std::string> warnings;

    std::optional<double> c_alpha;
    double alpha = 0.05;
    std::size_t mc_draws = 0;
    double k_min_eigenvalue = 0.0;
    std::uint64_t seed = 0;

    bool complete() const noexcept { return c_alpha.has_value() && !degenerate && sigma_long > 0.0; }
};

/// Per-split HAC plug-in, median-aggregated. Threshold fields stay unset.
inline CalibrationModel sigma_long_plugin(const ScanProfile& profile, const HacConfig& cfg = {}) {
    const std::size_t n = profile.n_obs;
    const std::size_t d = profile.n_dims;
    const std::size_t l = cfg.bandwidth(d);
    CalibrationModel m;
    m.n_obs = n;
    m.n_dims = d;
    m.bandwidth = l;
    m.per_split_sigma2.resize(profile.split_set.size());
    for (std::size_t s = 0; s < profile.split_set.size(); ++s) {
        const std::size_t t = profile.split_set[s];
        const auto col = profile.xi.column(s);
        const double lrv = hac_lrv(col, profile.w_values[s], l);
        m.per_split_sigma2[s] = lrv / covariance_entry(n, t, t);
    }
    m.sigma2_long = median(m.per_split_sigma2);
    m.sigma_long = std::sqrt(std::abs(m.sigma2_long));
    if (m.sigma2_long < 0.0) {
        m.warnings.push_back("median HAC estimate is negative; using sqrt(|sigma2|)");
    }
    if (!(m.sigma_long > 0.0)) {
        m.degenerate = true;
        m.warnings.push_back("long-run variance estimate is zero; the statistic cannot be studentized");
    }
    return m;
}

/// Draws per random substream in mc_max_draws.
inline constexpr std::size_t kDrawsPerStream = 8192;
inline constexpr std::size_t kDefaultMcDraws = 200000;

/// max_t Z_t for n_draws vectors Z = G e, e iid N(0,1). Block b of
/// kDrawsPerStream draws uses substream derive_seed(seed, {b}), so the output
/// is independent of the thread count.
inline std::vector<double> mc_max_draws(const CovarianceTemplate& tpl, std::size_t n_draws, std::uint64_t seed) {
    const auto m = static_cast<Eigen::Index>(tpl.dim());
    std::vector<double> out(n_draws);
    const std::size_t blocks = (n_draws + kDrawsPerStream - 1) / kDrawsPerStream;
    parallel_for(blocks, [&](std::size_t b) {
        Rng rng(derive_seed(seed, {b}));
        const std::size_t begin = b * kDrawsPerStream;
        const std::size_t count = std::min(n_draws, begin + kDrawsPerStream) - begin;
        Eigen::MatrixXd e(m, static_cast<Eigen::Index>(count));
        for (Eigen::Index j = 0; j < e.cols(); ++j)
            for (Eigen::Index i = 0; i < m; ++i) e(i, j) = rng.normal();
        const Eigen::MatrixXd z = tpl.factor() * e;
        for (Eigen::Index j = 0; j < z.cols(); ++j) out[begin + static_cast<std::size_t>(j)] = z.col(j).maxCoeff();
    });
    return out;
}

/// Upper empirical quantile: order statistic ceil((1 - alpha) n) (1-based).
inline double upper_quantile(std::vector<double> draws, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
    if (draws.empty()) throw std::invalid_argument("upper_quantile: no draws");
    const double pos = (1.0 - alpha) * static_cast<double>(draws.size());
    auto idx = static_cast<std::size_t>(std::ceil(pos - 1e-9));
    idx = std::clamp<std::size_t>(idx, 1, draws.size()) - 1;
    std::nth_element(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(idx), draws.end());
    return draws[idx];
}

inline double mc_threshold(const CovarianceTemplate& tpl, double alpha, std::size_t n_draws, std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
    if (n_draws < 1000) throw std::domain_error("mc_threshold: need at least 1000 draws");
    return upper_quantile(mc_max_draws(tpl, n_draws, seed), alpha);
}

struct TestOutcome {
    double s_d = 0.0;
    bool reject = false;
    ChangePointEstimate tau_hat;
    double threshold = 0.0;
};

/// S_d = max_t sqrt(d) W(t) / sigma_long, rejecting when S_d > c_alpha.
inline TestOutcome run_test(const ScanProfile& profile, const CalibrationModel& model) {
    if (model.degenerate || !(model.sigma_long > 0.0)) {
        throw degenerate_calibration("sigma_long is zero; the test cannot be studentized");
    }
    if (!model.c_alpha) throw std::invalid_argument("run_test: calibration has no threshold");
    TestOutcome out;
    out.tau_hat = locate(profile);
    const double root_d = std::sqrt(static_cast<double>(profile.n_dims));
    double best = -std::numeric_limits<double>::infinity();
    for (double w : profile.w_values) best = std::max(best, root_d * w / model.sigma_long);
    out.s_d = best;
    out.threshold = *model.c_alpha;
    out.reject = out.s_d > out.threshold;
    return out;
}

/// Full offline calibration on the sample itself: HAC plug-in plus threshold.
inline CalibrationModel calibrate(const ScanProfile& profile, double alpha, const HacConfig& cfg,
                                  std::size_t n_draws, std::uint64_t seed) {
    CalibrationModel m = sigma_long_plugin(profile, cfg);
    const CovarianceTemplate tpl(profile.n_obs);
    m.alpha = alpha;
    m.mc_draws = n_draws;
    m.seed = seed;
    m.k_min_eigenvalue = tpl.min_eigenvalue();
    m.c_alpha = mc_threshold(tpl, alpha, n_draws, seed);
    return m;
}

/// Pooled standard deviation of sqrt(d) K^{-1/2} W over the given row
/// permutations of the calibration block.
inline double permutation_whitened_sigma(const SampleMatrix& sample, const CovarianceTemplate& tpl,
                                         std::span<const std::vector<std::size_t>> permutations) {
    if (sample.n_obs() != tpl.n_obs()) {
        throw input_error("permutation_whitened_sigma: template built for N=" + std::to_string(tpl.n_obs()) +
                          " but the block has " + std::to_string(sample.n_obs()) + " rows");
    }
    if (permutations.empty()) throw std::invalid_argument("permutation_whitened_sigma: no permutations");
    const Eigen::MatrixXd whiten = tpl.inverse_sqrt();
    const double root_d = std::sqrt(static_cast<double>(sample.n_dims()));
    const auto m = static_cast<Eigen::Index>(tpl.dim());
    std::vector<double> pooled;
    pooled.reserve(permutations.size() * tpl.dim());
    for (const auto& perm : permutations) {
        const SampleMatrix shuffled = sample.permute_rows(perm);
        const auto w = average_rows(xi_matrix(shuffled));
        const Eigen::VectorXd u = root_d * (whiten * Eigen::Map<const Eigen::VectorXd>(w.data(), m));
        pooled.insert(pooled.end(), u.data(), u.data() + m);
    }
    if (pooled.size() < 2) throw std::invalid_argument("permutation_whitened_sigma: need at least two pooled entries");
    double mean = 0.0;
    for (double v : pooled) mean += v;
    mean /= static_cast<double>(pooled.size());
    double ss = 0.0;
    for (double v : pooled) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(pooled.size() - 1));
}

/// Seeded variant: permutation p is a Fisher-Yates shuffle on substream (seed, p).
inline double permutation_whitened_sigma(const SampleMatrix& sample, const CovarianceTemplate& tpl,
                                         std::size_t n_perm, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> perms(n_perm);
    for (std::size_t p = 0; p < n_perm; ++p) {
        Rng rng(derive_seed(seed, {p}));
        auto& perm = perms[p];
        perm.resize(sample.n_obs());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    }
    return permutation_whitened_sigma(sample, tpl, perms);
}

inline void to_json(nlohmann::json& j, const CalibrationModel& m) {
    j = nlohmann::json{{"n_obs", m.n_obs},
                       {"n_dims", m.n_dims},
                       {"bandwidth", m.bandwidth},
                       {"sigma_method", m.sigma_method},
                       {"sigma2_long", m.sigma2_long},
                       {"sigma_long", m.sigma_long},
                       {"per_split_sigma2", m.per_split_sigma2},
                       {"degenerate", m.degenerate},
                       {"warnings", m.warnings},
                       {"c_alpha", m.c_alpha ? nlohmann::json(*m.c_alpha) : nlohmann::json(nullptr)},
                       {"alpha", m.alpha},
                       {"mc_draws", m.mc_draws},
                       {"k_min_eigenvalue", m.k_min_eigenvalue},
                       {"seed", m.seed}};
}

inline void from_json(const nlohmann::json& j, CalibrationModel& m) {
    j.at("n_obs").get_to(m.n_obs);
    j.at("n_dims").get_to(m.n_dims);
    j.at("bandwidth").get_to(m.bandwidth);
    m.sigma_method = j.value("sigma_method", std::string("hac"));
    j.at("sigma2_long").get_to(m.sigma2_long);
    j.at("sigma_long").get_to(m.sigma_long);
    j.at("per_split_sigma2").get_to(m.per_split_sigma2);
    m.degenerate = j.value("degenerate", false);
    m.warnings = j.value("warnings", std::vector<std::string>{});
    const auto& c = j.at("c_alpha");
    if (c.is_null()) m.c_alpha.reset();
    else m.c_alpha = c.get<double>();
    j.at("alpha").get_to(m.alpha);
    j.at("mc_draws").get_to(m.mc_draws);
    j.at("k_min_eigenvalue").get_to(m.k_min_eigenvalue);
    j.at("seed").get_to(m.seed);
}

}  // namespace dak
