#pragma once

// Deterministic quantities of the scan under the single-change model: the
// shape function of the mean profile, the null covariance template K(N), the
// signal factor delta_d (closed forms and numeric routes) and the dilogarithm.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dak/core/error.hpp"
#include "dak/core/rng.hpp"
#include "dak/kernel_engine.hpp"

namespace dak {

// ---------------------------------------------------------------------------
// Shape of the mean profile

/// Lambda_{tau,N}(t): mean of W_d(t) divided by delta_d. Rises to 1 at
/// t = tau and decays afterwards.
inline double shape(std::size_t tau, std::size_t n, std::size_t t) {
    if (n < 4 || tau < 2 || tau + 2 > n) throw std::domain_error("shape: need 2 <= tau <= N-2");
    if (t < 1 || t > n) throw std::domain_error("shape: need 1 <= t <= N");
    const double N = static_cast<double>(n);
    const double T = static_cast<double>(tau);
    const double x = static_cast<double>(t);
    if (t <= tau) return ((N - T) * (N - T - 1.0)) / ((N - x) * (N - x - 1.0));
    return (T * (T - 1.0)) / (x * (x - 1.0));
}

/// Lambda over t = 1..N (index 0 holds t = 1).
inline std::vector<double> shape_profile(std::size_t tau, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t t = 1; t <= n; ++t) v[t - 1] = shape(tau, n, t);
    return v;
}

/// 1 - max_{t in T, t != tau} Lambda(t).
inline double separation_gap(std::size_t tau, std::size_t n) {
    double best = 0.0;
    for (std::size_t t = 2; t + 2 <= n; ++t)
        if (t != tau) best = std::max(best, shape(tau, n, t));
    return 1.0 - best;
}

// ---------------------------------------------------------------------------
// Null covariance template

/// K_{t,t'} for t <= t' (symmetric otherwise).
inline double covariance_entry(std::size_t n, std::size_t t, std::size_t t2) {
    if (t > t2) std::swap(t, t2);
    const double N = static_cast<double>(n);
    const double a = static_cast<double>(t);
    const double b = static_cast<double>(t2);
    return 2.0 * (N - 1.0) * (N - 2.0) / (b * (b - 1.0) * (N - a) * (N - a - 1.0));
}

/// K(N) over the split set, with a factor G (G G^T = K) for Gaussian sampling.
class CovarianceTemplate {
public:
    explicit CovarianceTemplate(std::size_t n) : n_(n) {
        if (n < 4) throw std::domain_error("covariance_template requires N >= 4");
        splits_ = split_set(n);
        const auto m = static_cast<Eigen::Index>(splits_.size());
        matrix_.resize(m, m);
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b < m; ++b)
                matrix_(a, b) = covariance_entry(n, splits_[a], splits_[b]);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(matrix_);
        if (eig.info() != Eigen::Success) {
            throw data_integrity_error("eigendecomposition of K(" + std::to_string(n) + ") failed");
        }
        eigenvalues_ = eig.eigenvalues();
        eigenvectors_ = eig.eigenvectors();
        min_eig_ = eigenvalues_.minCoeff();
        max_eig_ = eigenvalues_.maxCoeff();
        if (min_eig_ < -1e-10 * max_eig_) {
            throw data_integrity_error("K(" + std::to_string(n) +
                                       ") is not positive semidefinite: min eigenvalue " +
                                       std::to_string(min_eig_));
        }
        if (!try_cholesky()) {
            eigen_fallback_ = true;
            Eigen::VectorXd root = eigenvalues_.cwiseMax(0.0).cwiseSqrt();
            factor_ = eigenvectors_ * root.asDiagonal();
        }
    }

    std::size_t n_obs() const noexcept { return n_; }
    std::size_t dim() const noexcept { return splits_.size(); }
    const std::vector<std::size_t>& splits() const noexcept { return splits_; }
    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
    const Eigen::MatrixXd& factor() const noexcept { return factor_; }
    double min_eigenvalue() const noexcept { return min_eig_; }
    double max_eigenvalue() const noexcept { return max_eig_; }
    bool used_eigen_fallback() const noexcept { return eigen_fallback_; }

    /// K_{tt} for split index s.
    double diagonal(std::size_t s) const { return matrix_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)); }

    /// Symmetric K^{-1/2}. Throws data_integrity_error if K is numerically singular.
    Eigen::MatrixXd inverse_sqrt() const {
        if (!(min_eig_ > 1e-12 * max_eig_)) {
            throw data_integrity_error("K(" + std::to_string(n_) + ") is singular; cannot whiten");
        }
        Eigen::VectorXd inv_root = eigenvalues_.cwiseSqrt().cwiseInverse();
        return eigenvectors_ * inv_root.asDiagonal() * eigenvectors_.transpose();
    }

private:
    // Plain Cholesky; gives up when a pivot drops below 1e-12 * trace / |T|.
    bool try_cholesky() {
        const auto m = matrix_.rows();
        const double floor = 1e-12 * matrix_.trace() / static_cast<double>(m);
        factor_ = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            double pivot = matrix_(j, j);
            for (Eigen::Index k = 0; k < j; ++k) pivot -= factor_(j, k) * factor_(j, k);
            if (!(pivot > floor)) return false;
            const double root = std::sqrt(pivot);
            factor_(j, j) = root;
            for (Eigen::Index i = j + 1; i < m; ++i) {
                double s = matrix_(i, j);
                for (Eigen::Index k = 0; k < j; ++k) s -= factor_(i, k) * factor_(j, k);
                factor_(i, j) = s / root;
            }
        }
        return true;
    }

    std::size_t n_;
    std::vector<std::size_t> splits_;
    Eigen::MatrixXd matrix_;
    Eigen::MatrixXd factor_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenvectors_;
    double min_eig_ = 0.0;
    double max_eig_ = 0.0;
    bool eigen_fallback_ = false;
};

inline CovarianceTemplate covariance_template(std::size_t n) { return CovarianceTemplate(n); }

// ---------------------------------------------------------------------------
// Special functions

/// Li_2(x) for x in [0, 1], absolute error below 1e-15 in practice.
/// Direct series for x <= 1/2, reflection Li2(x) + Li2(1-x) = pi^2/6 - ln x ln(1-x)
/// above.
inline double dilog(double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("dilog: argument must lie in [0, 1]");
    constexpr double zeta2 = std::numbers::pi * std::numbers::pi / 6.0;
    if (x == 0.0) return 0.0;
    if (x == 1.0) return zeta2;
    auto series = [](double y) {
        double sum = 0.0;
        double power = y;
        for (int m = 1; m < 200; ++m) {
            const double term = power / (static_cast<double>(m) * m);
            sum += term;
            if (term < 1e-18 * sum) break;
            power *= y;
        }
        return sum;
    };
    if (x <= 0.5) return series(x);
    return zeta2 - std::log(x) * std::log1p(-x) - series(1.0 - x);
}

/// Standard normal CDF through erfc.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
inline QuadratureRule gauss_legendre(std::size_t n) {
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged root
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
            const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
            p0 = p1;
            p1 = pk;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

// ---------------------------------------------------------------------------
// Signal factor

enum class SignalMethod { closed_form_gaussian, closed_form_cauchy, numeric_cvm, monte_carlo };

inline const char* to_string(SignalMethod m) {
    switch (m) {
        case SignalMethod::closed_form_gaussian: return "closed_form_gaussian";
        case SignalMethod::closed_form_cauchy: return "closed_form_cauchy";
        case SignalMethod::numeric_cvm: return "numeric_cvm";
        case SignalMethod::monte_carlo: return "monte_carlo";
    }
    return "unknown";
}

struct SignalFactor {
    double value = 0.0;
    SignalMethod method = SignalMethod::numeric_cvm;
    double std_error = 0.0;  // zero for closed forms
};

/// Cauchy(0,1) -> Cauchy(0,lambda): ((N-1)/(N pi^2)) Li2(((lambda-1)/(lambda+1))^2).
inline SignalFactor delta_cauchy_scale(double lambda, std::size_t n) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::domain_error("delta_cauchy_scale: lambda must be > 0");
    if (n < 4) throw std::domain_error("delta_cauchy_scale: N must be >= 4");
    const double r = (lambda - 1.0) / (lambda + 1.0);
    const double N = static_cast<double>(n);
    const double value = (N - 1.0) / (N * std::numbers::pi * std::numbers::pi) * dilog(r * r);
    return {value, SignalMethod::closed_form_cauchy, 0.0};
}

/// Half-width of the truncated domain for the Gaussian-weight quadrature.
/// The neglected mass 2*Phi(-12) is about 3.6e-33.
inline constexpr double kGaussianQuadratureHalfWidth = 12.0;
inline constexpr std::size_t kGaussianQuadraturePoints = 200;

/// E_{Z ~ N(0,1)} (Phi(Z) - Phi(Z - mu))^2 by 200-point Gauss-Legendre.
inline double gaussian_shift_cvm_term(double mu) {
    static const QuadratureRule rule = gauss_legendre(kGaussianQuadraturePoints);
    const double h = kGaussianQuadratureHalfWidth;
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double z = h * rule.nodes[i];
        const double diff = normal_cdf(z) - normal_cdf(z - mu);
        sum += rule.weights[i] * diff * diff * normal_pdf(z);
    }
    return h * sum;
}

/// N(0, I) -> N(mu, I): (2(N-1)/(N d)) sum_k E(Phi(Z) - Phi(Z - mu_k))^2.
inline SignalFactor delta_gaussian_shift(std::span<const double> mu, std::size_t n) {
    if (mu.empty()) throw std::domain_error("delta_gaussian_shift: empty shift vector");
    if (n < 4) throw std::domain_error("delta_gaussian_shift: N must be >= 4");
    double sum = 0.0;
    for (double m : mu) {
        if (!std::isfinite(m)) throw std::domain_error("delta_gaussian_shift: non-finite shift");
        if (m != 0.0) sum += gaussian_shift_cvm_term(m);
    }
    const double N = static_cast<double>(n);
    const double d = static_cast<double>(mu.size());
    return {2.0 * (N - 1.0) / (N * d) * sum, SignalMethod::closed_form_gaussian, 0.0};
}

/// Monte-Carlo estimate of (2(N-1)/(N d)) sum_k integral (F_k - G_k)^2 dF_k.
///
/// cdf_f(k, z), cdf_g(k, z) give the k-th marginal CDFs; sampler(k, rng)
/// draws from the integrating law of coordinate k (F, or G since either may
/// be used). Each coordinate gets its own substream of `seed`.
template <class CdfF, class CdfG, class Sampler>
SignalFactor delta_numeric_cvm(CdfF&& cdf_f, CdfG&& cdf_g, Sampler&& sampler, std::size_t n,
                               std::size_t d, std::size_t n_mc, std::uint64_t seed) {
    if (n_mc < 1) throw std::domain_error("delta_numeric_cvm: n_mc must be >= 1");
    if (d < 1) throw std::domain_error("delta_numeric_cvm: d must be >= 1");
    double mean_sum = 0.0;
    double var_sum = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        Rng rng(derive_seed(seed, {k}));
        double m = 0.0, m2 = 0.0;  // Welford
        for (std::size_t r = 0; r < n_mc; ++r) {
            const double z = sampler(k, rng);
            const double diff = cdf_f(k, z) - cdf_g(k, z);
            const double v = diff * diff;
            const double delta = v - m;
            m += delta / static_cast<double>(r + 1);
            m2 += delta * (v - m);
        }
        mean_sum += m;
        if (n_mc > 1) var_sum += m2 / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc);
    }
    const double N = static_cast<double>(n);
    const double scale = 2.0 * (N - 1.0) / (N * static_cast<double>(d));
    return {scale * mean_sum, SignalMethod::numeric_cvm, scale * std::sqrt(var_sum)};
}

}  // namespace dak
