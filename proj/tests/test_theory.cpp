#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "dak/core/rng.hpp"
#include "dak/theory.hpp"

using namespace dak;
using Catch::Approx;

namespace {

double cauchy_cdf(double z, double scale) { return 0.5 + std::atan(z / scale) / std::numbers::pi; }

}  // namespace

TEST_CASE("shape function values") {
    CHECK(shape(15, 40, 15) == 1.0);
    CHECK(shape(15, 40, 20) == Approx(15.0 * 14.0 / (20.0 * 19.0)).epsilon(1e-15));
    CHECK(shape(15, 40, 20) == Approx(0.5526315789473684).epsilon(1e-15));
    CHECK(shape(15, 40, 14) == Approx(0.9230769230769231).epsilon(1e-15));
    CHECK_THROWS_AS(shape(1, 40, 5), std::domain_error);
    CHECK_THROWS_AS(shape(15, 40, 0), std::domain_error);
    CHECK_THROWS_AS(shape(15, 40, 41), std::domain_error);
}

TEST_CASE("shape is unimodal with its maximum 1 at tau") {
    for (std::size_t n = 4; n <= 30; ++n) {
        for (std::size_t tau = 2; tau + 2 <= n; ++tau) {
            const auto v = shape_profile(tau, n);
            for (std::size_t t = 1; t <= n; ++t) {
                CHECK(v[t - 1] > 0.0);
                CHECK(v[t - 1] <= 1.0);
                if (t != tau) CHECK(v[t - 1] < 1.0);
                if (t < tau) CHECK(v[t - 1] < v[t]);
                if (t > tau) CHECK(v[t - 1] < v[t - 2]);
            }
            if (n >= 5) {
                const double gap = separation_gap(tau, n);
                CHECK(gap > 0.0);
                CHECK(gap < 1.0);
            }
        }
    }
}

TEST_CASE("covariance template entries") {
    const auto k10 = covariance_template(10);
    CHECK(k10.dim() == 7);
    CHECK(k10.matrix()(0, 0) == Approx(1.2857142857142858).epsilon(1e-15));
    const auto k40 = covariance_template(40);
    CHECK(k40.matrix()(0, 0) == Approx(1.0540540540540540).epsilon(1e-15));
    for (std::size_t n : {4u, 5u, 12u, 40u}) {
        const auto k = covariance_template(n);
        const auto& m = k.matrix();
        for (Eigen::Index a = 0; a < m.rows(); ++a)
            for (Eigen::Index b = 0; b < m.cols(); ++b) {
                CHECK(m(a, b) == m(b, a));
                CHECK(m(a, b) > 0.0);
            }
        CHECK(k.min_eigenvalue() >= -1e-10 * k.max_eigenvalue());
        CHECK((k.factor() * k.factor().transpose() - m).cwiseAbs().maxCoeff() <= 1e-12 * m.cwiseAbs().maxCoeff());
        // diagonal equals the variance branch at t = t'
        for (std::size_t s = 0; s < k.dim(); ++s) {
            const double t = static_cast<double>(k.splits()[s]);
            const double nn = static_cast<double>(n);
            CHECK(k.diagonal(s) == Approx(2.0 * (nn - 1) * (nn - 2) / (t * (t - 1) * (nn - t) * (nn - t - 1))));
        }
    }
    CHECK(covariance_template(4).dim() == 1);
    CHECK_THROWS_AS(covariance_template(3), std::domain_error);
}

TEST_CASE("covariance template inverse square root whitens") {
    const auto k = covariance_template(12);
    const Eigen::MatrixXd w = k.inverse_sqrt();
    const Eigen::MatrixXd id = w * k.matrix() * w;
    CHECK((id - Eigen::MatrixXd::Identity(id.rows(), id.cols())).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("dilogarithm") {
    CHECK(dilog(0.0) == 0.0);
    CHECK(std::abs(dilog(1.0) - std::numbers::pi * std::numbers::pi / 6.0) <= 1e-12);
    // series oracle for x = 1/9
    double s = 0.0, p = 1.0;
    for (int m = 1; m < 60; ++m) {
        p /= 9.0;
        s += p / (static_cast<double>(m) * m);
    }
    CHECK(std::abs(dilog(1.0 / 9.0) - s) <= 1e-15);
    CHECK(std::abs(dilog(1.0 / 9.0) - 0.11436020697851003) <= 1e-15);
    CHECK(std::abs(dilog(0.3) - 0.32612951007547607) <= 1e-14);
    CHECK(std::abs(dilog(0.7) - 0.88937762428603874) <= 1e-14);
    CHECK(std::abs(dilog(0.99) - 1.5886254480763753) <= 1e-13);
    for (int i = 1; i < 100; ++i) {
        const double x = i / 100.0;
        const double rhs = std::numbers::pi * std::numbers::pi / 6.0 - std::log(x) * std::log1p(-x);
        CHECK(std::abs(dilog(x) + dilog(1.0 - x) - rhs) <= 1e-10);
    }
    CHECK_THROWS_AS(dilog(-0.1), std::domain_error);
    CHECK_THROWS_AS(dilog(1.1), std::domain_error);
}

TEST_CASE("normal cdf and Gauss-Legendre rule") {
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_cdf(1.959963984540054) == Approx(0.975).epsilon(1e-14));
    CHECK(normal_cdf(-8.0) == Approx(6.22096057427178e-16).epsilon(1e-12));
    const auto rule = gauss_legendre(20);
    double sum = 0.0, x4 = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
        sum += rule.weights[i];
        x4 += rule.weights[i] * std::pow(rule.nodes[i], 4);
    }
    CHECK(sum == Approx(2.0).epsilon(1e-14));
    CHECK(x4 == Approx(0.4).epsilon(1e-14));
}

TEST_CASE("Cauchy scale signal factor") {
    CHECK(delta_cauchy_scale(1.0, 17).value == 0.0);
    const auto d = delta_cauchy_scale(2.0, 40);
    CHECK(d.method == SignalMethod::closed_form_cauchy);
    CHECK(std::abs(d.value - 0.011297433744329238) <= 1e-15);
    CHECK(delta_cauchy_scale(0.5, 40).value == Approx(d.value).epsilon(1e-14));
    CHECK_THROWS_AS(delta_cauchy_scale(0.0, 40), std::domain_error);
    CHECK_THROWS_AS(delta_cauchy_scale(-1.0, 40), std::domain_error);

    // integral form (2(N-1)/(N pi^3)) int_{-pi/2}^{pi/2} (theta - atan(tan(theta)/lambda))^2 dtheta
    boost::math::quadrature::tanh_sinh<double> ts;
    const double lambda = 2.0;
    const double integral = ts.integrate(
        [&](double th) {
            const double v = th - std::atan(std::tan(th) / lambda);
            return v * v;
        },
        -std::numbers::pi / 2, std::numbers::pi / 2);
    const double numeric = 2.0 * 39.0 / (40.0 * std::pow(std::numbers::pi, 3)) * integral;
    CHECK(std::abs(numeric - d.value) <= 1e-8);
}

TEST_CASE("Gaussian shift signal factor") {
    const std::vector<double> zeros(5, 0.0);
    CHECK(delta_gaussian_shift(zeros, 40).value == 0.0);

    const std::vector<double> one{1.0};
    const auto d1 = delta_gaussian_shift(one, 40);
    CHECK(std::abs(d1.value - 0.15646321679907020) <= 1e-12);

    // independent quadrature of the same expectation
    const double term = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [](double z) {
            const double a = normal_cdf(z) - normal_cdf(z - 1.0);
            return a * a * normal_pdf(z);
        },
        -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 15, 1e-14);
    CHECK(std::abs(gaussian_shift_cvm_term(1.0) - term) <= 1e-10);

    const std::vector<double> tiny(10, 1e-3);
    const double law = 39.0 / (40.0 * std::numbers::pi * std::sqrt(3.0)) * 1e-6;
    CHECK(std::abs(delta_gaussian_shift(tiny, 40).value / law - 1.0) <= 0.01);
    CHECK(delta_gaussian_shift(std::vector<double>{-2.0}, 12).value ==
          Approx(delta_gaussian_shift(std::vector<double>{2.0}, 12).value).epsilon(1e-12));
}

TEST_CASE("Gaussian shift against a Monte-Carlo oracle") {
    Rng rng(31);
    constexpr int n = 2'000'000;
    double m = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        const double a = normal_cdf(z) - normal_cdf(z - 1.0);
        m += a * a;
        m2 += a * a * a * a;
    }
    m /= n;
    const double se = std::sqrt((m2 / n - m * m) / n);
    CHECK(std::abs(gaussian_shift_cvm_term(1.0) - m) <= 3.0 * se);
}

TEST_CASE("numeric CvM signal factor") {
    constexpr std::size_t n = 40;
    auto f = [](std::size_t, double z) { return cauchy_cdf(z, 1.0); };
    auto g = [](std::size_t, double z) { return cauchy_cdf(z, 2.0); };
    auto sample_f = [](std::size_t, Rng& r) { return r.cauchy(0.0, 1.0); };
    auto sample_g = [](std::size_t, Rng& r) { return r.cauchy(0.0, 2.0); };

    const auto same = delta_numeric_cvm(f, f, sample_f, n, 3, 1000, 1);
    CHECK(same.value == 0.0);

    const auto exact = delta_cauchy_scale(2.0, n).value;
    const auto by_f = delta_numeric_cvm(f, g, sample_f, n, 4, 200000, 2);
    CHECK(by_f.std_error > 0.0);
    CHECK(std::abs(by_f.value - exact) <= 3.0 * by_f.std_error);
    const auto by_g = delta_numeric_cvm(f, g, sample_g, n, 4, 200000, 3);
    const double joint = std::sqrt(by_f.std_error * by_f.std_error + by_g.std_error * by_g.std_error);
    CHECK(std::abs(by_f.value - by_g.value) <= 3.0 * joint);

    // increasing transform x -> x^3 applied to F, G and the sampler
    auto f3 = [](std::size_t, double z) { return cauchy_cdf(std::cbrt(z), 1.0); };
    auto g3 = [](std::size_t, double z) { return cauchy_cdf(std::cbrt(z), 2.0); };
    auto s3 = [](std::size_t, Rng& r) { const double x = r.cauchy(0.0, 1.0); return x * x * x; };
    const auto cubed = delta_numeric_cvm(f3, g3, s3, n, 4, 200000, 2);
    CHECK(cubed.value == Approx(by_f.value).epsilon(1e-9));
}
