#include <catch2/catch.hpp>

#include <cmath>

#include "knobtune/stats.hpp"

using namespace knobtune;

namespace {

// independent oracle: Student-t CDF by Simpson quadrature of the density,
// never touching the incomplete-beta path
double t_cdf_quadrature(double t, int df) {
    const double nu = df;
    const double log_norm = std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) -
                            0.5 * std::log(nu * 3.14159265358979323846);
    auto pdf = [&](double x) {
        return std::exp(log_norm - 0.5 * (nu + 1.0) * std::log1p(x * x / nu));
    };
    const double a = 0.0, b = std::fabs(t);
    const int n = 200000; // even
    const double h = (b - a) / n;
    double sum = pdf(a) + pdf(b);
    for (int i = 1; i < n; ++i) sum += pdf(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    const double integral = sum * h / 3.0;
    return t >= 0 ? 0.5 + integral : 0.5 - integral;
}

double normal_cdf_ref(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace

TEST_CASE("t_cdf closed-form anchor points") {
    for (std::size_t df : {1u, 2u, 5u, 30u, 200u}) CHECK(t_cdf(0.0, df) == 0.5);
    // df = 1 is the Cauchy distribution: CDF(1) = 1/2 + atan(1)/pi = 3/4
    CHECK(t_cdf(1.0, 1) == Approx(0.75).margin(1e-10));
    // frozen high-precision reference
    CHECK(t_cdf(2.5, 10) == Approx(0.9842765778816956).margin(1e-8));
}

TEST_CASE("t_cdf agrees with quadrature of the density") {
    for (const auto& [t, df] : std::vector<std::pair<double, int>>{
             {0.5, 1}, {1.3, 3}, {2.5, 10}, {-1.7, 7}, {3.2, 25}, {-0.4, 2}}) {
        CHECK(t_cdf(t, static_cast<std::size_t>(df)) ==
              Approx(t_cdf_quadrature(t, df)).margin(1e-8));
    }
}

TEST_CASE("t_cdf is monotone with correct limits") {
    for (std::size_t df : {1u, 4u, 17u}) {
        double prev = 0.0;
        for (double t = -40.0; t <= 40.0; t += 0.5) {
            const double v = t_cdf(t, df);
            CHECK(v >= prev - 1e-15);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            prev = v;
        }
        CHECK(t_cdf(-1e8, df) == Approx(0.0).margin(1e-6));
        CHECK(t_cdf(1e8, df) == Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("t_cdf approaches the normal CDF for large df") {
    for (double t = -3.0; t <= 3.0; t += 0.25)
        CHECK(t_cdf(t, 200) == Approx(normal_cdf_ref(t)).margin(1e-3));
}

TEST_CASE("summarize computes mean and sample sd") {
    CHECK(summarize({5.0, 5.0, 5.0}) == std::pair{5.0, 0.0});
    const auto [m, sd] = summarize({1.0, 2.0, 3.0});
    CHECK(m == Approx(2.0));
    CHECK(sd == Approx(1.0));
    CHECK(summarize({7.0}).second == 0.0);
    CHECK_THROWS_AS(summarize({}), std::invalid_argument);
}

TEST_CASE("paired t-test on identical samples is a perfect tie") {
    const std::vector<double> a{3.0, 4.0, 5.0, 6.0};
    const TTestResult r = paired_t_test(a, a);
    CHECK(r.t_statistic == 0.0);
    CHECK(r.p_value == 1.0);
    CHECK(r.degrees_of_freedom == 3);
}

TEST_CASE("paired t-test matches a frozen reference value") {
    // differences 1.2, -0.4, 0.7, 0.9, -0.1, 0.5 against zero
    const std::vector<double> a{1.2, -0.4, 0.7, 0.9, -0.1, 0.5};
    const std::vector<double> b(6, 0.0);
    const TTestResult r = paired_t_test(a, b);
    CHECK(r.degrees_of_freedom == 5);
    CHECK(r.t_statistic == Approx(1.87754623275037).margin(1e-10));
    CHECK(r.p_value == Approx(0.11925191052347242).margin(1e-6));
    CHECK(r.mean_diff == Approx(0.4666666666666666).margin(1e-12));
}

TEST_CASE("paired t-test antisymmetry and shift invariance") {
    const std::vector<double> a{10.2, 11.5, 9.8, 12.1, 10.9};
    const std::vector<double> b{10.0, 11.9, 9.1, 12.4, 10.2};
    const TTestResult ab = paired_t_test(a, b);
    const TTestResult ba = paired_t_test(b, a);
    CHECK(ab.t_statistic == Approx(-ba.t_statistic));
    CHECK(ab.p_value == Approx(ba.p_value));

    std::vector<double> a_shift = a, b_shift = b;
    for (double& v : a_shift) v += 123.456;
    for (double& v : b_shift) v += 123.456;
    const TTestResult shifted = paired_t_test(a_shift, b_shift);
    CHECK(shifted.t_statistic == Approx(ab.t_statistic));
    CHECK(shifted.p_value == Approx(ab.p_value));
}

TEST_CASE("paired t-test rejects bad input") {
    CHECK_THROWS_AS(paired_t_test({1.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(paired_t_test({1.0, 2.0}, {2.0}), std::invalid_argument);
}

TEST_CASE("constant nonzero difference diverges") {
    const TTestResult r = paired_t_test({2.0, 2.0, 2.0}, {1.0, 1.0, 1.0});
    CHECK(std::isinf(r.t_statistic));
    CHECK(r.p_value == 0.0);
}
