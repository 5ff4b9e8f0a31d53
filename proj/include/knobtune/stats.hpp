#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace knobtune {

namespace detail {

inline double log_gamma(double x) { return std::lgamma(x); }

/// Continued fraction for the regularized incomplete beta function
/// (Lentz's method).
inline double beta_cont_frac(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-15;
    constexpr int max_iter = 500;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw std::runtime_error("incomplete beta continued fraction did not converge");
}

/// Regularized incomplete beta I_x(a, b).
inline double reg_inc_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("reg_inc_beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cont_frac(a, b, x) / a;
    return 1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b;
}

} // namespace detail

/// Student-t cumulative distribution function.
inline double t_cdf(double t, std::size_t df) {
    if (df < 1) throw std::invalid_argument("t_cdf: df must be >= 1");
    if (t == 0.0) return 0.5;
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double nu = static_cast<double>(df);
    const double x = nu / (nu + t * t);
    const double tail = 0.5 * detail::reg_inc_beta(nu / 2.0, 0.5, x);
    return t > 0 ? 1.0 - tail : tail;
}

/// Sample mean and standard deviation (n-1 convention; sd is 0 for n = 1).
inline std::pair<double, double> summarize(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("summarize: empty input");
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(samples.size());
    if (samples.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(samples.size() - 1))};
}

struct TTestResult {
    double t_statistic = 0.0;
    std::size_t degrees_of_freedom = 0;
    double p_value = 1.0;
    double mean_diff = 0.0;
};

/// Two-sided paired t-test on equal-length samples. Identically zero
/// differences give t = 0, p = 1.
inline TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("paired_t_test: need n >= 2");

    const std::size_t n = a.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
    auto [mean, sd] = summarize(diff);

    TTestResult r;
    r.degrees_of_freedom = n - 1;
    r.mean_diff = mean;
    if (sd == 0.0) {
        // all differences equal: zero mean is a perfect tie, otherwise the
        // t statistic diverges
        r.t_statistic = mean == 0.0 ? 0.0
                                    : std::copysign(std::numeric_limits<double>::infinity(), mean);
        r.p_value = mean == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p_value = 2.0 * (1.0 - t_cdf(std::fabs(r.t_statistic), r.degrees_of_freedom));
    return r;
}

} // namespace knobtune
