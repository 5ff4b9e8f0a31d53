#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "knobtune/linalg.hpp"

namespace knobtune {

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / 2.506628274631000502415765284811;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.414213562373095048801688724210); }

/// Expected improvement for maximization. With predictive sd = 0 this
/// degenerates to max(mean - best, 0).
inline double expected_improvement(double mean, double variance, double best_so_far) {
    if (variance < 0.0) variance = 0.0;
    const double sigma = std::sqrt(variance);
    const double delta = mean - best_so_far;
    if (sigma == 0.0) return std::max(delta, 0.0);
    const double z = delta / sigma;
    const double ei = delta * normal_cdf(z) + sigma * normal_pdf(z);
    return std::max(ei, 0.0);
}

struct GpKernel {
    std::vector<double> length_scales; // per input dimension
    double signal_variance = 1.0;
};

/// Exact Gaussian-process regression with a Matérn-5/2 kernel, fitted via
/// Cholesky decomposition of K + noise·I. Targets are standardized
/// internally and predictions de-standardized on output.
class GpModel {
public:
    GpModel() = default;

    static double matern52(const std::vector<double>& a, const std::vector<double>& b,
                           const GpKernel& k) {
        double r2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = (a[i] - b[i]) / k.length_scales[i];
            r2 += d * d;
        }
        const double r = std::sqrt(r2);
        const double s = 2.2360679774997896964091736687747 * r; // sqrt(5)·r
        return k.signal_variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }

    /// Fits on normalized inputs X (each row in [0,1]^d) and raw targets y.
    /// A Cholesky failure escalates the noise tenfold up to 1e-2 before
    /// giving up.
    static GpModel fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                       GpKernel kernel, double noise_variance) {
        if (x.size() != y.size()) throw std::invalid_argument("gp: |X| != |y|");
        GpModel m;
        m.x_ = x;
        m.kernel_ = std::move(kernel);
        m.noise_ = noise_variance;

        const std::size_t n = x.size();
        if (n == 0) return m;
        if (!m.kernel_.length_scales.empty() && m.kernel_.length_scales.size() != x[0].size())
            throw std::invalid_argument("gp: kernel dimension mismatch");

        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double v : y) ss += (v - mean) * (v - mean);
        double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        if (sd <= 0.0) sd = 1.0; // constant targets
        m.y_mean_ = mean;
        m.y_sd_ = sd;
        m.y_std_.resize(n);
        for (std::size_t i = 0; i < n; ++i) m.y_std_[i] = (y[i] - mean) / sd;

        Matrix gram(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                const double v = matern52(x[i], x[j], m.kernel_);
                gram(i, j) = v;
                gram(j, i) = v;
            }

        double noise = m.noise_;
        while (true) {
            Matrix k = gram;
            for (std::size_t i = 0; i < n; ++i) k(i, i) += noise;
            try {
                m.chol_ = cholesky(k);
                break;
            } catch (const std::runtime_error&) {
                if (noise >= 1e-2)
                    throw std::runtime_error("gp: Cholesky failed even at noise 1e-2");
                noise = std::max(noise * 10.0, 1e-12);
            }
        }
        m.noise_ = noise;
        m.alpha_ = solve_upper_transposed(m.chol_, solve_lower(m.chol_, m.y_std_));
        return m;
    }

    std::size_t size() const { return x_.size(); }
    const GpKernel& kernel() const { return kernel_; }
    double noise_variance() const { return noise_; }
    const Matrix& cholesky_factor() const { return chol_; }

    /// Predictive mean and variance at a query point, in the units of y.
    std::pair<double, double> predict(const std::vector<double>& q) const {
        if (x_.empty())
            return {0.0, kernel_.signal_variance}; // prior
        const std::size_t n = x_.size();
        std::vector<double> k_star(n);
        for (std::size_t i = 0; i < n; ++i) k_star[i] = matern52(x_[i], q, kernel_);
        const double mean_std = dot(k_star, alpha_);
        const std::vector<double> v = solve_lower(chol_, k_star);
        double var_std = kernel_.signal_variance - dot(v, v);
        var_std = std::max(var_std, 0.0);
        return {y_mean_ + y_sd_ * mean_std, var_std * y_sd_ * y_sd_};
    }

    /// Log marginal likelihood of the standardized targets.
    double log_marginal_likelihood() const {
        if (x_.empty()) return 0.0;
        const std::size_t n = x_.size();
        double log_det_half = 0.0;
        for (std::size_t i = 0; i < n; ++i) log_det_half += std::log(chol_(i, i));
        return -0.5 * dot(y_std_, alpha_) - log_det_half -
               0.5 * static_cast<double>(n) * std::log(6.283185307179586476925286766559);
    }

private:
    std::vector<std::vector<double>> x_;
    std::vector<double> y_std_;
    double y_mean_ = 0.0;
    double y_sd_ = 1.0;
    GpKernel kernel_;
    double noise_ = 1e-6;
    Matrix chol_;
    std::vector<double> alpha_;
};

/// Picks Matérn hyperparameters by log-marginal-likelihood over a small
/// shared grid: one length scale applied to every dimension.
inline GpKernel select_gp_kernel(const std::vector<std::vector<double>>& x,
                                 const std::vector<double>& y, double noise_variance) {
    static constexpr double length_grid[] = {0.1, 0.25, 0.5, 1.0, 2.0};
    static constexpr double signal_grid[] = {0.5, 1.0, 2.0};
    const std::size_t d = x.empty() ? 0 : x[0].size();

    GpKernel best;
    best.length_scales.assign(d, 0.5);
    best.signal_variance = 1.0;
    double best_lml = -std::numeric_limits<double>::infinity();
    for (double ls : length_grid) {
        for (double sv : signal_grid) {
            GpKernel k;
            k.length_scales.assign(d, ls);
            k.signal_variance = sv;
            try {
                const GpModel m = GpModel::fit(x, y, k, noise_variance);
                const double lml = m.log_marginal_likelihood();
                if (lml > best_lml) {
                    best_lml = lml;
                    best = k;
                }
            } catch (const std::runtime_error&) {
                // skip grid points where the factorization cannot be saved
            }
        }
    }
    return best;
}

} // namespace knobtune
