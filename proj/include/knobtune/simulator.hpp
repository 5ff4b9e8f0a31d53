#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "knobtune/environment.hpp"
#include "knobtune/param_space.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

/// Structure of the synthetic database. Hidden from the tuning algorithms,
/// visible to tests as ground truth.
struct SimulatorSpec {
    std::size_t dims = 350;
    std::vector<std::size_t> important_idx;
    double base_throughput = 47.8; // KTPS of the all-default configuration
    double optimum_gain = 1.45;    // noiseless max = base * gain, by construction
    std::vector<double> safe_fraction; // per parameter, in (0, 1]
    std::vector<double> safe_shift;    // offsets the operable window off-center; 0 = symmetric
    struct JointConstraint {
        std::size_t a = 0;
        std::size_t b = 0;
        double threshold_u = 0.85; // invalid when both exceed this
    };
    std::vector<JointConstraint> joint_constraints;
    double noise_cv = 0.03;
    std::size_t metrics_dim = 16;

    // hidden response surface
    double reference_prf = 10.0;       // ranges the safe intervals are expressed against
    std::vector<double> peak_u;        // per important parameter, in unit space
    std::vector<double> gain_share;    // per important parameter, sums to 1
    struct Interaction {
        std::size_t a = 0;
        std::size_t b = 0;
        double strength = 0.0;
    };
    std::vector<Interaction> interactions;
    std::uint64_t structure_seed = 0x5EEDFACE;

    void validate() const {
        if (dims == 0) throw std::invalid_argument("simulator: dims must be > 0");
        if (important_idx.empty())
            throw std::invalid_argument("simulator: important_idx must be non-empty");
        for (std::size_t i : important_idx)
            if (i >= dims) throw std::invalid_argument("simulator: important index out of range");
        if (safe_fraction.size() != dims)
            throw std::invalid_argument("simulator: safe_fraction must have one entry per dim");
        for (double s : safe_fraction)
            if (!(s > 0.0 && s <= 1.0))
                throw std::invalid_argument("simulator: safe_fraction entries must be in (0, 1]");
        if (!safe_shift.empty() && safe_shift.size() != dims)
            throw std::invalid_argument("simulator: safe_shift must be empty or one entry per dim");
        for (std::size_t i = 0; i < safe_shift.size(); ++i) {
            const double half = safe_fraction[i] / 2.0;
            if (0.5 < 0.5 - half + safe_shift[i] || 0.5 > 0.5 + half + safe_shift[i])
                throw std::invalid_argument(
                    "simulator: safe window must contain the default (shift too large)");
        }
        if (noise_cv < 0.0) throw std::invalid_argument("simulator: noise_cv must be >= 0");
        if (peak_u.size() != important_idx.size() || gain_share.size() != important_idx.size())
            throw std::invalid_argument("simulator: peak_u/gain_share size mismatch");
    }
};

/// The shipped calibrated instance: 350 knobs, 10 planted influential ones.
/// Every influential knob destabilizes the system when starved (the bottom
/// strip of its range is inoperable), two of them carry almost all of the
/// throughput headroom, and two both-high constraint pairs crash jointly.
/// Calibrated so that full-range designs at PRF 2 are essentially all valid,
/// PRF 100 designs never are, and PRF 10 sits in between.
inline SimulatorSpec default_simulator_spec() {
    SimulatorSpec s;
    s.dims = 350;
    s.important_idx = {7, 23, 58, 91, 120, 164, 199, 240, 287, 331};
    s.base_throughput = 47.8;
    s.optimum_gain = 1.45;
    s.safe_fraction.assign(s.dims, 1.0);
    s.safe_shift.assign(s.dims, 0.0);
    for (std::size_t k = 0; k < s.important_idx.size(); ++k) {
        // one-sided crash strips at the bottom of the range
        const double crash_below = k < 2 ? 0.20 : 0.18;
        s.safe_fraction[s.important_idx[k]] = 1.0 - crash_below;
        s.safe_shift[s.important_idx[k]] = crash_below / 2.0;
    }
    s.joint_constraints = {{s.important_idx[6], s.important_idx[7], 0.75},
                           {s.important_idx[8], s.important_idx[9], 0.75}};
    s.noise_cv = 0.03;
    s.metrics_dim = 16;
    s.reference_prf = 10.0;
    s.peak_u = {0.76, 0.24, 0.70, 0.30, 0.72, 0.28, 0.74, 0.26, 0.73, 0.27};
    s.gain_share = {0.60, 0.22, 0.0225, 0.0225, 0.0225, 0.0225, 0.0225, 0.0225, 0.0225, 0.0225};
    s.interactions = {{7, 58, 0.01}, {23, 120, -0.01}, {91, 164, 0.008}};
    s.structure_seed = 0x5EEDFACE;
    return s;
}

/// Deterministic synthetic database: unimodal log-quadratic response on the
/// planted important parameters, near-flat response elsewhere, per-parameter
/// hidden operable sub-ranges, and a few both-high joint constraints.
class Simulator {
public:
    explicit Simulator(SimulatorSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        build_reference_space();
        build_structure();
    }

    const SimulatorSpec& spec() const { return spec_; }
    const ParameterSpace& reference_space() const { return reference_; }

    /// Unit-space coordinate of a native value against the reference range.
    double unit_of(std::size_t param, double native) const {
        return to_unit(reference_.param(param), native);
    }

    bool is_valid(const std::vector<double>& native_full) const {
        for (std::size_t i = 0; i < spec_.dims; ++i) {
            const double u = unit_of(i, native_full[i]);
            const double half = spec_.safe_fraction[i] / 2.0;
            const double shift = spec_.safe_shift.empty() ? 0.0 : spec_.safe_shift[i];
            if (u < 0.5 - half + shift || u > 0.5 + half + shift) return false;
        }
        for (const auto& jc : spec_.joint_constraints) {
            if (unit_of(jc.a, native_full[jc.a]) > jc.threshold_u &&
                unit_of(jc.b, native_full[jc.b]) > jc.threshold_u)
                return false;
        }
        return true;
    }

    /// Deterministic noiseless throughput. Equals base_throughput exactly at
    /// the all-default configuration and base*gain at the planted optimum.
    double noiseless_throughput(const std::vector<double>& native_full) const {
        double log_factor = 0.0;
        for (std::size_t k = 0; k < spec_.important_idx.size(); ++k) {
            const std::size_t i = spec_.important_idx[k];
            const double u = unit_of(i, native_full[i]);
            const double du = u - spec_.peak_u[k];
            log_factor += curvature_[k] * (peak_offset_sq_[k] - du * du);
        }
        double interaction = 0.0;
        for (std::size_t t = 0; t < spec_.interactions.size(); ++t) {
            const auto& ia = spec_.interactions[t];
            interaction += ia.strength * interaction_shape(t, 0, native_full) *
                           interaction_shape(t, 1, native_full);
        }
        double minor = 0.0;
        for (std::size_t i = 0; i < spec_.dims; ++i) {
            if (minor_coeff_[i] == 0.0) continue;
            const double u = unit_of(i, native_full[i]);
            const double dev = std::min(std::fabs(2.0 * u - 1.0), 1.0);
            minor += std::log1p(minor_coeff_[i] * dev);
        }
        return spec_.base_throughput * std::exp(log_factor + minor) * (1.0 + interaction);
    }

    /// Smooth deterministic internal metrics for a valid evaluation;
    /// components 0 and 1 track throughput.
    std::vector<double> metrics(const std::vector<double>& native_full,
                                double noisy_throughput, Rng& noise_rng,
                                double noise_sigma_ln) const {
        std::vector<double> m(spec_.metrics_dim, 0.0);
        if (spec_.metrics_dim == 0) return m;
        m[0] = noisy_throughput / spec_.base_throughput;
        if (spec_.metrics_dim > 1) m[1] = std::log(noisy_throughput / spec_.base_throughput);
        for (std::size_t k = 2; k < spec_.metrics_dim; ++k) {
            double acc = metric_bias_[k];
            for (const auto& [idx, w] : metric_proj_[k])
                acc += w * (2.0 * unit_of(idx, native_full[idx]) - 1.0);
            double v = std::tanh(acc);
            if (noise_sigma_ln > 0.0)
                v *= std::exp(noise_sigma_ln * noise_rng.normal() -
                              0.5 * noise_sigma_ln * noise_sigma_ln);
            m[k] = v;
        }
        return m;
    }

    /// Ground-truth best configuration, for tests and calibration checks.
    Configuration planted_optimum() const {
        Configuration c = reference_.default_configuration();
        for (std::size_t k = 0; k < spec_.important_idx.size(); ++k) {
            const std::size_t i = spec_.important_idx[k];
            c.values[i] = from_unit(reference_.param(i), spec_.peak_u[k]);
        }
        return c;
    }

private:
    void build_reference_space() {
        static constexpr double palette[] = {0.05, 0.1,   0.25,  0.5,    1.0,    2.0,    4.0,
                                             8.0,  16.0,  30.0,  60.0,   100.0,  250.0,  500.0,
                                             1000.0, 4096.0, 10000.0, 100000.0, 1000000.0};
        Rng rng(mix_seed(spec_.structure_seed, 0x7AB1E));
        std::vector<bool> important(spec_.dims, false);
        for (std::size_t i : spec_.important_idx) important[i] = true;

        std::vector<ParameterSpec> params;
        params.reserve(spec_.dims);
        for (std::size_t i = 0; i < spec_.dims; ++i) {
            ParameterSpec p;
            char name[16];
            std::snprintf(name, sizeof(name), "knob_%03zu", i);
            p.name = name;
            p.default_value = palette[rng.uniform_index(std::size(palette))];
            const bool integral = !important[i] && p.default_value >= 4.0 && rng.uniform01() < 0.5;
            p.kind = integral ? ParamKind::integer : ParamKind::continuous;
            p.tunable = true;
            p.range = derive_range(p.default_value, spec_.reference_prf, p.kind);
            params.push_back(std::move(p));
        }
        reference_ = ParameterSpace(std::move(params), spec_.reference_prf);
    }

    void build_structure() {
        const double log_gain = std::log(spec_.optimum_gain);
        double share_sum = 0.0;
        for (double w : spec_.gain_share) share_sum += w;
        curvature_.resize(spec_.important_idx.size());
        peak_offset_sq_.resize(spec_.important_idx.size());
        for (std::size_t k = 0; k < spec_.important_idx.size(); ++k) {
            const double lg = log_gain * (spec_.gain_share[k] / share_sum);
            const double m = 0.5 - spec_.peak_u[k];
            if (m == 0.0)
                throw std::invalid_argument("simulator: peak_u must differ from 0.5");
            peak_offset_sq_[k] = m * m;
            curvature_[k] = lg / peak_offset_sq_[k];
        }

        Rng rng(mix_seed(spec_.structure_seed, 0xC0EFF));
        std::vector<bool> important(spec_.dims, false);
        for (std::size_t i : spec_.important_idx) important[i] = true;
        minor_coeff_.assign(spec_.dims, 0.0);
        for (std::size_t i = 0; i < spec_.dims; ++i)
            if (!important[i]) minor_coeff_[i] = -1e-3 * rng.uniform01();

        // interaction shapes vanish at both the default and the peak so they
        // never move the global optimum
        interaction_norm_.clear();
        for (const auto& ia : spec_.interactions) {
            std::array<double, 2> norms{};
            const std::size_t ends[2] = {ia.a, ia.b};
            for (int side = 0; side < 2; ++side) {
                const std::size_t k = important_rank(ends[side]);
                const double peak = spec_.peak_u[k];
                double best = 0.0;
                for (double u : {0.0, 1.0, 0.5 * (0.5 + peak)})
                    best = std::max(best, std::fabs((u - 0.5) * (u - peak)));
                norms[side] = best;
            }
            interaction_norm_.push_back(norms);
        }

        Rng mrng(mix_seed(spec_.structure_seed, 0x3E7));
        metric_proj_.assign(spec_.metrics_dim, {});
        metric_bias_.assign(spec_.metrics_dim, 0.0);
        for (std::size_t k = 2; k < spec_.metrics_dim; ++k) {
            metric_bias_[k] = mrng.normal(0.0, 0.3);
            const std::size_t terms = 20;
            for (std::size_t t = 0; t < terms; ++t)
                metric_proj_[k].emplace_back(mrng.uniform_index(spec_.dims),
                                             mrng.normal(0.0, 1.0 / std::sqrt(double(terms))));
        }
    }

    std::size_t important_rank(std::size_t param_idx) const {
        for (std::size_t k = 0; k < spec_.important_idx.size(); ++k)
            if (spec_.important_idx[k] == param_idx) return k;
        throw std::invalid_argument("simulator: interaction endpoint must be an important parameter");
    }

    double interaction_shape(std::size_t which, int side,
                             const std::vector<double>& native_full) const {
        const auto& ia = spec_.interactions[which];
        const std::size_t i = side == 0 ? ia.a : ia.b;
        const std::size_t k = important_rank(i);
        const double u = unit_of(i, native_full[i]);
        return (u - 0.5) * (u - spec_.peak_u[k]) / interaction_norm_[which][side];
    }

    SimulatorSpec spec_;
    ParameterSpace reference_;
    std::vector<double> curvature_;
    std::vector<double> peak_offset_sq_;
    std::vector<double> minor_coeff_;
    std::vector<std::array<double, 2>> interaction_norm_;
    std::vector<std::vector<std::pair<std::size_t, double>>> metric_proj_;
    std::vector<double> metric_bias_;
};

/// Environment view of a shared simulator, bound to the caller's parameter
/// space by name. Parameters absent from the caller's space stay at their
/// defaults.
class SimulatorEnvironment final : public Environment {
public:
    SimulatorEnvironment(std::shared_ptr<const Simulator> sim, ParameterSpace user_space,
                         std::uint64_t noise_seed, std::optional<double> noise_cv_override = {})
        : sim_(std::move(sim)),
          space_(std::move(user_space)),
          noise_rng_(mix_seed(noise_seed, 0x901E)) {
        const auto& ref = sim_->reference_space();
        mapping_.reserve(space_.size());
        for (const auto& p : space_.params()) {
            if (!ref.has(p.name))
                throw std::invalid_argument("simulator has no parameter named '" + p.name + "'");
            mapping_.push_back(ref.index_of(p.name));
        }
        const double cv = noise_cv_override.value_or(sim_->spec().noise_cv);
        sigma_ln_ = cv > 0.0 ? std::sqrt(std::log1p(cv * cv)) : 0.0;
    }

    const ParameterSpace& space() const override { return space_; }
    std::size_t metrics_dim() const override { return sim_->spec().metrics_dim; }

    EvaluationOutcome evaluate(const Configuration& config) override {
        const auto start = std::chrono::steady_clock::now();
        space_.validate_configuration(config);
        std::vector<double> native = sim_->reference_space().default_configuration().values;
        for (std::size_t i = 0; i < mapping_.size(); ++i) native[mapping_[i]] = config.values[i];

        EvaluationOutcome out;
        if (!sim_->is_valid(native)) {
            out = EvaluationOutcome::invalid_outcome(sim_->spec().metrics_dim);
        } else {
            double t = sim_->noiseless_throughput(native);
            if (sigma_ln_ > 0.0)
                t *= std::exp(sigma_ln_ * noise_rng_.normal() - 0.5 * sigma_ln_ * sigma_ln_);
            out.valid = true;
            out.throughput = t;
            out.metrics = sim_->metrics(native, t, noise_rng_, sigma_ln_);
        }
        out.duration_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return out;
    }

private:
    std::shared_ptr<const Simulator> sim_;
    ParameterSpace space_;
    std::vector<std::size_t> mapping_;
    Rng noise_rng_;
    double sigma_ln_ = 0.0;
};

} // namespace knobtune
