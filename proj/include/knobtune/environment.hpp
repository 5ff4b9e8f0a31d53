#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "knobtune/param_space.hpp"
#include "knobtune/sampling.hpp"

namespace knobtune {

/// Result of evaluating one configuration against a target system.
/// Invalid outcomes carry zero throughput and a zero metrics vector.
struct EvaluationOutcome {
    bool valid = false;
    double throughput = 0.0; // kilo-transactions per second
    std::vector<double> metrics;
    double duration_s = 0.0;

    static EvaluationOutcome invalid_outcome(std::size_t metrics_dim, double duration = 0.0) {
        EvaluationOutcome o;
        o.valid = false;
        o.throughput = 0.0;
        o.metrics.assign(metrics_dim, 0.0);
        o.duration_s = duration;
        return o;
    }
};

/// Black-box evaluation target. The tuner only ever sees this surface.
class Environment {
public:
    virtual ~Environment() = default;
    virtual const ParameterSpace& space() const = 0;
    virtual EvaluationOutcome evaluate(const Configuration& config) = 0;
    virtual std::size_t metrics_dim() const = 0;
};

/// Wraps a plain function as an environment; handy for benchmarks and tests.
class CallableEnvironment final : public Environment {
public:
    CallableEnvironment(ParameterSpace space, std::size_t metrics_dim,
                        std::function<EvaluationOutcome(const Configuration&)> fn)
        : space_(std::move(space)), metrics_dim_(metrics_dim), fn_(std::move(fn)) {}

    const ParameterSpace& space() const override { return space_; }
    std::size_t metrics_dim() const override { return metrics_dim_; }
    EvaluationOutcome evaluate(const Configuration& config) override { return fn_(config); }

private:
    ParameterSpace space_;
    std::size_t metrics_dim_;
    std::function<EvaluationOutcome(const Configuration&)> fn_;
};

struct DesignSpec {
    SamplingStrategy strategy = SamplingStrategy::lhs;
    std::optional<std::size_t> rss;
};

inline Design generate_design(const ParameterSpace& space, const DesignSpec& spec, std::size_t n,
                              std::uint64_t seed) {
    Design d = spec.strategy == SamplingStrategy::lhs ? lhs(space, n, seed)
                                                      : symmetric_lhs(space, n, seed);
    if (spec.rss) d = apply_random_subset(d, *spec.rss, space, mix_seed(seed, 0x2055));
    return d;
}

/// Fraction of a fresh n-point design that the environment accepts as valid.
inline double validity_rate(const ParameterSpace& space, const DesignSpec& spec, std::size_t n,
                            Environment& env, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("validity_rate: n must be >= 1");
    const Design design = generate_design(space, spec, n, seed);
    std::size_t valid = 0;
    for (const auto& c : design.configs)
        if (env.evaluate(c).valid) ++valid;
    return static_cast<double>(valid) / static_cast<double>(n);
}

} // namespace knobtune
