#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "knobtune/ddpg.hpp"
#include "knobtune/environment.hpp"
#include "knobtune/gp.hpp"
#include "knobtune/param_space.hpp"
#include "knobtune/rng.hpp"
#include "knobtune/sampling.hpp"

namespace knobtune {

/// Relative improvement of a step's throughput over the default
/// configuration's throughput. Invalid steps carry zero throughput, so their
/// reward is exactly -1.
inline double reward(double throughput_t, double default_throughput) {
    if (!(default_throughput > 0.0))
        throw std::invalid_argument("reward: default throughput must be positive");
    return (throughput_t - default_throughput) / default_throughput;
}

struct StepRecord {
    Configuration config;
    EvaluationOutcome outcome;
    double reward = 0.0;
};

/// Ordered record of one tuning run: every evaluated step, its reward, and
/// the best valid configuration seen so far.
struct TuningHistory {
    std::vector<StepRecord> steps;
    EvaluationOutcome default_outcome;
    double default_throughput = 0.0;
    double best_throughput = 0.0;
    Configuration best_config;

    void start(const Configuration& default_config, const EvaluationOutcome& outcome) {
        default_outcome = outcome;
        default_throughput = outcome.throughput;
        best_throughput = 0.0;
        best_config = default_config;
        steps.clear();
    }

    void record(Configuration config, EvaluationOutcome outcome) {
        StepRecord rec;
        rec.reward = reward(outcome.throughput, default_throughput);
        if (outcome.valid && outcome.throughput > best_throughput) {
            best_throughput = outcome.throughput;
            best_config = config;
        }
        rec.config = std::move(config);
        rec.outcome = std::move(outcome);
        steps.push_back(std::move(rec));
    }
};

/// Sequential suggest-evaluate-observe optimizer. next() sees the full
/// history, including the outcome of its previous suggestion.
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual std::string name() const = 0;
    virtual Configuration next(const TuningHistory& history) = 0;

    virtual nlohmann::ordered_json checkpoint_state() const {
        return nlohmann::ordered_json::object();
    }
    virtual void restore_state(const nlohmann::ordered_json&, const TuningHistory&) {}
};

/// Draws each tunable parameter from the lower or upper half of its range
/// with equal probability, uniformly within the chosen half.
inline Configuration random_search_suggest(const ParameterSpace& space, Rng& rng) {
    Configuration c = space.default_configuration();
    for (std::size_t k : space.tunable_indices()) {
        const ParameterSpec& p = space.param(k);
        const double lo = p.range.lo, hi = p.range.hi, d = p.default_value;
        double v;
        if (d <= lo) {
            v = rng.uniform(d, hi);
        } else if (d >= hi) {
            v = rng.uniform(lo, d);
        } else {
            const bool lower = rng.uniform01() < 0.5;
            v = lower ? rng.uniform(lo, d) : rng.uniform(d, hi);
        }
        c.values[k] = p.clamp(v);
    }
    return c;
}

class RandomSearch final : public Optimizer {
public:
    RandomSearch(ParameterSpace space, std::uint64_t seed)
        : space_(std::move(space)), seed_(seed) {}

    std::string name() const override { return "random"; }

    Configuration next(const TuningHistory& history) override {
        Rng rng(mix_seed(seed_, 0x9A2D, history.steps.size()));
        return random_search_suggest(space_, rng);
    }

private:
    ParameterSpace space_;
    std::uint64_t seed_;
};

struct BayesOptOptions {
    std::size_t n_init = 10;
    std::size_t candidate_pool = 1000;
    std::size_t jitter_top = 10;
    double jitter_sd = 0.05;
    double noise_variance = 1e-3; // on standardized targets
    std::size_t refit_interval = 10;
};

/// Gaussian-process Bayesian optimization with expected improvement over a
/// sampled candidate pool. The first n_init steps replay a symmetric-LHS
/// initial design; afterwards the surrogate is fit on everything observed,
/// invalid steps entering as zero throughput.
class BayesOpt final : public Optimizer {
public:
    using Options = BayesOptOptions;

    BayesOpt(ParameterSpace space, std::uint64_t seed, Options options = Options())
        : space_(std::move(space)), seed_(seed), options_(options) {
        init_design_ = symmetric_lhs(space_, options_.n_init, mix_seed(seed_, 0xB0D));
        kernel_.length_scales.assign(space_.tunable_indices().size(), 0.5);
        kernel_.signal_variance = 1.0;
    }

    std::string name() const override { return "bo"; }

    Configuration next(const TuningHistory& history) override {
        const std::size_t t = history.steps.size();
        if (t < options_.n_init) return init_design_.configs[t];
        try {
            return suggest_by_ei(history, t);
        } catch (const std::runtime_error& e) {
            std::cerr << "[knobtune] bo: surrogate failure (" << e.what()
                      << "), falling back to random draw for step " << t << "\n";
            Rng rng(mix_seed(seed_, 0x9A2D, t));
            return random_search_suggest(space_, rng);
        }
    }

    nlohmann::ordered_json checkpoint_state() const override {
        nlohmann::ordered_json j;
        j["length_scale"] = kernel_.length_scales.empty() ? 0.5 : kernel_.length_scales[0];
        j["signal_variance"] = kernel_.signal_variance;
        j["fitted_at"] = fitted_at_;
        return j;
    }

    void restore_state(const nlohmann::ordered_json& j, const TuningHistory&) override {
        const double ls = j.at("length_scale").get<double>();
        kernel_.length_scales.assign(space_.tunable_indices().size(), ls);
        kernel_.signal_variance = j.at("signal_variance").get<double>();
        fitted_at_ = j.at("fitted_at").get<std::size_t>();
    }

private:
    std::vector<double> to_unit_vector(const Configuration& c) const {
        const auto& tunable = space_.tunable_indices();
        std::vector<double> u(tunable.size());
        for (std::size_t i = 0; i < tunable.size(); ++i)
            u[i] = to_unit(space_.param(tunable[i]), c.values[tunable[i]]);
        return u;
    }

    Configuration from_unit_vector(const std::vector<double>& u) const {
        Configuration c = space_.default_configuration();
        const auto& tunable = space_.tunable_indices();
        for (std::size_t i = 0; i < tunable.size(); ++i)
            c.values[tunable[i]] = from_unit(space_.param(tunable[i]), u[i]);
        return c;
    }

    Configuration suggest_by_ei(const TuningHistory& history, std::size_t t) {
        std::vector<std::vector<double>> x;
        std::vector<double> y;
        x.reserve(history.steps.size());
        y.reserve(history.steps.size());
        for (const auto& step : history.steps) {
            x.push_back(to_unit_vector(step.config));
            y.push_back(step.outcome.valid ? step.outcome.throughput : 0.0);
        }

        if (t == options_.n_init || t >= fitted_at_ + options_.refit_interval) {
            kernel_ = select_gp_kernel(x, y, options_.noise_variance);
            fitted_at_ = t;
        }
        const GpModel model = GpModel::fit(x, y, kernel_, options_.noise_variance);

        double best_y = 0.0;
        for (double v : y) best_y = std::max(best_y, v);

        // candidate pool: a fresh space-filling design plus jittered copies
        // of the best observed points
        std::vector<std::vector<double>> candidates;
        const Design pool = symmetric_lhs(space_, options_.candidate_pool, mix_seed(seed_, 0xCA4D, t));
        candidates.reserve(options_.candidate_pool + options_.jitter_top);
        for (const auto& c : pool.configs) candidates.push_back(to_unit_vector(c));

        std::vector<std::size_t> by_y(y.size());
        std::iota(by_y.begin(), by_y.end(), std::size_t{0});
        std::stable_sort(by_y.begin(), by_y.end(),
                         [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
        Rng jitter_rng(mix_seed(seed_, 0x717E, t));
        for (std::size_t i = 0; i < std::min(options_.jitter_top, by_y.size()); ++i) {
            std::vector<double> u = x[by_y[i]];
            for (double& v : u)
                v = std::clamp(v + jitter_rng.normal(0.0, options_.jitter_sd), 0.0, 1.0);
            candidates.push_back(std::move(u));
        }

        std::size_t best_idx = 0;
        double best_ei = -1.0, best_mean = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto [mean, var] = model.predict(candidates[i]);
            const double ei = expected_improvement(mean, var, best_y);
            // ties (notably all-zero EI) break toward the highest mean
            if (ei > best_ei || (ei == best_ei && mean > best_mean)) {
                best_ei = ei;
                best_mean = mean;
                best_idx = i;
            }
        }
        return from_unit_vector(candidates[best_idx]);
    }

    ParameterSpace space_;
    std::uint64_t seed_;
    Options options_;
    Design init_design_;
    GpKernel kernel_;
    std::size_t fitted_at_ = 0;
};

struct DdpgOptimizerOptions {
    double noise_start = 0.5;
    double noise_end = 0.05;
};

/// DDPG driver: maps bounded actions onto the parameter space around the
/// default (action 0 is the all-default configuration), feeds transitions to
/// the agent, and trains once per step after warmup.
class DdpgOptimizer final : public Optimizer {
public:
    using Options = DdpgOptimizerOptions;

    DdpgOptimizer(ParameterSpace space, std::uint64_t seed, std::size_t total_steps,
                  std::size_t metrics_dim, Options options = Options(),
                  DdpgParams params = DdpgParams())
        : space_(std::move(space)),
          seed_(seed),
          total_steps_(std::max<std::size_t>(total_steps, 1)),
          options_(options) {
        params.state_dim = std::max<std::size_t>(metrics_dim, 1);
        params.action_dim = space_.tunable_indices().size();
        params.seed = mix_seed(seed, 0xDD9);
        agent_ = std::make_unique<DdpgAgent>(params);
    }

    std::string name() const override { return "rl"; }

    const DdpgAgent& agent() const { return *agent_; }

    Configuration next(const TuningHistory& history) override {
        const std::size_t t = history.steps.size();
        Rng rng(mix_seed(seed_, 0xDD97, t));

        std::vector<double> state = agent_->pad_state(
            t == 0 ? history.default_outcome.metrics : history.steps.back().outcome.metrics);

        if (t > 0 && pending_) {
            agent_->add_transition(
                {pending_->state, pending_->action, history.steps.back().reward, state});
            if (agent_->ready_to_train()) agent_->train_step(rng);
        }

        const double frac =
            total_steps_ > 1 ? static_cast<double>(t) / static_cast<double>(total_steps_ - 1) : 0.0;
        const double sigma = options_.noise_start + (options_.noise_end - options_.noise_start) * frac;
        std::vector<double> action = agent_->act(state, sigma, rng);
        pending_ = Pending{state, action};
        return action_to_configuration(action);
    }

    Configuration action_to_configuration(const std::vector<double>& action) const {
        Configuration c = space_.default_configuration();
        const auto& tunable = space_.tunable_indices();
        for (std::size_t i = 0; i < tunable.size(); ++i) {
            const double u = 0.5 * (std::clamp(action[i], -1.0, 1.0) + 1.0);
            c.values[tunable[i]] = from_unit(space_.param(tunable[i]), u);
        }
        return c;
    }

    nlohmann::ordered_json checkpoint_state() const override {
        nlohmann::ordered_json j;
        j["agent"] = agent_->checkpoint();
        if (pending_) {
            j["pending_state"] = pending_->state;
            j["pending_action"] = pending_->action;
        }
        return j;
    }

    void restore_state(const nlohmann::ordered_json& j, const TuningHistory&) override {
        agent_->restore(j.at("agent"));
        if (j.contains("pending_state"))
            pending_ = Pending{j.at("pending_state").get<std::vector<double>>(),
                               j.at("pending_action").get<std::vector<double>>()};
    }

private:
    struct Pending {
        std::vector<double> state;
        std::vector<double> action;
    };

    ParameterSpace space_;
    std::uint64_t seed_;
    std::size_t total_steps_;
    Options options_;
    std::unique_ptr<DdpgAgent> agent_;
    std::optional<Pending> pending_;
};

enum class OptimizerKind { random, bo, rl };

inline const char* to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::random: return "random";
        case OptimizerKind::bo: return "bo";
        case OptimizerKind::rl: return "rl";
    }
    return "?";
}

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "random") return OptimizerKind::random;
    if (s == "bo") return OptimizerKind::bo;
    if (s == "rl") return OptimizerKind::rl;
    throw std::invalid_argument("unknown optimizer: " + s + " (expected random|bo|rl)");
}

inline std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, const ParameterSpace& space,
                                                 std::uint64_t seed, std::size_t total_steps,
                                                 std::size_t metrics_dim) {
    switch (kind) {
        case OptimizerKind::random: return std::make_unique<RandomSearch>(space, seed);
        case OptimizerKind::bo: return std::make_unique<BayesOpt>(space, seed);
        case OptimizerKind::rl:
            return std::make_unique<DdpgOptimizer>(space, seed, total_steps, metrics_dim);
    }
    throw std::logic_error("unreachable");
}

} // namespace knobtune
