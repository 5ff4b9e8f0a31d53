#include <catch2/catch.hpp>

#include <cmath>
#include <memory>

#include "knobtune/optimizers.hpp"
#include "knobtune/simulator.hpp"

#include "test_util.hpp"

using namespace knobtune;
using testutil::make_param;

namespace {

// 1-d noiseless environment with a quadratic response peaking inside the range
class QuadraticEnv {
public:
    explicit QuadraticEnv(double peak_x = 0.7)
        : peak_(peak_x),
          space_({make_param("x", 0.5, 0.0, 1.0)}, 10.0),
          env_(space_, 1, [this](const Configuration& c) { return eval(c); }) {}

    CallableEnvironment& env() { return env_; }
    const ParameterSpace& space() const { return space_; }
    std::size_t evaluations() const { return count_; }
    double best_possible() const { return 100.0; }

private:
    EvaluationOutcome eval(const Configuration& c) {
        ++count_;
        const double x = c.values[0];
        EvaluationOutcome o;
        o.valid = true;
        o.throughput = 100.0 - 80.0 * (x - peak_) * (x - peak_);
        o.metrics = {o.throughput / 100.0};
        return o;
    }

    double peak_;
    ParameterSpace space_;
    CallableEnvironment env_;
    std::size_t count_ = 0;
};

TuningHistory drive(Environment& env, Optimizer& opt, std::size_t steps) {
    const Configuration def = env.space().default_configuration();
    TuningHistory h;
    h.start(def, env.evaluate(def));
    REQUIRE(h.default_outcome.valid);
    for (std::size_t t = 0; t < steps; ++t) {
        Configuration c = opt.next(h);
        env.space().validate_configuration(c);
        h.record(c, env.evaluate(c));
    }
    return h;
}

} // namespace

TEST_CASE("reward is relative improvement over the default") {
    CHECK(reward(47.8, 47.8) == 0.0);
    CHECK(reward(66.0, 47.8) == Approx(0.3807531380753139).margin(1e-12));
    CHECK(reward(0.0, 47.8) == -1.0); // invalid step: zero throughput
    CHECK_THROWS_AS(reward(50.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(reward(50.0, -1.0), std::invalid_argument);
}

TEST_CASE("random search splits halves evenly and stays in range") {
    const ParameterSpace space({make_param("x", 1.0, 0.1, 10.0)}, 10.0);
    Rng rng(1234);
    std::size_t below = 0;
    const std::size_t n = 10000;
    for (std::size_t i = 0; i < n; ++i) {
        const Configuration c = random_search_suggest(space, rng);
        REQUIRE(c.values[0] >= 0.1);
        REQUIRE(c.values[0] <= 10.0);
        if (c.values[0] < 1.0) ++below;
    }
    const double fraction = double(below) / double(n);
    CHECK(fraction == Approx(0.5).margin(0.02));
}

TEST_CASE("random search is deterministic per seed and step") {
    const ParameterSpace space(
        {make_param("x", 1.0, 0.1, 10.0), make_param("k", 100.0, 10.0, 1000.0, ParamKind::integer)},
        10.0);
    RandomSearch a(space, 9), b(space, 9), c(space, 10);
    TuningHistory h;
    EvaluationOutcome def;
    def.valid = true;
    def.throughput = 1.0;
    h.start(space.default_configuration(), def);
    const Configuration ca = a.next(h), cb = b.next(h), cc = c.next(h);
    CHECK(ca == cb);
    CHECK_FALSE(ca == cc);
}

TEST_CASE("history tracks a monotone best-so-far trace") {
    QuadraticEnv qe;
    RandomSearch opt(qe.space(), 4);
    const TuningHistory h = drive(qe.env(), opt, 60);

    double best = 0.0;
    for (const auto& s : h.steps) {
        const double current = s.outcome.valid ? s.outcome.throughput : 0.0;
        best = std::max(best, current);
        // recompute the running maximum and compare against the final trace
    }
    CHECK(h.best_throughput == Approx(best));

    double running = 0.0;
    for (const auto& s : h.steps) {
        if (s.outcome.valid) running = std::max(running, s.outcome.throughput);
        CHECK(running <= h.best_throughput + 1e-12);
    }
}

TEST_CASE("every optimizer consumes exactly one evaluation per step") {
    for (const char* name : {"random", "bo", "rl"}) {
        QuadraticEnv qe;
        auto opt = make_optimizer(optimizer_kind_from_string(name), qe.space(), 5, 40,
                                  qe.env().metrics_dim());
        drive(qe.env(), *opt, 40);
        CHECK(qe.evaluations() == 41); // 40 steps plus the default measurement
    }
}

TEST_CASE("bo cold start replays the initial design") {
    const ParameterSpace space({make_param("x", 1.0, 0.1, 10.0)}, 10.0);
    BayesOpt bo(space, 77);
    const Design expected = symmetric_lhs(space, 10, mix_seed(77, 0xB0D));

    TuningHistory h;
    EvaluationOutcome def;
    def.valid = true;
    def.throughput = 1.0;
    h.start(space.default_configuration(), def);

    const Configuration first = bo.next(h);
    CHECK(first == expected.configs[0]);
}

TEST_CASE("bo finds the quadratic peak and beats random search") {
    double bo_total = 0.0, random_total = 0.0;
    std::size_t bo_hits = 0;
    const std::size_t seeds = 6;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        QuadraticEnv qa;
        BayesOpt bo(qa.space(), seed);
        const TuningHistory hb = drive(qa.env(), bo, 30);
        bo_total += hb.best_throughput;
        if (std::fabs(hb.best_throughput - qa.best_possible()) <= 1e-2) ++bo_hits;

        QuadraticEnv qb;
        RandomSearch rs(qb.space(), seed);
        const TuningHistory hr = drive(qb.env(), rs, 30);
        random_total += hr.best_throughput;
    }
    CHECK(bo_hits >= seeds - 1); // BO localizes the peak almost every time
    CHECK(bo_total / seeds > random_total / seeds);
}

TEST_CASE("bo falls back to the highest predicted mean when no candidate improves") {
    // a densely observed linear response with tiny noise: the surrogate is
    // certain, expected improvement is ~0 everywhere, and the tie rule must
    // pick from the high-mean end
    const ParameterSpace space({make_param("x", 0.5, 0.0, 1.0)}, 10.0);
    CallableEnvironment env(space, 1, [](const Configuration& c) {
        EvaluationOutcome o;
        o.valid = true;
        o.throughput = 10.0 + 5.0 * c.values[0];
        o.metrics = {c.values[0]};
        return o;
    });

    BayesOpt::Options opts;
    opts.n_init = 10;
    opts.noise_variance = 1e-10;
    BayesOpt bo(space, 13, opts);

    TuningHistory h;
    h.start(space.default_configuration(), env.evaluate(space.default_configuration()));
    // observe a fine grid instead of the initial design so the model is sure
    for (int i = 0; i <= 40; ++i) {
        Configuration c = space.default_configuration();
        c.values[0] = i / 40.0;
        h.record(c, env.evaluate(c));
    }
    const Configuration suggestion = bo.next(h);
    CHECK(suggestion.values[0] > 0.85); // the top of the ramp
}

TEST_CASE("bo suggestions are deterministic given seed and history") {
    QuadraticEnv qe;
    BayesOpt a(qe.space(), 3);
    const TuningHistory h = drive(qe.env(), a, 15);

    BayesOpt b(qe.space(), 3), c(qe.space(), 3);
    // replay the same history into two fresh instances
    TuningHistory replay;
    replay.start(qe.space().default_configuration(), h.default_outcome);
    for (const auto& s : h.steps) replay.record(s.config, s.outcome);
    const Configuration cb = b.next(replay);
    const Configuration cc = c.next(replay);
    CHECK(cb == cc);
}

TEST_CASE("ddpg actions anchor to the symmetric transform") {
    const ParameterSpace space(
        {make_param("x", 1.0, 0.1, 10.0), make_param("y", 4.0, 0.4, 40.0)}, 10.0);
    DdpgOptimizer opt(space, 5, 100, 1);

    const Configuration at_default = opt.action_to_configuration({0.0, 0.0});
    CHECK(at_default.values[0] == Approx(1.0));
    CHECK(at_default.values[1] == Approx(4.0));

    const Configuration at_hi = opt.action_to_configuration({1.0, 1.0});
    CHECK(at_hi.values[0] == Approx(10.0));
    CHECK(at_hi.values[1] == Approx(40.0));

    const Configuration at_lo = opt.action_to_configuration({-1.0, -1.0});
    CHECK(at_lo.values[0] == Approx(0.1));
    CHECK(at_lo.values[1] == Approx(0.4));

    // out-of-bounds actions clip to the range ends
    const Configuration clipped = opt.action_to_configuration({7.0, -7.0});
    CHECK(clipped.values[0] == Approx(10.0));
    CHECK(clipped.values[1] == Approx(0.4));
}

TEST_CASE("ddpg improves over the default on a smooth response") {
    QuadraticEnv qe(0.62);
    DdpgOptimizer opt(qe.space(), 11, 120, qe.env().metrics_dim());
    const TuningHistory h = drive(qe.env(), opt, 120);
    const double default_value = 100.0 - 80.0 * (0.5 - 0.62) * (0.5 - 0.62);
    CHECK(h.best_throughput > default_value);
    CHECK(h.best_throughput <= 100.0 + 1e-9);
}

TEST_CASE("optimizers are bit-reproducible on a deterministic environment") {
    auto sim = std::make_shared<const Simulator>(default_simulator_spec());
    std::vector<ParameterSpec> subset;
    for (std::size_t i : sim->spec().important_idx)
        subset.push_back(sim->reference_space().param(i));
    const ParameterSpace space(subset, 10.0);

    for (const char* name : {"random", "bo", "rl"}) {
        const OptimizerKind kind = optimizer_kind_from_string(name);
        auto run = [&]() {
            SimulatorEnvironment env(sim, space, 99, 0.0);
            auto opt = make_optimizer(kind, space, 31, 25, env.metrics_dim());
            return drive(env, *opt, 25);
        };
        const TuningHistory h1 = run();
        const TuningHistory h2 = run();
        REQUIRE(h1.steps.size() == h2.steps.size());
        for (std::size_t i = 0; i < h1.steps.size(); ++i) {
            CHECK(h1.steps[i].config == h2.steps[i].config);
            CHECK(h1.steps[i].outcome.throughput == h2.steps[i].outcome.throughput);
            CHECK(h1.steps[i].reward == h2.steps[i].reward);
        }
        CHECK(h1.best_throughput == h2.best_throughput);
    }
}

TEST_CASE("ddpg keeps training through invalid outcomes") {
    // half the action space crashes; the agent must keep learning from the
    // penalty transitions (zero state, reward -1) without faulting
    const ParameterSpace space({make_param("x", 1.0, 0.1, 10.0)}, 10.0);
    CallableEnvironment env(space, 2, [](const Configuration& c) {
        if (c.values[0] > 3.0) return EvaluationOutcome::invalid_outcome(2);
        EvaluationOutcome o;
        o.valid = true;
        o.throughput = 40.0 + c.values[0];
        o.metrics = {c.values[0] / 10.0, 1.0};
        return o;
    });

    DdpgOptimizer opt(space, 21, 100, env.metrics_dim());
    TuningHistory h;
    h.start(space.default_configuration(), env.evaluate(space.default_configuration()));
    std::size_t invalid_steps = 0;
    for (std::size_t t = 0; t < 100; ++t) {
        Configuration c = opt.next(h);
        h.record(c, env.evaluate(c));
        if (!h.steps.back().outcome.valid) ++invalid_steps;
    }
    CHECK(invalid_steps > 0); // the exploration certainly hit the crash region
    CHECK(opt.agent().replay_size() == 99);
    for (const auto& s : h.steps)
        if (!s.outcome.valid) CHECK(s.reward == -1.0);
    CHECK(h.best_throughput > 0.0);
}

TEST_CASE("invalid outcomes feed the penalty reward into the history") {
    const ParameterSpace space({make_param("x", 0.5, 0.0, 1.0)}, 10.0);
    CallableEnvironment env(space, 2, [](const Configuration& c) {
        EvaluationOutcome o;
        if (c.values[0] > 0.8) return EvaluationOutcome::invalid_outcome(2);
        o.valid = true;
        o.throughput = 50.0;
        o.metrics = {1.0, 2.0};
        return o;
    });

    TuningHistory h;
    h.start(space.default_configuration(), env.evaluate(space.default_configuration()));
    Configuration bad = space.default_configuration();
    bad.values[0] = 0.9;
    h.record(bad, env.evaluate(bad));
    CHECK(h.steps.back().reward == -1.0);
    CHECK(h.steps.back().outcome.metrics == std::vector<double>{0.0, 0.0});
    CHECK(h.best_throughput == 0.0); // nothing valid yet
    CHECK(h.best_config == space.default_configuration());
}
