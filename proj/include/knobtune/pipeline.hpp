#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "knobtune/environment.hpp"
#include "knobtune/external_adapter.hpp"
#include "knobtune/forest.hpp"
#include "knobtune/jsonl.hpp"
#include "knobtune/manifest.hpp"
#include "knobtune/optimizers.hpp"
#include "knobtune/simulator.hpp"
#include "knobtune/stats.hpp"

namespace knobtune {

/// How a pipeline stage reaches its evaluation target.
struct EnvironmentSpec {
    enum class Kind { sim, external } kind = Kind::sim;
    std::optional<double> sim_noise_cv; // overrides the simulator default
    AdapterSpec adapter;                // used when kind == external
};

inline std::unique_ptr<Environment> make_environment(const EnvironmentSpec& spec,
                                                     const ParameterSpace& space,
                                                     std::uint64_t seed) {
    if (spec.kind == EnvironmentSpec::Kind::external)
        return std::make_unique<ExternalAdapter>(spec.adapter, space);
    static std::shared_ptr<const Simulator> shared_sim =
        std::make_shared<Simulator>(default_simulator_spec());
    return std::make_unique<SimulatorEnvironment>(shared_sim, space, seed, spec.sim_noise_cv);
}

/// Run settings shared by the pipeline stages. Defaults mirror the intended
/// protocol: prf 10, rss 50, 200 samples, 0.9 coverage, 200 steps, 3
/// repetitions, 5 re-evaluations.
struct RunConfig {
    std::string manifest_path;
    EnvironmentSpec env;
    double prf = 10.0;
    bool prf_set = false; // respace the manifest only when prf was given explicitly
    std::size_t rss = 50;
    std::size_t samples = 200;
    double coverage = 0.9;
    OptimizerKind optimizer = OptimizerKind::bo;
    std::size_t steps = 200;
    std::size_t repetitions = 3;
    std::size_t repeats = 5;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::size_t jobs = 1;

    void validate() const {
        if (steps < 1) throw std::invalid_argument("steps must be >= 1");
        if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
        if (samples < 1) throw std::invalid_argument("sample count must be >= 1");
        if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
        if (!(coverage > 0.0 && coverage <= 1.0))
            throw std::invalid_argument("coverage must be in (0, 1]");
    }
};

inline RunConfig run_config_from_json(const nlohmann::ordered_json& j) {
    RunConfig rc;
    if (j.contains("manifest")) rc.manifest_path = j["manifest"].get<std::string>();
    if (j.contains("prf")) {
        rc.prf = j["prf"].get<double>();
        rc.prf_set = true;
    }
    if (j.contains("rss")) rc.rss = j["rss"].get<std::size_t>();
    if (j.contains("samples")) rc.samples = j["samples"].get<std::size_t>();
    if (j.contains("coverage")) rc.coverage = j["coverage"].get<double>();
    if (j.contains("optimizer"))
        rc.optimizer = optimizer_kind_from_string(j["optimizer"].get<std::string>());
    if (j.contains("steps")) rc.steps = j["steps"].get<std::size_t>();
    if (j.contains("repetitions")) rc.repetitions = j["repetitions"].get<std::size_t>();
    if (j.contains("repeats")) rc.repeats = j["repeats"].get<std::size_t>();
    if (j.contains("seed")) rc.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) rc.out_dir = j["out"].get<std::string>();
    if (j.contains("jobs")) rc.jobs = j["jobs"].get<std::size_t>();
    if (j.contains("env")) {
        const auto& e = j["env"];
        const std::string kind = e.value("type", "sim");
        if (kind == "sim") {
            rc.env.kind = EnvironmentSpec::Kind::sim;
            if (e.contains("noise_cv")) rc.env.sim_noise_cv = e["noise_cv"].get<double>();
        } else if (kind == "external") {
            rc.env.kind = EnvironmentSpec::Kind::external;
            rc.env.adapter.command = e.at("command").get<std::vector<std::string>>();
            rc.env.adapter.timeout_s = e.value("timeout_s", 600.0);
            rc.env.adapter.workdir = e.value("workdir", ".");
            rc.env.adapter.metrics_dim = e.value("metrics_dim", std::size_t{0});
        } else {
            throw std::invalid_argument("env.type must be sim or external");
        }
    }
    return rc;
}

// ---------------------------------------------------------------------------
// stage 3: sample

struct SampleResult {
    std::string design_path;
    std::string outcomes_path;
    double validity = 0.0;
};

inline nlohmann::ordered_json outcome_json(const EvaluationOutcome& o) {
    nlohmann::ordered_json j;
    j["valid"] = o.valid;
    j["throughput"] = o.throughput;
    j["metrics"] = o.metrics;
    j["duration_s"] = o.duration_s;
    return j;
}

inline EvaluationOutcome outcome_from_json(const nlohmann::ordered_json& j) {
    EvaluationOutcome o;
    o.valid = j.at("valid").get<bool>();
    o.throughput = j.at("throughput").get<double>();
    o.metrics = j.value("metrics", std::vector<double>{});
    o.duration_s = j.value("duration_s", 0.0);
    return o;
}

/// Generates a symmetric-LHS + random-subset design, evaluates every
/// configuration, and writes the design and outcome files.
inline SampleResult run_sample(const RunConfig& rc) {
    rc.validate();
    ParameterSpace space = load_manifest(rc.manifest_path);
    if (rc.prf_set && rc.prf != space.prf()) space = with_prf(space, rc.prf);
    auto env = make_environment(rc.env, space, mix_seed(rc.seed, 0xE4));

    DesignSpec dspec;
    dspec.strategy = SamplingStrategy::symmetric_lhs;
    if (rc.rss > 0 && rc.rss < space.tunable_indices().size()) dspec.rss = rc.rss;
    const Design design = generate_design(space, dspec, rc.samples, rc.seed);

    std::vector<EvaluationOutcome> outcomes;
    outcomes.reserve(design.configs.size());
    std::size_t valid = 0;
    for (const auto& c : design.configs) {
        outcomes.push_back(env->evaluate(c));
        if (outcomes.back().valid) ++valid;
    }

    std::filesystem::create_directories(rc.out_dir);
    SampleResult result;
    result.design_path = (std::filesystem::path(rc.out_dir) / "design.jsonl").string();
    result.outcomes_path = (std::filesystem::path(rc.out_dir) / "outcomes.jsonl").string();
    result.validity = static_cast<double>(valid) / static_cast<double>(design.configs.size());

    save_design(design, space, result.design_path, {rc.manifest_path});
    JsonlWriter w(result.outcomes_path);
    w.write_meta(make_meta(rc.seed, {rc.manifest_path, result.design_path}));
    for (const auto& o : outcomes) w.write(outcome_json(o));
    return result;
}

// ---------------------------------------------------------------------------
// stage 4: feature selection

struct SelectResult {
    std::string ranking_path;
    std::string reduced_manifest_path;
    std::vector<std::size_t> selected; // indices into the sampling space
    ImportanceRanking ranking;
};

/// Fits the importance forest on a design + outcomes pair and writes the
/// ranking report plus a reduced manifest of the selected parameters.
inline SelectResult run_select(const std::string& manifest_path, const std::string& design_path,
                               const std::string& outcomes_path, double coverage,
                               const std::string& out_dir, std::uint64_t seed) {
    const ParameterSpace space = load_manifest(manifest_path);
    const std::vector<Configuration> configs = load_design_configs(space, design_path);
    const auto outcome_rows = read_jsonl(outcomes_path);
    if (configs.size() != outcome_rows.size())
        throw std::runtime_error("design and outcomes row counts differ");
    if (configs.size() < 2) throw std::runtime_error("need at least 2 sampled rows");

    const auto& tunable = space.tunable_indices();
    std::vector<std::vector<double>> x(configs.size(), std::vector<double>(tunable.size()));
    std::vector<double> y(configs.size());
    for (std::size_t r = 0; r < configs.size(); ++r) {
        for (std::size_t i = 0; i < tunable.size(); ++i)
            x[r][i] = to_unit(space.param(tunable[i]), configs[r].values[tunable[i]]);
        const EvaluationOutcome o = outcome_from_json(outcome_rows[r]);
        y[r] = o.valid ? o.throughput : 0.0; // invalid rows teach the validity boundary
    }

    ForestParams fp;
    fp.seed = mix_seed(seed, 0xF02E);
    const Forest forest = Forest::fit(x, y, fp);
    ImportanceRanking ranking = importance(forest);
    std::vector<std::size_t> selected = select_by_coverage(ranking, coverage);

    std::filesystem::create_directories(out_dir);
    SelectResult result;
    result.ranking_path = (std::filesystem::path(out_dir) / "ranking.json").string();
    result.reduced_manifest_path =
        (std::filesystem::path(out_dir) / "reduced_manifest.json").string();

    nlohmann::ordered_json report;
    report["_meta"] = make_meta(seed, {manifest_path, design_path, outcomes_path});
    auto& entries = report["ranking"] = nlohmann::ordered_json::array();
    double cum = 0.0;
    for (std::size_t idx : ranking.order) {
        cum += ranking.importances[idx];
        nlohmann::ordered_json e;
        e["name"] = space.param(tunable[idx]).name;
        e["importance"] = ranking.importances[idx];
        e["cumulative"] = cum;
        entries.push_back(std::move(e));
    }
    std::ofstream(result.ranking_path) << report.dump(2) << '\n';

    std::vector<ParameterSpec> reduced;
    for (std::size_t idx : selected) reduced.push_back(space.param(tunable[idx]));
    save_manifest(ParameterSpace(std::move(reduced), space.prf()), result.reduced_manifest_path);

    for (std::size_t idx : selected) result.selected.push_back(tunable[idx]);
    result.ranking = std::move(ranking);
    return result;
}

// ---------------------------------------------------------------------------
// stage 5: tuning runs

struct StepLogRecord {
    std::size_t step = 0;
    std::string method;
    double wall_ms = 0.0;
};

struct TuneRunResult {
    TuningHistory history;
    std::string log_path;
    std::string best_path;
    std::string checkpoint_path;
};

namespace detail {

inline nlohmann::ordered_json history_checkpoint(const TuningHistory& h) {
    nlohmann::ordered_json j;
    j["default_outcome"] = outcome_json(h.default_outcome);
    auto& rows = j["steps"] = nlohmann::ordered_json::array();
    for (const auto& s : h.steps) {
        nlohmann::ordered_json r;
        r["config"] = s.config.values;
        r["outcome"] = outcome_json(s.outcome);
        rows.push_back(std::move(r));
    }
    return j;
}

inline TuningHistory history_from_checkpoint(const nlohmann::ordered_json& j,
                                             const ParameterSpace& space) {
    TuningHistory h;
    h.start(space.default_configuration(), outcome_from_json(j.at("default_outcome")));
    for (const auto& r : j.at("steps")) {
        Configuration c;
        c.values = r.at("config").get<std::vector<double>>();
        h.record(std::move(c), outcome_from_json(r.at("outcome")));
    }
    return h;
}

} // namespace detail

/// Drives one tuning run of `steps` evaluations past the initial default
/// measurement, writing a per-step JSON-lines log, a best-config file, and a
/// resumable checkpoint. `stop_after` caps the steps executed by this
/// invocation (simulating interruption); the run target stays `steps`.
inline TuneRunResult run_tuning(const ParameterSpace& space, Environment& env,
                                OptimizerKind kind, std::size_t steps, std::uint64_t seed,
                                const std::string& out_dir, const std::string& run_tag,
                                const std::vector<std::string>& input_paths = {},
                                std::size_t stop_after = SIZE_MAX) {
    std::filesystem::create_directories(out_dir);
    TuneRunResult result;
    const auto dir = std::filesystem::path(out_dir);
    result.log_path = (dir / (run_tag + "_log.jsonl")).string();
    result.best_path = (dir / (run_tag + "_best.json")).string();
    result.checkpoint_path = (dir / (run_tag + "_checkpoint.json")).string();

    auto optimizer = make_optimizer(kind, space, seed, steps, env.metrics_dim());

    TuningHistory history;
    std::size_t start_step = 0;
    std::vector<nlohmann::ordered_json> log_rows;

    if (std::filesystem::exists(result.checkpoint_path)) {
        nlohmann::ordered_json ck;
        std::ifstream(result.checkpoint_path) >> ck;
        if (ck.at("steps_done").get<std::size_t>() <= steps &&
            ck.at("method").get<std::string>() == to_string(kind) &&
            ck.at("seed").get<std::uint64_t>() == seed) {
            history = detail::history_from_checkpoint(ck.at("history"), space);
            optimizer->restore_state(ck.at("optimizer"), history);
            start_step = history.steps.size();
            if (std::filesystem::exists(result.log_path)) {
                for (const auto& row : read_jsonl(result.log_path)) log_rows.push_back(row);
                log_rows.resize(std::min(log_rows.size(), start_step));
            }
            if (log_rows.size() < start_step) {
                // log lost; rebuild the semantic fields from the checkpoint
                log_rows.clear();
                double best = 0.0;
                for (std::size_t t = 0; t < history.steps.size(); ++t) {
                    const StepRecord& rec = history.steps[t];
                    if (rec.outcome.valid) best = std::max(best, rec.outcome.throughput);
                    nlohmann::ordered_json row;
                    row["step"] = t;
                    row["method"] = optimizer->name();
                    row["config"] = configuration_json(space, rec.config);
                    row["valid"] = rec.outcome.valid;
                    row["throughput"] = rec.outcome.throughput;
                    row["reward"] = rec.reward;
                    row["best_so_far"] = best;
                    row["wall_ms"] = 0.0;
                    log_rows.push_back(std::move(row));
                }
            }
        }
    }

    if (start_step == 0) {
        const Configuration default_config = space.default_configuration();
        const EvaluationOutcome default_outcome = env.evaluate(default_config);
        if (!default_outcome.valid || !(default_outcome.throughput > 0.0))
            throw std::runtime_error(
                "default configuration is invalid in this environment; nothing to normalize "
                "rewards against");
        history.start(default_config, default_outcome);
    }

    const std::size_t end_step = std::min(steps, stop_after == SIZE_MAX ? steps : stop_after);
    for (std::size_t t = start_step; t < end_step; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        Configuration config = optimizer->next(history);
        EvaluationOutcome outcome = env.evaluate(config);
        history.record(config, std::move(outcome));
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();

        const StepRecord& rec = history.steps.back();
        nlohmann::ordered_json row;
        row["step"] = t;
        row["method"] = optimizer->name();
        row["config"] = configuration_json(space, rec.config);
        row["valid"] = rec.outcome.valid;
        row["throughput"] = rec.outcome.throughput;
        row["reward"] = rec.reward;
        row["best_so_far"] = history.best_throughput;
        row["wall_ms"] = wall_ms;
        log_rows.push_back(std::move(row));

        nlohmann::ordered_json ck;
        ck["meta"] = make_meta(seed, input_paths);
        ck["method"] = to_string(kind);
        ck["seed"] = seed;
        ck["steps_done"] = t + 1;
        ck["history"] = detail::history_checkpoint(history);
        ck["optimizer"] = optimizer->checkpoint_state();
        std::ofstream(result.checkpoint_path) << ck.dump() << '\n';
    }

    {
        JsonlWriter w(result.log_path);
        w.write_meta(make_meta(seed, input_paths));
        for (const auto& row : log_rows) w.write(row);
    }
    {
        nlohmann::ordered_json best;
        best["_meta"] = make_meta(seed, input_paths);
        best["method"] = to_string(kind);
        best["best_throughput"] = history.best_throughput;
        best["default_throughput"] = history.default_throughput;
        best["any_valid"] = history.best_throughput > 0.0;
        best["config"] = configuration_json(space, history.best_config);
        std::ofstream(result.best_path) << best.dump(2) << '\n';
    }

    result.history = std::move(history);
    return result;
}

struct TuneResult {
    std::vector<TuneRunResult> runs;
};

/// Stage 5 entry point: `repetitions` independent runs with derived seeds.
inline TuneResult run_tune(const RunConfig& rc) {
    rc.validate();
    const ParameterSpace space = load_manifest(rc.manifest_path);
    TuneResult result;
    result.runs.resize(rc.repetitions);

    auto run_one = [&](std::size_t rep) {
        const std::uint64_t run_seed = mix_seed(rc.seed, 0x52EF, rep);
        auto env = make_environment(rc.env, space, run_seed);
        const std::string tag =
            std::string(to_string(rc.optimizer)) + "_rep" + std::to_string(rep);
        result.runs[rep] = run_tuning(space, *env, rc.optimizer, rc.steps, run_seed, rc.out_dir,
                                      tag, {rc.manifest_path});
    };

    if (rc.jobs > 1 && rc.repetitions > 1) {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(rc.repetitions);
        for (std::size_t rep = 0; rep < rc.repetitions; ++rep)
            workers.emplace_back([&, rep] {
                try {
                    run_one(rep);
                } catch (...) {
                    errors[rep] = std::current_exception();
                }
            });
        for (auto& t : workers) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    } else {
        for (std::size_t rep = 0; rep < rc.repetitions; ++rep) run_one(rep);
    }
    return result;
}

// ---------------------------------------------------------------------------
// re-evaluation of best configurations

struct EvaluateBestResult {
    std::string measurements_path;
    std::vector<double> measurements; // repeats per config, concatenated
    double default_mean = 0.0;
};

/// Re-evaluates each best-config file `repeats` times plus the default
/// configuration, and writes one measurement table for the method.
inline EvaluateBestResult run_evaluate_best(const std::string& manifest_path,
                                            const std::vector<std::string>& best_paths,
                                            std::size_t repeats, const EnvironmentSpec& env_spec,
                                            const std::string& out_path, std::uint64_t seed,
                                            const std::string& label) {
    if (best_paths.empty()) throw std::invalid_argument("no best-config files given");
    const ParameterSpace space = load_manifest(manifest_path);
    // the label enters the seed so different methods see independent noise
    auto env = make_environment(env_spec, space,
                                mix_seed(seed, 0xEBE5, hash_string(label)));

    EvaluateBestResult result;
    result.measurements_path = out_path;

    std::vector<nlohmann::ordered_json> rows;
    std::vector<double> default_samples;
    for (std::size_t r = 0; r < repeats; ++r)
        default_samples.push_back(env->evaluate(space.default_configuration()).throughput);
    result.default_mean = summarize(default_samples).first;

    for (std::size_t ci = 0; ci < best_paths.size(); ++ci) {
        nlohmann::ordered_json doc;
        std::ifstream in(best_paths[ci]);
        if (!in) throw std::runtime_error("cannot open best-config file: " + best_paths[ci]);
        in >> doc;
        const Configuration config = configuration_from_json(space, doc.at("config"));
        for (std::size_t r = 0; r < repeats; ++r) {
            const EvaluationOutcome o = env->evaluate(config);
            nlohmann::ordered_json row;
            row["method"] = label;
            row["config_index"] = ci;
            row["repeat"] = r;
            row["valid"] = o.valid;
            row["throughput"] = o.throughput;
            if (!o.valid) row["flagged"] = true; // invalid on re-evaluation
            rows.push_back(std::move(row));
            result.measurements.push_back(o.throughput);
        }
    }

    std::filesystem::create_directories(std::filesystem::path(out_path).parent_path().empty()
                                            ? "."
                                            : std::filesystem::path(out_path).parent_path().string());
    JsonlWriter w(out_path);
    auto meta = make_meta(seed, best_paths);
    meta["label"] = label;
    meta["default_mean"] = result.default_mean;
    meta["repeats"] = repeats;
    w.write_meta(meta);
    for (const auto& row : rows) w.write(row);
    return result;
}

// ---------------------------------------------------------------------------
// comparison report

struct MethodMeasurements {
    std::string label;
    std::vector<double> values;
    double default_mean = 0.0;
};

inline MethodMeasurements load_measurements(const std::string& label, const std::string& path) {
    MethodMeasurements m;
    m.label = label;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open measurements: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::ordered_json::parse(line);
        if (is_meta_line(j)) {
            m.default_mean = j["_meta"].value("default_mean", 0.0);
            continue;
        }
        m.values.push_back(j.at("throughput").get<double>());
    }
    if (m.values.empty()) throw std::runtime_error("no measurements in " + path);
    return m;
}

struct CompareResult {
    nlohmann::ordered_json report;
    std::string report_path;
    std::string trace_path;
};

/// Per-method mean/sd and improvement over default, pairwise paired t-tests,
/// and the averaged best-so-far trace CSV across the supplied run logs.
inline CompareResult run_compare(const std::vector<MethodMeasurements>& methods,
                                 const std::map<std::string, std::vector<std::string>>& run_logs,
                                 const std::string& out_dir, std::uint64_t seed) {
    if (methods.size() < 2) throw std::invalid_argument("compare: need at least 2 methods");
    for (std::size_t i = 1; i < methods.size(); ++i)
        if (methods[i].values.size() != methods[0].values.size())
            throw std::invalid_argument("compare: measurement counts differ between " +
                                        methods[0].label + " and " + methods[i].label);

    std::filesystem::create_directories(out_dir);
    CompareResult result;
    result.report_path = (std::filesystem::path(out_dir) / "comparison.json").string();
    result.trace_path = (std::filesystem::path(out_dir) / "best_so_far.csv").string();

    nlohmann::ordered_json report;
    report["_meta"] = make_meta(seed);
    auto& per_method = report["methods"] = nlohmann::ordered_json::object();
    for (const auto& m : methods) {
        const auto [mean, sd] = summarize(m.values);
        nlohmann::ordered_json e;
        e["n"] = m.values.size();
        e["mean"] = mean;
        e["sd"] = sd;
        e["default_mean"] = m.default_mean;
        if (m.default_mean > 0.0) e["improvement_pct"] = (mean / m.default_mean - 1.0) * 100.0;
        per_method[m.label] = std::move(e);
    }
    auto& tests = report["paired_t_tests"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < methods.size(); ++i)
        for (std::size_t j = i + 1; j < methods.size(); ++j) {
            const TTestResult t = paired_t_test(methods[i].values, methods[j].values);
            nlohmann::ordered_json e;
            e["a"] = methods[i].label;
            e["b"] = methods[j].label;
            e["t"] = t.t_statistic;
            e["df"] = t.degrees_of_freedom;
            e["p"] = t.p_value;
            e["mean_diff"] = t.mean_diff;
            tests.push_back(std::move(e));
        }

    // averaged best-so-far trace per method
    std::map<std::string, std::vector<double>> traces;
    for (const auto& [label, paths] : run_logs) {
        std::vector<std::vector<double>> runs;
        for (const auto& p : paths) {
            std::vector<double> best;
            for (const auto& row : read_jsonl(p)) best.push_back(row.at("best_so_far").get<double>());
            runs.push_back(std::move(best));
        }
        if (runs.empty()) continue;
        const std::size_t len = runs[0].size();
        std::vector<double> avg(len, 0.0);
        for (const auto& r : runs) {
            if (r.size() != len)
                throw std::runtime_error("compare: run logs for " + label + " have unequal lengths");
            for (std::size_t t = 0; t < len; ++t) avg[t] += r[t];
        }
        for (double& v : avg) v /= static_cast<double>(runs.size());
        traces[label] = std::move(avg);
    }
    if (!traces.empty()) {
        std::ofstream csv(result.trace_path);
        csv << "# tool=knobtune version=" << version() << " seed=" << seed << "\n";
        csv << "step";
        for (const auto& [label, _] : traces) csv << ',' << label;
        csv << '\n';
        const std::size_t len = traces.begin()->second.size();
        for (std::size_t t = 0; t < len; ++t) {
            csv << t;
            for (const auto& [_, trace] : traces)
                csv << ',' << (t < trace.size() ? trace[t] : 0.0);
            csv << '\n';
        }
    }

    std::ofstream(result.report_path) << report.dump(2) << '\n';
    result.report = std::move(report);
    return result;
}

} // namespace knobtune
