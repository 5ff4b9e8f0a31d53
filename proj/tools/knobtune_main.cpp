// knobtune: black-box configuration tuning pipeline.
//
// Subcommands mirror the pipeline stages: sample a design and measure it,
// select the influential parameters, tune with one of three optimizers,
// re-evaluate the best configurations, and compare methods. `validity`
// reports valid-configuration rates for range-factor and subset-size sweeps.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "knobtune/environment.hpp"
#include "knobtune/jsonl.hpp"
#include "knobtune/manifest.hpp"
#include "knobtune/pipeline.hpp"
#include "knobtune/simulator.hpp"

namespace {

using namespace knobtune;

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> env_kind;
    std::optional<double> noise_cv;
    std::vector<std::string> adapter_command;
    double adapter_timeout = 600.0;
    std::string adapter_workdir = "adapter_work";
};

RunConfig build_run_config(const GlobalOpts& g) {
    RunConfig rc;
    if (!g.config_path.empty()) {
        std::ifstream in(g.config_path);
        if (!in) throw std::runtime_error("cannot open run config: " + g.config_path);
        nlohmann::ordered_json doc;
        in >> doc;
        rc = run_config_from_json(doc);
    }
    if (g.seed) rc.seed = *g.seed;
    if (g.out) rc.out_dir = *g.out;
    if (g.env_kind) {
        if (*g.env_kind == "sim") {
            rc.env.kind = EnvironmentSpec::Kind::sim;
        } else if (*g.env_kind == "external") {
            rc.env.kind = EnvironmentSpec::Kind::external;
        } else {
            throw CLI::ValidationError("--env must be sim or external");
        }
    }
    if (g.noise_cv) rc.env.sim_noise_cv = *g.noise_cv;
    if (!g.adapter_command.empty()) {
        rc.env.adapter.command = g.adapter_command;
        rc.env.adapter.timeout_s = g.adapter_timeout;
        rc.env.adapter.workdir = g.adapter_workdir;
    }
    return rc;
}

int cmd_validity(const RunConfig& base, const std::string& manifest_path,
                 std::vector<double> prfs, std::vector<std::size_t> rss_values, std::size_t n,
                 std::size_t n_seeds, const std::string& strategy) {
    const ParameterSpace manifest = load_manifest(manifest_path);
    nlohmann::ordered_json report;
    report["_meta"] = make_meta(base.seed, {manifest_path});
    auto& rows = report["rates"] = nlohmann::ordered_json::array();

    for (double prf : prfs) {
        const ParameterSpace space = with_prf(manifest, prf);

        std::vector<std::optional<std::size_t>> subsets;
        if (rss_values.empty())
            subsets.push_back(std::nullopt);
        else
            for (std::size_t r : rss_values) subsets.push_back(r);

        for (const auto& rss : subsets) {
            double total = 0.0;
            for (std::size_t s = 0; s < n_seeds; ++s) {
                auto env = make_environment(base.env, space, mix_seed(base.seed, 0xE4, s));
                DesignSpec dspec;
                dspec.strategy = strategy == "lhs" ? SamplingStrategy::lhs
                                                   : SamplingStrategy::symmetric_lhs;
                dspec.rss = rss;
                total += validity_rate(space, dspec, n, *env, mix_seed(base.seed, s));
            }
            const double rate = total / static_cast<double>(n_seeds);
            nlohmann::ordered_json row;
            row["prf"] = prf;
            if (rss) row["rss"] = *rss;
            row["n"] = n;
            row["seeds"] = n_seeds;
            row["validity_rate"] = rate;
            rows.push_back(row);
            std::cout << "prf=" << prf;
            if (rss) std::cout << " rss=" << *rss;
            std::cout << " validity_rate=" << rate << "\n";
        }
    }
    std::filesystem::create_directories(base.out_dir);
    const auto path = std::filesystem::path(base.out_dir) / "validity.json";
    std::ofstream(path) << report.dump(2) << '\n';
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"knobtune: black-box configuration self-tuning"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "run-config JSON file");
    app.add_option("--seed", g.seed, "base random seed");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--env", g.env_kind, "evaluation target: sim|external");
    app.add_option("--noise-cv", g.noise_cv, "simulator noise coefficient of variation");
    app.add_option("--adapter-cmd", g.adapter_command,
                   "external adapter command (argv; config path is appended)");
    app.add_option("--adapter-timeout", g.adapter_timeout, "external adapter timeout, seconds");
    app.add_option("--adapter-workdir", g.adapter_workdir, "external adapter working directory");

    // sample
    auto* sample = app.add_subcommand("sample", "generate a design and evaluate it");
    std::string manifest_path;
    std::size_t n_samples = 200;
    std::size_t rss = 50;
    double prf_override = 0.0;
    sample->add_option("--manifest", manifest_path, "parameter manifest")->required();
    sample->add_option("--n", n_samples, "number of configurations");
    sample->add_option("--rss", rss, "random subset size (0 = all parameters)");
    auto* prf_opt =
        sample->add_option("--prf", prf_override, "re-derive ranges at this range factor");

    // select
    auto* select = app.add_subcommand("select", "rank parameters and write a reduced manifest");
    std::string design_path, outcomes_path;
    double coverage = 0.9;
    select->add_option("--manifest", manifest_path, "parameter manifest")->required();
    select->add_option("--design", design_path, "design JSONL from `sample`")->required();
    select->add_option("--outcomes", outcomes_path, "outcomes JSONL from `sample`")->required();
    select->add_option("--coverage", coverage, "importance coverage target in (0,1]");

    // tune
    auto* tune = app.add_subcommand("tune", "run an optimizer against the environment");
    std::string optimizer_name = "bo";
    std::size_t steps = 200, repetitions = 3, jobs = 1;
    tune->add_option("--manifest", manifest_path, "parameter manifest (usually reduced)")
        ->required();
    tune->add_option("--optimizer", optimizer_name, "random|bo|rl");
    tune->add_option("--steps", steps, "evaluations per run");
    tune->add_option("--repetitions", repetitions, "independent runs");
    tune->add_option("--jobs", jobs, "concurrent repetitions");

    // evaluate-best
    auto* evaluate = app.add_subcommand("evaluate-best", "re-evaluate best configurations");
    std::vector<std::string> best_files;
    std::size_t repeats = 5;
    std::string label = "method", eval_out;
    evaluate->add_option("--manifest", manifest_path, "parameter manifest")->required();
    evaluate->add_option("--best", best_files, "best-config JSON files")->required();
    evaluate->add_option("--repeats", repeats, "re-evaluations per configuration");
    evaluate->add_option("--label", label, "method label for the measurement table");
    evaluate->add_option("--measurements", eval_out, "output measurements file")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "statistical comparison of methods");
    std::vector<std::string> eval_specs, log_specs;
    compare->add_option("--evals", eval_specs, "label=measurements.jsonl (repeatable)")
        ->required();
    compare->add_option("--logs", log_specs, "label=log1,log2,... run logs (repeatable)");

    // validity
    auto* validity = app.add_subcommand("validity", "valid-configuration rate sweeps");
    std::vector<double> prfs{2.0, 10.0, 100.0};
    std::vector<std::size_t> rss_values;
    std::size_t vn = 100, vseeds = 1;
    std::string vstrategy = "lhs";
    validity->add_option("--manifest", manifest_path, "parameter manifest")->required();
    validity->add_option("--prf", prfs, "range factors to sweep");
    validity->add_option("--rss", rss_values, "subset sizes to sweep (optional)");
    validity->add_option("--n", vn, "design size per rate");
    validity->add_option("--seeds", vseeds, "seeds to average over");
    validity->add_option("--strategy", vstrategy, "lhs|symmetric_lhs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig rc = build_run_config(g);

        if (sample->parsed()) {
            rc.manifest_path = manifest_path;
            rc.samples = n_samples;
            rc.rss = rss;
            if (prf_opt->count() > 0) {
                rc.prf = prf_override;
                rc.prf_set = true;
            }
            const SampleResult r = run_sample(rc);
            std::cout << "design:    " << r.design_path << "\n"
                      << "outcomes:  " << r.outcomes_path << "\n"
                      << "validity rate: " << r.validity << "\n";
        } else if (select->parsed()) {
            const SelectResult r = run_select(manifest_path, design_path, outcomes_path, coverage,
                                              rc.out_dir, rc.seed);
            std::cout << "ranking:          " << r.ranking_path << "\n"
                      << "reduced manifest: " << r.reduced_manifest_path << " ("
                      << r.selected.size() << " parameters)\n";
        } else if (tune->parsed()) {
            rc.manifest_path = manifest_path;
            rc.optimizer = optimizer_kind_from_string(optimizer_name);
            rc.steps = steps;
            rc.repetitions = repetitions;
            rc.jobs = jobs;
            const TuneResult r = run_tune(rc);
            for (const auto& run : r.runs)
                std::cout << run.best_path << " best=" << run.history.best_throughput
                          << " default=" << run.history.default_throughput << "\n";
        } else if (evaluate->parsed()) {
            const EvaluateBestResult r = run_evaluate_best(manifest_path, best_files, repeats,
                                                           rc.env, eval_out, rc.seed, label);
            std::cout << "measurements: " << r.measurements_path << " ("
                      << r.measurements.size() << " rows, default mean " << r.default_mean
                      << ")\n";
        } else if (compare->parsed()) {
            std::vector<MethodMeasurements> methods;
            for (const auto& spec : eval_specs) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos)
                    throw CLI::ValidationError("--evals expects label=path");
                methods.push_back(load_measurements(spec.substr(0, eq), spec.substr(eq + 1)));
            }
            std::map<std::string, std::vector<std::string>> logs;
            for (const auto& spec : log_specs) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos)
                    throw CLI::ValidationError("--logs expects label=path1,path2,...");
                std::vector<std::string> paths;
                std::istringstream ss(spec.substr(eq + 1));
                std::string p;
                while (std::getline(ss, p, ','))
                    if (!p.empty()) paths.push_back(p);
                logs[spec.substr(0, eq)] = std::move(paths);
            }
            const CompareResult r = run_compare(methods, logs, rc.out_dir, rc.seed);
            std::cout << r.report.dump(2) << "\n";
            std::cout << "report: " << r.report_path << "\n";
            if (!logs.empty()) std::cout << "trace:  " << r.trace_path << "\n";
        } else if (validity->parsed()) {
            return cmd_validity(rc, manifest_path, prfs, rss_values, vn, vseeds, vstrategy);
        }
        return 0;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
