#pragma once

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "knobtune/environment.hpp"
#include "knobtune/jsonl.hpp"
#include "knobtune/param_space.hpp"

namespace knobtune {

/// How to reach a real target system: a command that reads
/// `<workdir>/config.json` (its path is passed as argv[1]) and writes
/// `<workdir>/result.json` with `{valid, throughput, metrics[]}`.
struct AdapterSpec {
    std::vector<std::string> command;
    double timeout_s = 600.0;
    std::string workdir = ".";
    std::size_t metrics_dim = 0; // used for the zero vector of failed runs
};

/// Runs one external evaluation per call; nonzero exit, timeout or a
/// malformed result file all surface as invalid outcomes rather than errors.
class ExternalAdapter final : public Environment {
public:
    ExternalAdapter(AdapterSpec spec, ParameterSpace space)
        : spec_(std::move(spec)), space_(std::move(space)) {
        if (spec_.command.empty())
            throw std::invalid_argument("external adapter: empty command");
        if (!(spec_.timeout_s > 0.0))
            throw std::invalid_argument("external adapter: timeout must be positive");
        std::filesystem::create_directories(spec_.workdir);
        // fail before any tuning starts rather than on the first evaluation
        const auto& cmd = spec_.command.front();
        if (cmd.find('/') != std::string::npos) {
            if (!std::filesystem::exists(cmd))
                throw std::runtime_error("external adapter: command not found: " + cmd);
        } else if (!on_path(cmd)) {
            throw std::runtime_error("external adapter: command not found on PATH: " + cmd);
        }
    }

    const ParameterSpace& space() const override { return space_; }
    std::size_t metrics_dim() const override { return spec_.metrics_dim; }

    EvaluationOutcome evaluate(const Configuration& config) override {
        const auto start = std::chrono::steady_clock::now();
        space_.validate_configuration(config);

        // absolute, because the child chdirs into the workdir
        const auto config_path =
            std::filesystem::absolute(std::filesystem::path(spec_.workdir) / "config.json");
        const auto result_path = std::filesystem::path(spec_.workdir) / "result.json";
        std::error_code ec;
        std::filesystem::remove(result_path, ec);
        {
            std::ofstream out(config_path);
            if (!out)
                throw std::runtime_error("external adapter: cannot write " + config_path.string());
            out << configuration_json(space_, config).dump(2) << '\n';
        }

        const int status = run_with_timeout(config_path.string());
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (status != 0) return EvaluationOutcome::invalid_outcome(spec_.metrics_dim, elapsed);
        return parse_result(result_path.string(), elapsed);
    }

private:
    static bool on_path(const std::string& cmd) {
        const char* path = std::getenv("PATH");
        if (!path) return false;
        std::istringstream ss(path);
        std::string dir;
        while (std::getline(ss, dir, ':')) {
            if (dir.empty()) continue;
            std::error_code ec;
            if (std::filesystem::exists(std::filesystem::path(dir) / cmd, ec)) return true;
        }
        return false;
    }

    /// Returns the child's exit code, or -1 on timeout / abnormal exit.
    int run_with_timeout(const std::string& config_path) {
        std::vector<std::string> argv_store = spec_.command;
        argv_store.push_back(config_path);
        std::vector<char*> argv;
        for (auto& s : argv_store) argv.push_back(s.data());
        argv.push_back(nullptr);

        const pid_t pid = fork();
        if (pid < 0) throw std::runtime_error("external adapter: fork failed");
        if (pid == 0) {
            if (chdir(spec_.workdir.c_str()) != 0) _exit(127);
            execvp(argv[0], argv.data());
            _exit(127);
        }

        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::duration<double>(spec_.timeout_s);
        while (true) {
            int status = 0;
            const pid_t r = waitpid(pid, &status, WNOHANG);
            if (r == pid) {
                if (WIFEXITED(status)) return WEXITSTATUS(status);
                return -1;
            }
            if (r < 0 && errno != EINTR) return -1;
            if (std::chrono::steady_clock::now() >= deadline) {
                kill(pid, SIGKILL);
                waitpid(pid, &status, 0);
                std::cerr << "[knobtune] external evaluation timed out after " << spec_.timeout_s
                          << " s\n";
                return -1;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
    }

    EvaluationOutcome parse_result(const std::string& path, double elapsed) {
        std::ifstream in(path);
        if (!in) {
            std::cerr << "[knobtune] external adapter: missing result file " << path << "\n";
            return EvaluationOutcome::invalid_outcome(spec_.metrics_dim, elapsed);
        }
        nlohmann::json doc;
        try {
            in >> doc;
            EvaluationOutcome out;
            out.valid = doc.at("valid").get<bool>();
            out.throughput = doc.at("throughput").get<double>();
            out.metrics = doc.value("metrics", std::vector<double>{});
            out.duration_s = elapsed;
            if (!out.valid) {
                out.throughput = 0.0;
                out.metrics.assign(spec_.metrics_dim, 0.0);
            }
            return out;
        } catch (const std::exception& e) {
            std::cerr << "[knobtune] external adapter: malformed result file: " << e.what() << "\n";
            return EvaluationOutcome::invalid_outcome(spec_.metrics_dim, elapsed);
        }
    }

    AdapterSpec spec_;
    ParameterSpace space_;
};

} // namespace knobtune
