#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "knobtune/digest.hpp"
#include "knobtune/param_space.hpp"
#include "knobtune/sampling.hpp"

namespace knobtune {

#ifndef KNOBTUNE_VERSION
#define KNOBTUNE_VERSION "0.0.0"
#endif

inline const char* version() { return KNOBTUNE_VERSION; }

/// Provenance header embedded as the first line of JSON-lines artifacts and
/// as a "_meta" field of JSON documents: seed, tool version, and content
/// hashes of the inputs the artifact was derived from.
inline nlohmann::ordered_json make_meta(std::uint64_t seed,
                                        const std::vector<std::string>& input_paths = {}) {
    nlohmann::ordered_json meta;
    meta["tool"] = "knobtune";
    meta["version"] = version();
    meta["seed"] = seed;
    auto& inputs = meta["inputs"] = nlohmann::ordered_json::object();
    // keyed by file name, not full path, so reruns in other directories stay
    // byte-identical
    for (const auto& path : input_paths)
        inputs[std::filesystem::path(path).filename().string()] = sha256_file_hex(path);
    return meta;
}

inline bool is_meta_line(const nlohmann::ordered_json& j) {
    return j.is_object() && j.contains("_meta");
}

/// Reads a JSON-lines file, skipping meta lines.
inline std::vector<nlohmann::ordered_json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<nlohmann::ordered_json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!is_meta_line(j)) rows.push_back(std::move(j));
    }
    return rows;
}

class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot write: " + path);
    }

    void write_meta(const nlohmann::ordered_json& meta) {
        nlohmann::ordered_json line;
        line["_meta"] = meta;
        write(line);
    }

    void write(const nlohmann::ordered_json& row) { out_ << row.dump() << '\n'; }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

inline nlohmann::ordered_json configuration_json(const ParameterSpace& space,
                                                 const Configuration& config) {
    nlohmann::ordered_json row;
    for (std::size_t i = 0; i < space.size(); ++i) row[space.param(i).name] = config.values[i];
    return row;
}

inline Configuration configuration_from_json(const ParameterSpace& space,
                                             const nlohmann::ordered_json& row) {
    Configuration c = space.default_configuration();
    for (const auto& [name, value] : row.items()) {
        if (!space.has(name)) throw std::runtime_error("configuration names unknown parameter: " + name);
        c.values[space.index_of(name)] = value.get<double>();
    }
    return c;
}

/// One configuration object per line, keyed by parameter name.
inline void save_design(const Design& design, const ParameterSpace& space,
                        const std::string& path,
                        const std::vector<std::string>& input_paths = {}) {
    JsonlWriter w(path);
    auto meta = make_meta(design.seed, input_paths);
    meta["strategy"] = to_string(design.strategy);
    if (design.rss) meta["rss"] = *design.rss;
    w.write_meta(meta);
    for (const auto& c : design.configs) w.write(configuration_json(space, c));
}

inline std::vector<Configuration> load_design_configs(const ParameterSpace& space,
                                                      const std::string& path) {
    std::vector<Configuration> configs;
    for (const auto& row : read_jsonl(path)) configs.push_back(configuration_from_json(space, row));
    return configs;
}

} // namespace knobtune
