#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "knobtune/param_space.hpp"

namespace knobtune {

/// Parameter manifest: a JSON document with top-level `prf` and `parameters`,
/// each entry `{name, default, kind, lo?, hi?, tunable?}`. Entries without
/// explicit lo/hi get ranges derived from the default and the manifest prf.
/// Unknown fields are rejected so typos fail loudly.
inline ParameterSpace parse_manifest(const nlohmann::ordered_json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("manifest: top level must be an object");
    for (const auto& [key, _] : doc.items())
        if (key != "prf" && key != "parameters")
            throw std::invalid_argument("manifest: unknown top-level field '" + key + "'");
    if (!doc.contains("prf") || !doc["prf"].is_number())
        throw std::invalid_argument("manifest: missing numeric 'prf'");
    if (!doc.contains("parameters") || !doc["parameters"].is_array())
        throw std::invalid_argument("manifest: missing 'parameters' array");

    const double prf = doc["prf"].get<double>();
    if (!(prf > 1.0)) throw std::invalid_argument("manifest: prf must be > 1");

    const auto& entries = doc["parameters"];
    if (entries.empty()) throw std::invalid_argument("manifest: no parameters");

    std::vector<ParameterSpec> specs;
    specs.reserve(entries.size());
    for (const auto& e : entries) {
        if (!e.is_object()) throw std::invalid_argument("manifest: parameter entry must be an object");
        if (!e.contains("name") || !e["name"].is_string())
            throw std::invalid_argument("manifest: parameter entry missing 'name'");
        const std::string name = e["name"].get<std::string>();
        for (const auto& [key, _] : e.items())
            if (key != "name" && key != "default" && key != "kind" && key != "lo" &&
                key != "hi" && key != "tunable")
                throw std::invalid_argument("manifest: parameter '" + name +
                                            "': unknown field '" + key + "'");
        if (!e.contains("default") || !e["default"].is_number())
            throw std::invalid_argument("manifest: parameter '" + name + "': missing numeric 'default'");

        ParameterSpec spec;
        spec.name = name;
        spec.default_value = e["default"].get<double>();
        spec.kind = e.contains("kind") ? param_kind_from_string(e["kind"].get<std::string>())
                                       : ParamKind::continuous;
        spec.tunable = e.contains("tunable") ? e["tunable"].get<bool>() : true;

        if (spec.tunable && spec.default_value == 0.0 && !e.contains("lo") && !e.contains("hi"))
            spec.tunable = false; // multiplicative range is degenerate at zero

        if (spec.tunable) {
            spec.range = derive_range(spec.default_value, prf, spec.kind);
            if (e.contains("lo")) spec.range.lo = e["lo"].get<double>();
            if (e.contains("hi")) spec.range.hi = e["hi"].get<double>();
            if (!(spec.range.lo < spec.range.hi))
                throw std::invalid_argument("manifest: parameter '" + name +
                                            "': override requires lo < hi");
        } else {
            spec.range = {spec.default_value, spec.default_value};
        }

        try {
            spec.validate();
        } catch (const std::exception& ex) {
            throw std::invalid_argument("manifest: parameter '" + name + "': " + ex.what());
        }
        specs.push_back(std::move(spec));
    }

    try {
        return ParameterSpace(std::move(specs), prf);
    } catch (const std::exception& ex) {
        throw std::invalid_argument(std::string("manifest: ") + ex.what());
    }
}

inline ParameterSpace load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    nlohmann::ordered_json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("manifest parse error in " + path + ": " + e.what());
    }
    return parse_manifest(doc);
}

inline nlohmann::ordered_json manifest_json(const ParameterSpace& space) {
    nlohmann::ordered_json doc;
    doc["prf"] = space.prf();
    auto& arr = doc["parameters"] = nlohmann::ordered_json::array();
    for (const auto& p : space.params()) {
        nlohmann::ordered_json e;
        e["name"] = p.name;
        e["default"] = p.default_value;
        e["kind"] = to_string(p.kind);
        e["lo"] = p.range.lo;
        e["hi"] = p.range.hi;
        e["tunable"] = p.tunable;
        arr.push_back(std::move(e));
    }
    return doc;
}

inline void save_manifest(const ParameterSpace& space, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << manifest_json(space).dump(2) << '\n';
}

} // namespace knobtune
