#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace knobtune {

enum class ParamKind { continuous, integer };

inline const char* to_string(ParamKind k) {
    return k == ParamKind::continuous ? "continuous" : "integer";
}

inline ParamKind param_kind_from_string(const std::string& s) {
    if (s == "continuous") return ParamKind::continuous;
    if (s == "integer") return ParamKind::integer;
    throw std::invalid_argument("unknown parameter kind: " + s);
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Derives a tuning interval for a parameter from its default value and the
/// range factor: [default/factor, default*factor] for positive defaults.
/// Integer intervals are rounded outward so the default stays representable;
/// a zero default yields the degenerate [0, 0] and the caller marks the
/// parameter non-tunable. Negative defaults swap the bounds to keep lo < hi.
inline Interval derive_range(double default_value, double range_factor, ParamKind kind) {
    if (!std::isfinite(default_value))
        throw std::invalid_argument("derive_range: default value must be finite");
    if (!(range_factor > 1.0))
        throw std::invalid_argument("derive_range: range factor must be > 1");

    if (default_value == 0.0) return {0.0, 0.0};

    double lo = default_value / range_factor;
    double hi = default_value * range_factor;
    if (default_value < 0.0) std::swap(lo, hi);

    if (kind == ParamKind::integer) {
        lo = std::floor(lo);
        hi = std::ceil(hi);
        if (default_value >= 1.0) lo = std::max(lo, 1.0);
    }
    return {lo, hi};
}

struct ParameterSpec {
    std::string name;
    double default_value = 0.0;
    ParamKind kind = ParamKind::continuous;
    Interval range;
    bool tunable = true;

    void validate() const {
        if (name.empty()) throw std::invalid_argument("parameter with empty name");
        if (!std::isfinite(default_value))
            throw std::invalid_argument("parameter '" + name + "': non-finite default");
        if (tunable) {
            if (!(range.lo < range.hi))
                throw std::invalid_argument("parameter '" + name + "': tunable range requires lo < hi");
            if (default_value < range.lo || default_value > range.hi)
                throw std::invalid_argument("parameter '" + name + "': default outside [lo, hi]");
        } else if (range.lo != default_value || range.hi != default_value) {
            throw std::invalid_argument("parameter '" + name + "': non-tunable requires lo = hi = default");
        }
        if (kind == ParamKind::integer) {
            auto integral = [](double v) { return v == std::floor(v); };
            if (!integral(range.lo) || !integral(range.hi) || !integral(default_value))
                throw std::invalid_argument("parameter '" + name + "': integer kind requires integral lo/hi/default");
        }
    }

    bool contains(double v) const {
        if (v < range.lo || v > range.hi) return false;
        if (kind == ParamKind::integer && v != std::floor(v)) return false;
        return true;
    }

    /// Rounds a raw value to the parameter's representable grid and clamps it
    /// into range.
    double clamp(double v) const {
        if (kind == ParamKind::integer) v = std::nearbyint(v);
        return std::min(std::max(v, range.lo), range.hi);
    }
};

/// Maps a native value onto [0, 1] with the default anchored at 0.5 and each
/// half mapped linearly: 0 -> lo, 0.5 -> default, 1 -> hi. Values outside
/// [lo, hi] extrapolate with the adjacent half's slope. The inverse is
/// from_unit below. Degenerate halves (default on a bound) collapse onto the
/// surviving half.
inline double to_unit(const ParameterSpec& p, double v) {
    const double lo = p.range.lo, hi = p.range.hi, d = p.default_value;
    if (lo == hi) return 0.5;
    const double below = d - lo, above = hi - d;
    if (v < d) {
        const double w = below > 0 ? below : above;
        return 0.5 - 0.5 * (d - v) / w;
    }
    const double w = above > 0 ? above : below;
    return 0.5 + 0.5 * (v - d) / w;
}

inline double from_unit(const ParameterSpec& p, double u) {
    const double lo = p.range.lo, hi = p.range.hi, d = p.default_value;
    if (lo == hi) return d;
    u = std::min(std::max(u, 0.0), 1.0);
    double v;
    if (u < 0.5) {
        v = d == lo ? d : lo + (u / 0.5) * (d - lo);
    } else {
        v = d == hi ? d : d + ((u - 0.5) / 0.5) * (hi - d);
    }
    return p.clamp(v);
}

struct Configuration {
    std::vector<double> values;

    bool operator==(const Configuration&) const = default;
};

/// Ordered collection of parameter definitions. Configurations are positional
/// vectors against this ordering; the object is immutable after construction
/// and safe to share across concurrent tuning runs.
class ParameterSpace {
public:
    ParameterSpace() = default;

    ParameterSpace(std::vector<ParameterSpec> params, double prf)
        : params_(std::move(params)), prf_(prf) {
        if (!(prf_ > 1.0)) throw std::invalid_argument("parameter range factor must be > 1");
        std::unordered_map<std::string, std::size_t> seen;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            params_[i].validate();
            auto [it, inserted] = seen.emplace(params_[i].name, i);
            if (!inserted)
                throw std::invalid_argument("duplicate parameter name: " + params_[i].name);
        }
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_[i].tunable) tunable_idx_.push_back(i);
        index_ = std::move(seen);
    }

    std::size_t size() const { return params_.size(); }
    const ParameterSpec& param(std::size_t i) const { return params_.at(i); }
    const std::vector<ParameterSpec>& params() const { return params_; }
    double prf() const { return prf_; }
    const std::vector<std::size_t>& tunable_indices() const { return tunable_idx_; }

    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Configuration default_configuration() const {
        Configuration c;
        c.values.reserve(params_.size());
        for (const auto& p : params_) c.values.push_back(p.default_value);
        return c;
    }

    void validate_configuration(const Configuration& c) const {
        if (c.values.size() != params_.size())
            throw std::invalid_argument("configuration has " + std::to_string(c.values.size()) +
                                        " values, expected " + std::to_string(params_.size()));
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (!params_[i].contains(c.values[i]))
                throw std::invalid_argument("value " + std::to_string(c.values[i]) +
                                            " out of range for parameter '" + params_[i].name + "'");
    }

    bool operator==(const ParameterSpace& o) const {
        if (prf_ != o.prf_ || params_.size() != o.params_.size()) return false;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const auto& a = params_[i];
            const auto& b = o.params_[i];
            if (a.name != b.name || a.default_value != b.default_value || a.kind != b.kind ||
                a.range.lo != b.range.lo || a.range.hi != b.range.hi || a.tunable != b.tunable)
                return false;
        }
        return true;
    }

private:
    std::vector<ParameterSpec> params_;
    double prf_ = 10.0;
    std::vector<std::size_t> tunable_idx_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Re-derives every tunable parameter's range from its default at a new
/// range factor. Explicit overrides in the source space are replaced.
inline ParameterSpace with_prf(const ParameterSpace& space, double prf) {
    std::vector<ParameterSpec> specs;
    specs.reserve(space.size());
    for (const auto& p : space.params()) {
        ParameterSpec s = p;
        if (s.tunable) s.range = derive_range(s.default_value, prf, s.kind);
        specs.push_back(std::move(s));
    }
    return ParameterSpace(std::move(specs), prf);
}

} // namespace knobtune
