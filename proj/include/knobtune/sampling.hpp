#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "knobtune/param_space.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

enum class SamplingStrategy { lhs, symmetric_lhs };

inline const char* to_string(SamplingStrategy s) {
    return s == SamplingStrategy::lhs ? "lhs" : "symmetric_lhs";
}

/// A space-filling design: one configuration per requested sample.
struct Design {
    std::vector<Configuration> configs;
    std::uint64_t seed = 0;
    SamplingStrategy strategy = SamplingStrategy::lhs;
    std::optional<std::size_t> rss;
};

namespace detail {

/// One value per stratum, uniform within each stratum, for a parameter whose
/// strata are laid out by `edges` (edges.size() = strata + 1). Integer
/// parameters snap to the nearest in-stratum integer where one exists;
/// narrow strata may collide onto the same integer.
inline std::vector<double> stratum_samples(const ParameterSpec& p,
                                           const std::vector<double>& edges, Rng& rng) {
    std::vector<double> out;
    out.reserve(edges.size() - 1);
    for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
        const double a = edges[j], b = edges[j + 1];
        const bool last = j + 2 == edges.size();
        double v = rng.uniform(a, b);
        if (p.kind == ParamKind::integer) {
            double r = std::nearbyint(v);
            const double lo_int = std::ceil(a);
            // interior strata are half-open [a, b)
            const double hi_int = (!last && std::floor(b) == b) ? b - 1 : std::floor(b);
            if (lo_int <= hi_int) r = std::min(std::max(r, lo_int), hi_int);
            v = std::min(std::max(r, p.range.lo), p.range.hi);
        }
        out.push_back(v);
    }
    return out;
}

inline std::vector<double> equal_strata_edges(double lo, double hi, std::size_t n) {
    std::vector<double> edges(n + 1);
    for (std::size_t j = 0; j <= n; ++j)
        edges[j] = lo + (hi - lo) * (static_cast<double>(j) / static_cast<double>(n));
    edges.front() = lo;
    edges.back() = hi;
    return edges;
}

inline Design build_design(const ParameterSpace& space, std::size_t n, std::uint64_t seed,
                           SamplingStrategy strategy) {
    if (n == 0) throw std::invalid_argument("sampling: n must be >= 1");
    if (space.tunable_indices().empty())
        throw std::invalid_argument("sampling: space has no tunable parameters");

    Design design;
    design.seed = seed;
    design.strategy = strategy;
    design.configs.assign(n, space.default_configuration());

    for (std::size_t k : space.tunable_indices()) {
        const ParameterSpec& p = space.param(k);
        Rng rng(mix_seed(seed, 0x5A17, k));

        std::vector<double> edges;
        if (strategy == SamplingStrategy::lhs) {
            edges = equal_strata_edges(p.range.lo, p.range.hi, n);
        } else {
            // Split [lo, default) and [default, hi] separately; the extra
            // stratum for odd n goes to the lower half. A default on a bound
            // degenerates one half and the other receives all n strata.
            std::size_t n_low = (n + 1) / 2;
            std::size_t n_high = n / 2;
            if (p.default_value <= p.range.lo) {
                n_low = 0;
                n_high = n;
            } else if (p.default_value >= p.range.hi) {
                n_low = n;
                n_high = 0;
            }
            if (n_low > 0) {
                edges = equal_strata_edges(p.range.lo, p.default_value, n_low);
                if (n_high > 0) edges.pop_back(); // default edge re-added by the upper half
            }
            if (n_high > 0) {
                auto upper = equal_strata_edges(p.default_value, p.range.hi, n_high);
                edges.insert(edges.end(), upper.begin(), upper.end());
            }
        }

        std::vector<double> samples = stratum_samples(p, edges, rng);
        std::vector<std::size_t> perm = rng.permutation(n);
        for (std::size_t i = 0; i < n; ++i)
            design.configs[i].values[k] = samples[perm[i]];
    }
    return design;
}

} // namespace detail

/// Standard Latin hypercube design: each tunable parameter's range is split
/// into n equal strata, one sample per stratum, assigned to configurations by
/// an independent seeded permutation per parameter.
inline Design lhs(const ParameterSpace& space, std::size_t n, std::uint64_t seed) {
    return detail::build_design(space, n, seed, SamplingStrategy::lhs);
}

/// Latin hypercube variant that stratifies the below-default and
/// above-default halves of each range with equal stratum counts, so low
/// values are sampled as densely as high ones.
inline Design symmetric_lhs(const ParameterSpace& space, std::size_t n, std::uint64_t seed) {
    return detail::build_design(space, n, seed, SamplingStrategy::symmetric_lhs);
}

/// Per configuration, keeps a random subset of `rss` tunable parameters at
/// their sampled values and resets every other parameter to its default.
inline Design apply_random_subset(const Design& design, std::size_t rss,
                                  const ParameterSpace& space, std::uint64_t seed) {
    const auto& tunable = space.tunable_indices();
    if (rss == 0) throw std::invalid_argument("apply_random_subset: rss must be >= 1");
    if (rss > tunable.size())
        throw std::invalid_argument("apply_random_subset: rss " + std::to_string(rss) +
                                    " exceeds tunable parameter count " +
                                    std::to_string(tunable.size()));

    Design out = design;
    out.rss = rss;
    if (rss == tunable.size()) return out;

    for (std::size_t i = 0; i < out.configs.size(); ++i) {
        Rng rng(mix_seed(seed, 0x2055, i));
        std::vector<std::size_t> keep = rng.subset(tunable, rss);
        std::vector<bool> kept(space.size(), false);
        for (std::size_t k : keep) kept[k] = true;
        for (std::size_t k : tunable)
            if (!kept[k]) out.configs[i].values[k] = space.param(k).default_value;
    }
    return out;
}

} // namespace knobtune
