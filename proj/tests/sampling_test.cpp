#include <catch2/catch.hpp>

#include <algorithm>
#include <set>

#include "knobtune/sampling.hpp"

#include "test_util.hpp"

using namespace knobtune;
using testutil::make_param;

namespace {

ParameterSpace one_param_space(double def, double lo, double hi) {
    return ParameterSpace({make_param("x", def, lo, hi)}, 10.0);
}

std::vector<double> column(const Design& d, std::size_t k) {
    std::vector<double> v;
    for (const auto& c : d.configs) v.push_back(c.values[k]);
    return v;
}

} // namespace

TEST_CASE("lhs places one sample per stratum") {
    const ParameterSpace space = one_param_space(0.5, 0.0, 1.0);
    const Design d = lhs(space, 4, 7);
    std::vector<double> xs = column(d, 0);
    std::sort(xs.begin(), xs.end());
    REQUIRE(xs.size() == 4);
    CHECK(xs[0] >= 0.0);
    CHECK(xs[0] < 0.25);
    CHECK(xs[1] >= 0.25);
    CHECK(xs[1] < 0.5);
    CHECK(xs[2] >= 0.5);
    CHECK(xs[2] < 0.75);
    CHECK(xs[3] >= 0.75);
    CHECK(xs[3] <= 1.0);
}

TEST_CASE("lhs stratification holds for any n and parameter") {
    const ParameterSpace space =
        ParameterSpace({make_param("a", 1.0, 0.1, 10.0), make_param("b", 50.0, 5.0, 500.0)}, 10.0);
    for (std::size_t n : {3u, 10u, 37u}) {
        const Design d = lhs(space, n, 123);
        for (std::size_t k = 0; k < 2; ++k) {
            const auto& p = space.param(k);
            const double w = (p.range.hi - p.range.lo) / static_cast<double>(n);
            std::vector<int> counts(n, 0);
            for (double v : column(d, k)) {
                auto s = static_cast<std::size_t>((v - p.range.lo) / w);
                s = std::min(s, n - 1);
                counts[s]++;
            }
            for (int c : counts) CHECK(c == 1);
        }
    }
}

TEST_CASE("lhs sampling of a default-1 prf-10 range is skewed high") {
    // [0.1, 10] split in 100 equal strata: 10 strata touch [0.1, 1], so at
    // most 10 (and at least 9) samples can land at or below the default
    const ParameterSpace space = one_param_space(1.0, 0.1, 10.0);
    const double width = 9.9 / 100.0;
    std::size_t strata_touching_low = 0;
    for (std::size_t j = 0; j < 100; ++j)
        if (0.1 + static_cast<double>(j) * width < 1.0) ++strata_touching_low;
    CHECK(strata_touching_low == 10);

    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const Design d = lhs(space, 100, seed);
        const auto xs = column(d, 0);
        const auto below = std::count_if(xs.begin(), xs.end(), [](double v) { return v <= 1.0; });
        CHECK(below >= 9);
        CHECK(below <= 10);
    }
}

TEST_CASE("identical inputs produce identical designs") {
    const ParameterSpace space =
        ParameterSpace({make_param("a", 1.0, 0.1, 10.0), make_param("b", 50.0, 5.0, 500.0)}, 10.0);
    const Design d1 = lhs(space, 20, 99);
    const Design d2 = lhs(space, 20, 99);
    REQUIRE(d1.configs.size() == d2.configs.size());
    for (std::size_t i = 0; i < d1.configs.size(); ++i) CHECK(d1.configs[i] == d2.configs[i]);

    const Design s1 = symmetric_lhs(space, 21, 5);
    const Design s2 = symmetric_lhs(space, 21, 5);
    for (std::size_t i = 0; i < s1.configs.size(); ++i) CHECK(s1.configs[i] == s2.configs[i]);

    const Design other = lhs(space, 20, 100);
    bool any_diff = false;
    for (std::size_t i = 0; i < d1.configs.size(); ++i)
        if (!(d1.configs[i] == other.configs[i])) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("symmetric lhs balances the halves") {
    const ParameterSpace space = one_param_space(1.0, 0.1, 10.0);

    SECTION("even n: exactly half strictly below the default") {
        const Design d = symmetric_lhs(space, 100, 11);
        const auto xs = column(d, 0);
        CHECK(std::count_if(xs.begin(), xs.end(), [](double v) { return v < 1.0; }) == 50);
        CHECK(std::count_if(xs.begin(), xs.end(), [](double v) { return v >= 1.0; }) == 50);
    }

    SECTION("odd n: the extra stratum goes to the lower half") {
        const Design d = symmetric_lhs(space, 5, 11);
        const auto xs = column(d, 0);
        CHECK(std::count_if(xs.begin(), xs.end(), [](double v) { return v < 1.0; }) == 3);
        CHECK(std::count_if(xs.begin(), xs.end(), [](double v) { return v >= 1.0; }) == 2);
    }

    SECTION("per-half stratification: one sample per sub-stratum") {
        const std::size_t n = 10;
        const Design d = symmetric_lhs(space, n, 3);
        const auto xs = column(d, 0);
        const double wl = 0.9 / 5.0, wu = 9.0 / 5.0;
        std::vector<int> counts(10, 0);
        for (double v : xs) {
            if (v < 1.0)
                counts[std::min<std::size_t>(static_cast<std::size_t>((v - 0.1) / wl), 4)]++;
            else
                counts[5 + std::min<std::size_t>(static_cast<std::size_t>((v - 1.0) / wu), 4)]++;
        }
        for (int c : counts) CHECK(c == 1);
    }
}

TEST_CASE("symmetric lhs with a boundary default uses the surviving half") {
    const ParameterSpace at_lo = ParameterSpace({make_param("x", 0.1, 0.1, 10.0)}, 10.0);
    const Design d = symmetric_lhs(at_lo, 8, 4);
    for (double v : column(d, 0)) CHECK(v >= 0.1);
    // all 8 strata cover the full range
    std::vector<double> xs = column(d, 0);
    std::sort(xs.begin(), xs.end());
    const double w = 9.9 / 8.0;
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(xs[j] >= 0.1 + j * w - 1e-12);
        CHECK(xs[j] <= 0.1 + (j + 1) * w + 1e-12);
    }

    const ParameterSpace at_hi = ParameterSpace({make_param("x", 10.0, 0.1, 10.0)}, 10.0);
    for (double v : column(symmetric_lhs(at_hi, 8, 4), 0)) CHECK(v < 10.0 + 1e-12);
}

TEST_CASE("integer parameters snap to in-stratum integers") {
    const ParameterSpace space =
        ParameterSpace({make_param("k", 100.0, 10.0, 1000.0, ParamKind::integer)}, 10.0);
    const Design d = symmetric_lhs(space, 30, 9);
    for (double v : column(d, 0)) {
        CHECK(v == std::floor(v));
        CHECK(v >= 10.0);
        CHECK(v <= 1000.0);
    }
}

TEST_CASE("random subset keeps exactly rss parameters off-default") {
    std::vector<ParameterSpec> specs;
    for (int i = 0; i < 40; ++i)
        specs.push_back(make_param("p" + std::to_string(i), 1.0, 0.1, 10.0));
    const ParameterSpace space(std::move(specs), 10.0);

    const Design base = symmetric_lhs(space, 25, 17);
    const Design sub = apply_random_subset(base, 12, space, 17);

    REQUIRE(sub.rss.has_value());
    CHECK(*sub.rss == 12);
    for (std::size_t i = 0; i < sub.configs.size(); ++i) {
        std::size_t off_default = 0;
        for (std::size_t k = 0; k < space.size(); ++k) {
            const double v = sub.configs[i].values[k];
            if (v != space.param(k).default_value) {
                ++off_default;
                // values are either untouched or reset, never altered
                CHECK(v == base.configs[i].values[k]);
            }
        }
        CHECK(off_default == 12);
    }
}

TEST_CASE("random subset of full size leaves the design unchanged") {
    std::vector<ParameterSpec> specs;
    for (int i = 0; i < 10; ++i)
        specs.push_back(make_param("p" + std::to_string(i), 1.0, 0.1, 10.0));
    const ParameterSpace space(std::move(specs), 10.0);
    const Design base = lhs(space, 5, 2);
    const Design same = apply_random_subset(base, 10, space, 2);
    for (std::size_t i = 0; i < base.configs.size(); ++i)
        CHECK(base.configs[i] == same.configs[i]);

    CHECK_THROWS_AS(apply_random_subset(base, 11, space, 2), std::invalid_argument);
    CHECK_THROWS_AS(apply_random_subset(base, 0, space, 2), std::invalid_argument);
}

TEST_CASE("sampling rejects degenerate requests") {
    const ParameterSpace space = one_param_space(1.0, 0.1, 10.0);
    CHECK_THROWS_AS(lhs(space, 0, 1), std::invalid_argument);

    const ParameterSpace no_tunable =
        ParameterSpace({make_param("fixed", 5.0, 5.0, 5.0, ParamKind::continuous, false)}, 10.0);
    CHECK_THROWS_AS(lhs(no_tunable, 4, 1), std::invalid_argument);
}

TEST_CASE("non-tunable parameters stay at their defaults") {
    const ParameterSpace space =
        ParameterSpace({make_param("a", 1.0, 0.1, 10.0),
                        make_param("fixed", 5.0, 5.0, 5.0, ParamKind::continuous, false)},
                       10.0);
    const Design d = symmetric_lhs(space, 12, 21);
    for (const auto& c : d.configs) CHECK(c.values[1] == 5.0);
}
