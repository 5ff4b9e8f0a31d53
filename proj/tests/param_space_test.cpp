#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "knobtune/manifest.hpp"
#include "knobtune/param_space.hpp"
#include "knobtune/rng.hpp"

#include "test_util.hpp"

using namespace knobtune;
using nlohmann::ordered_json;
using testutil::make_param;
using testutil::TempDir;

TEST_CASE("derive_range follows the multiplicative rule") {
    const Interval r = derive_range(1.0, 10.0, ParamKind::continuous);
    CHECK(r.lo == Approx(0.1));
    CHECK(r.hi == Approx(10.0));

    const Interval ri = derive_range(100.0, 2.0, ParamKind::integer);
    CHECK(ri.lo == 50.0);
    CHECK(ri.hi == 200.0);

    const Interval rz = derive_range(0.0, 10.0, ParamKind::continuous);
    CHECK(rz.lo == 0.0);
    CHECK(rz.hi == 0.0);
}

TEST_CASE("derive_range handles integer rounding and negative defaults") {
    // outward rounding keeps the default representable, lo clamped to 1
    const Interval ri = derive_range(3.0, 2.0, ParamKind::integer);
    CHECK(ri.lo == 1.0);
    CHECK(ri.hi == 6.0);

    const Interval rsmall = derive_range(7.0, 10.0, ParamKind::integer);
    CHECK(rsmall.lo == 1.0); // floor(0.7) = 0, clamped up
    CHECK(rsmall.hi == 70.0);

    const Interval rneg = derive_range(-2.0, 10.0, ParamKind::continuous);
    CHECK(rneg.lo == Approx(-20.0));
    CHECK(rneg.hi == Approx(-0.2));
    CHECK(rneg.lo < rneg.hi);

    CHECK_THROWS_AS(derive_range(1.0, 1.0, ParamKind::continuous), std::invalid_argument);
    CHECK_THROWS_AS(derive_range(1.0, 0.5, ParamKind::continuous), std::invalid_argument);
    CHECK_THROWS_AS(derive_range(std::nan(""), 10.0, ParamKind::continuous),
                    std::invalid_argument);
}

TEST_CASE("unit transform anchors lo, default and hi") {
    const ParameterSpec p = make_param("x", 1.0, 0.1, 10.0);
    CHECK(to_unit(p, 0.1) == Approx(0.0));
    CHECK(to_unit(p, 1.0) == Approx(0.5));
    CHECK(to_unit(p, 10.0) == Approx(1.0));
    CHECK(from_unit(p, 0.0) == Approx(0.1));
    CHECK(from_unit(p, 0.5) == Approx(1.0));
    CHECK(from_unit(p, 1.0) == Approx(10.0));
    // halves are linear: a quarter of the way through each half
    CHECK(from_unit(p, 0.25) == Approx(0.1 + 0.5 * 0.9));
    CHECK(from_unit(p, 0.75) == Approx(1.0 + 0.5 * 9.0));
    // out-of-range values extrapolate
    CHECK(to_unit(p, 19.0) == Approx(1.5));
    CHECK(to_unit(p, 0.1 - 0.9) == Approx(-0.5));
}

TEST_CASE("unit transform round-trips random in-range values") {
    const ParameterSpec p = make_param("x", 4.0, 0.4, 40.0);
    Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        const double v = rng.uniform(0.4, 40.0);
        CHECK(from_unit(p, to_unit(p, v)) == Approx(v).margin(1e-12));
    }
}

TEST_CASE("configuration validation enforces ranges and integrality") {
    const ParameterSpace space({make_param("a", 1.0, 0.1, 10.0),
                                make_param("b", 100.0, 50.0, 200.0, ParamKind::integer)},
                               10.0);
    Configuration ok = space.default_configuration();
    CHECK_NOTHROW(space.validate_configuration(ok));

    Configuration bad_range = ok;
    bad_range.values[0] = 11.0;
    CHECK_THROWS_AS(space.validate_configuration(bad_range), std::invalid_argument);

    Configuration bad_integer = ok;
    bad_integer.values[1] = 100.5;
    CHECK_THROWS_AS(space.validate_configuration(bad_integer), std::invalid_argument);

    Configuration bad_length = ok;
    bad_length.values.pop_back();
    CHECK_THROWS_AS(space.validate_configuration(bad_length), std::invalid_argument);
}

TEST_CASE("parameter space rejects duplicates and bad specs") {
    CHECK_THROWS_AS(ParameterSpace({make_param("a", 1.0, 0.1, 10.0),
                                    make_param("a", 2.0, 0.2, 20.0)},
                                   10.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(ParameterSpace({make_param("a", 1.0, 2.0, 10.0)}, 10.0),
                    std::invalid_argument); // default below lo
}

TEST_CASE("manifest load derives ranges and honors overrides") {
    TempDir dir;
    ordered_json doc;
    doc["prf"] = 10.0;
    doc["parameters"] = ordered_json::array({
        ordered_json{{"name", "alpha"}, {"default", 1.0}, {"kind", "continuous"}},
        ordered_json{{"name", "beta"}, {"default", 8.0}, {"kind", "integer"}},
        ordered_json{{"name", "gamma"}, {"default", 2.0}, {"lo", 1.0}, {"hi", 3.0}},
        ordered_json{{"name", "delta"}, {"default", 5.0}, {"tunable", false}},
        ordered_json{{"name", "eps"}, {"default", 0.0}},
    });
    const auto path = dir.file("manifest.json");
    std::ofstream(path) << doc.dump(2);

    const ParameterSpace space = load_manifest(path);
    REQUIRE(space.size() == 5);
    CHECK(space.param(0).range.lo == Approx(0.1));
    CHECK(space.param(0).range.hi == Approx(10.0));
    CHECK(space.param(1).range.lo == 1.0);
    CHECK(space.param(1).range.hi == 80.0);
    CHECK(space.param(2).range.lo == 1.0);
    CHECK(space.param(2).range.hi == 3.0);
    CHECK_FALSE(space.param(3).tunable);
    CHECK_FALSE(space.param(4).tunable); // zero default is non-tunable by default
    CHECK(space.tunable_indices().size() == 3);
}

TEST_CASE("manifest rejects malformed inputs by name") {
    TempDir dir;
    const auto write = [&](const ordered_json& doc) {
        const auto path = dir.file("m.json");
        std::ofstream(path) << doc.dump();
        return path;
    };

    SECTION("empty parameter list") {
        const auto path = write({{"prf", 10.0}, {"parameters", ordered_json::array()}});
        CHECK_THROWS_WITH(load_manifest(path), Catch::Contains("no parameters"));
    }
    SECTION("duplicate names") {
        const auto path = write(
            {{"prf", 10.0},
             {"parameters", ordered_json::array({ordered_json{{"name", "a"}, {"default", 1.0}},
                                                 ordered_json{{"name", "a"}, {"default", 2.0}}})}});
        CHECK_THROWS_WITH(load_manifest(path), Catch::Contains("duplicate"));
    }
    SECTION("missing default") {
        const auto path =
            write({{"prf", 10.0},
                   {"parameters", ordered_json::array({ordered_json{{"name", "a"}}})}});
        CHECK_THROWS_WITH(load_manifest(path),
                          Catch::Contains("a") && Catch::Contains("default"));
    }
    SECTION("override with lo >= hi") {
        const auto path = write(
            {{"prf", 10.0},
             {"parameters", ordered_json::array({ordered_json{
                  {"name", "bad"}, {"default", 2.0}, {"lo", 3.0}, {"hi", 3.0}}})}});
        CHECK_THROWS_WITH(load_manifest(path), Catch::Contains("bad"));
    }
    SECTION("unknown fields") {
        const auto path = write(
            {{"prf", 10.0},
             {"parameters", ordered_json::array({ordered_json{
                  {"name", "a"}, {"default", 1.0}, {"wat", 1}}})}});
        CHECK_THROWS_WITH(load_manifest(path), Catch::Contains("unknown field"));
    }
    SECTION("missing prf") {
        const auto path = write(
            {{"parameters", ordered_json::array({ordered_json{{"name", "a"}, {"default", 1.0}}})}});
        CHECK_THROWS_WITH(load_manifest(path), Catch::Contains("prf"));
    }
}

TEST_CASE("manifest save/load round-trips exactly") {
    TempDir dir;
    Rng rng(42);
    std::vector<ParameterSpec> specs;
    for (int i = 0; i < 40; ++i) {
        const double def = std::exp(rng.uniform(-3.0, 8.0));
        const ParamKind kind = rng.uniform01() < 0.3 && def > 2.0 ? ParamKind::integer
                                                                  : ParamKind::continuous;
        const double d = kind == ParamKind::integer ? std::round(def) : def;
        ParameterSpec p;
        p.name = "p" + std::to_string(i);
        p.default_value = d;
        p.kind = kind;
        p.tunable = rng.uniform01() < 0.9;
        p.range = p.tunable ? derive_range(d, 10.0, kind) : Interval{d, d};
        specs.push_back(std::move(p));
    }
    const ParameterSpace space(std::move(specs), 10.0);

    const auto path = dir.file("roundtrip.json");
    save_manifest(space, path);
    const ParameterSpace reloaded = load_manifest(path);
    CHECK(space == reloaded);

    // second generation must be byte-identical
    const auto path2 = dir.file("roundtrip2.json");
    save_manifest(reloaded, path2);
    std::ifstream f1(path), f2(path2);
    const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

TEST_CASE("derived ranges match the rule for every tunable parameter") {
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const double d = std::exp(rng.uniform(-4.0, 10.0));
        const double prf = rng.uniform(1.5, 100.0);
        const Interval r = derive_range(d, prf, ParamKind::continuous);
        CHECK(r.lo == Approx(d / prf));
        CHECK(r.hi == Approx(d * prf));
    }
}
