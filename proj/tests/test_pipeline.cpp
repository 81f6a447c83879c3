#include <doctest.h>

#include "pfcert/pipeline.hpp"
#include "test_util.hpp"

using namespace pfcert;
using nlohmann::json;

TEST_CASE("config JSON round trip") {
    const json j = {{"case", "x.m"},
                    {"limits", {{"flow_limit", 0.5}, {"generator_limits", false}, {"voltage_band", {0.9, 1.1}}}},
                    {"gamma", {{"floor", 0.2}, {"value", 0.4}}},
                    {"region", {{"kind", "ellipsoid"}, {"center", {0.1, 0.2}}, {"widths", "fit"}, {"delta", 0.3}}},
                    {"seed", 7}};
    const auto c = config_from_json(j);
    CHECK(c.limits.flow_limit == 0.5);
    CHECK_FALSE(c.limits.generator_limits);
    CHECK(c.limits.voltage_band.mode == VoltageBand::Mode::Fixed);
    CHECK(c.gamma == 0.4);
    CHECK(c.region.kind == RegionSpec::Kind::Ellipsoid);
    CHECK(c.region.center == "explicit");
    CHECK(c.region.delta == 0.3);
    CHECK(c.seed == 7);
    CHECK(to_json(config_from_json(to_json(c))) == to_json(c));
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(config_from_json({{"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"region", {{"center", "middle"}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"limits", {{"voltage_band", "wide"}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"jobs", 0}}), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent.json"), ConfigError);
    CHECK_FALSE(config_from_json({{"region", nullptr}}).certify_region);
}

TEST_CASE("limit overrides") {
    const auto net = load_case(testutil::data("case6ww.m"));
    LimitOverrides ov;
    ov.generator_limits = false;
    ov.voltage_band.mode = VoltageBand::Mode::None;
    ov.flow_limit = 0.7;
    const auto l = apply_limits(net, ov, 0.4);
    CHECK(l.gamma == 0.4);
    for (double f : l.flow_max) CHECK(f == 0.7);
    for (double q : l.q_max) CHECK(q == kInf);
    for (int i : net.pq) CHECK(l.v_max[i] == kInf);
    for (const auto& c : l.constraints(net)) CHECK(c.kind == ConstraintKind::Flow);
}

TEST_CASE("region templates") {
    const auto net = load_case(testutil::data("case3.m"));
    RunConfig cfg;
    const auto lims = apply_limits(net, cfg.limits, 0.4);
    cfg.region.center = "zero";
    auto r = build_region(net, lims, cfg);
    CHECK(r.kind == RegionSpec::Kind::Box);
    CHECK(r.half_widths == Eigen::Vector2d::Ones());
    cfg.region.kind = RegionSpec::Kind::Ellipsoid;
    cfg.region.widths = "explicit";
    cfg.region.width_values = Eigen::Vector2d(0.5, 2.0);
    r = build_region(net, lims, cfg);
    CHECK(r.contains(Eigen::Vector2d(0.5, 0.0), 1e-12));
    CHECK_FALSE(r.contains(Eigen::Vector2d(0.6, 0.0)));
    cfg.region.width_values = Eigen::Vector3d::Ones();
    CHECK_THROWS_AS(build_region(net, lims, cfg), ConfigError);
}

TEST_CASE("case3 pipeline end to end") {
    RunConfig cfg;
    cfg.case_path = testutil::data("case3.m");
    cfg.search_gamma = false;
    cfg.gamma = 0.4;
    cfg.region.center = "zero";
    cfg.region.delta = 0.3;
    cfg.mc_samples = 50;
    const auto rep = run_certify(cfg);
    REQUIRE(rep.result);
    CHECK(rep.outcome() == Outcome::Certified);
    const auto j = to_json(rep);
    CHECK(j["schema_version"] == kReportSchema);
    CHECK(j["result"]["outcome"] == "certified");
}
