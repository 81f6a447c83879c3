#include <doctest.h>

#include <sstream>

#include "pfcert/oracle.hpp"
#include "test_util.hpp"

using namespace pfcert;

namespace {

OperationalLimits unlimited(const Network& net) {
    auto l = OperationalLimits::from_network(net);
    for (auto& v : l.v_min) v = 0.0;
    for (auto& v : l.v_max) v = kInf;
    for (auto& q : l.q_min) q = -kInf;
    for (auto& q : l.q_max) q = kInf;
    l.p0_min = -kInf;
    l.p0_max = kInf;
    return l;
}

}  // namespace

TEST_CASE("two-bus map boundary is the nose point") {
    // Lossless line x with unity power factor load: p_max = V0^2 / (2x)
    const double x = 0.5;
    const auto net = parse_case(testutil::two_bus(x));
    MapSpec spec{{0}, Injection::Zero(2), {-1.5}, {0.0}, {151}};
    const auto map = map_feasible_set(net, unlimited(net), spec);
    REQUIRE(map.cells.size() == 151);
    const double nose = -1.0 / (2 * x);
    for (const auto& c : map.cells) {
        if (c.coords[0] > nose + 0.011) CHECK(c.verdict == CellVerdict::StrictlyFeasible);
        if (c.coords[0] < nose - 0.011) CHECK(c.verdict == CellVerdict::NoSolution);
    }
}

TEST_CASE("empty range gives an empty map") {
    const auto net = load_case(testutil::data("case3.m"));
    MapSpec spec{{0, 1}, Injection::Zero(2), {-1, -1}, {1, 1}, {0, 10}};
    CHECK(map_feasible_set(net, OperationalLimits::from_network(net), spec).cells.empty());
}

TEST_CASE("bad map specifications are rejected") {
    const auto net = load_case(testutil::data("case3.m"));
    const auto lims = OperationalLimits::from_network(net);
    CHECK_THROWS_AS(map_feasible_set(net, lims, {{0, 1, 0}, Injection::Zero(2), {0, 0, 0}, {1, 1, 1}, {2, 2, 2}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(map_feasible_set(net, lims, {{5}, Injection::Zero(2), {0}, {1}, {2}}), std::invalid_argument);
}

TEST_CASE("verdicts are reproducible and independent of the thread count") {
    const auto net = load_case(testutil::data("case3.m"));
    const auto lims = OperationalLimits::from_network(net, 0.4);
    MapSpec spec{{0, 1}, Injection::Zero(2), {-1.2, -1.2}, {1.2, 1.2}, {30, 30}};
    MapOptions a, b;
    b.jobs = 4;
    const auto m1 = map_feasible_set(net, lims, spec, a);
    const auto m2 = map_feasible_set(net, lims, spec, b);
    for (std::size_t i = 0; i < m1.cells.size(); ++i) CHECK(m1.cells[i].verdict == m2.cells[i].verdict);
    std::ostringstream csv;
    write_csv(csv, m1);
    CHECK(csv.str().rfind("x,y,verdict,min_slack\n", 0) == 0);
}

TEST_CASE("containment of small regions") {
    const auto net = load_case(testutil::data("case3.m"));
    const auto lims = OperationalLimits::from_network(net, 0.4);
    MapSpec spec{{0, 1}, Injection::Zero(2), {-1.2, -1.2}, {1.2, 1.2}, {25, 25}};
    const auto map = map_feasible_set(net, lims, spec);
    const auto point = check_containment(map, RegionSpec::box(Injection::Zero(2), Eigen::Vector2d::Ones(), 0.0));
    CHECK(point.contained);
    CHECK(point.cells_inside == 1);  // the grid contains the origin only if the resolution is odd
    const auto huge = check_containment(map, RegionSpec::box(Injection::Zero(2), Eigen::Vector2d::Ones(), 2.0));
    CHECK_FALSE(huge.contained);
    CHECK(huge.cells_inside == 625);
}
