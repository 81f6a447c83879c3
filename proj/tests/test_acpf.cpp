#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "pfcert/acpf.hpp"
#include "test_util.hpp"

using namespace pfcert;

namespace {

Eigen::MatrixXd jacobian_fd(const Network& net, const VoltageState& v, double h = 1e-6) {
    const Eigen::VectorXd x = unknowns(net, v);
    Eigen::MatrixXd j(net.k(), x.size());
    for (Eigen::Index c = 0; c < x.size(); ++c) {
        Eigen::VectorXd xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        j.col(c) = (evaluate_F(net, with_unknowns(net, v, xp)) - evaluate_F(net, with_unknowns(net, v, xm))) / (2 * h);
    }
    return j;
}

}  // namespace

TEST_CASE("analytic Jacobian, finite differences and quadratic form agree") {
    std::mt19937_64 rng(11);
    for (const char* name : {"case3.m", "case6ww.m", "case14.m"}) {
        const auto net = load_case(testutil::data(name));
        const auto qf = jacobian_quadform(net);
        for (int t = 0; t < 10; ++t) {
            const auto v = testutil::random_state(net, rng);
            const Eigen::MatrixXd ja = jacobian_analytic(net, v);
            CHECK((ja - jacobian_fd(net, v)).norm() / ja.norm() <= 1e-6);
            CHECK((ja - qf.evaluate(v.rect())).norm() / ja.norm() <= 1e-9);
        }
    }
}

TEST_CASE("two-bus injection formula") {
    const auto net = parse_case(testutil::two_bus(0.5));
    VoltageState v = VoltageState::flat(net);
    v.theta(1) = -0.3;
    v.rho(1) = std::log(0.95);
    // Lossless line: p2 = (V1 V2 / x) sin(th2 - th1), q2 = (V2^2 - V1 V2 cos(th2 - th1)) / x
    const auto s = evaluate_F(net, v);
    CHECK(s(0) == doctest::Approx(0.95 / 0.5 * std::sin(-0.3)).epsilon(1e-12));
    CHECK(s(1) == doctest::Approx((0.95 * 0.95 - 0.95 * std::cos(-0.3)) / 0.5).epsilon(1e-12));
}

TEST_CASE("Newton reproduces the reference 14-bus solution") {
    const auto net = load_case(testutil::data("case14.m"));
    std::ifstream in(testutil::data("case14_solution.json"));
    const auto ref = nlohmann::json::parse(in);
    const auto r = newton_solve(net, nominal_injection(net), VoltageState::flat(net));
    REQUIRE(r.converged());
    CHECK(r.residual <= 1e-8);
    const auto buses = ref["bus"].get<std::vector<int>>();
    for (std::size_t k = 0; k < buses.size(); ++k) {
        const int i = net.internal_index(buses[k]);
        CHECK(std::exp(r.state.rho(i)) == doctest::Approx(ref["vm"][k].get<double>()).epsilon(1e-7));
        CHECK(r.state.theta(i) == doctest::Approx(ref["va_deg"][k].get<double>() * std::numbers::pi / 180).epsilon(1e-7));
    }
}

TEST_CASE("Newton reports failure beyond the nose point") {
    const auto net = parse_case(testutil::two_bus(0.5));
    Injection s(2);
    s << -1.2, 0.0;  // loadability limit is 1/(2x) = 1
    CHECK_FALSE(newton_solve(net, s, VoltageState::flat(net)).converged());
    s << -0.9, 0.0;
    CHECK(newton_solve(net, s, VoltageState::flat(net)).converged());
}

TEST_CASE("operational constraint evaluation") {
    const auto net = load_case(testutil::data("case3.m"));
    auto lims = OperationalLimits::from_network(net, 0.4);
    const auto cons = lims.constraints(net);
    const auto v = VoltageState::flat(net);
    const auto sl = eval_operational(net, lims, v);
    REQUIRE(sl.size() == static_cast<Eigen::Index>(cons.size()));
    for (std::size_t c = 0; c < cons.size(); ++c)
        if (cons[c].kind == ConstraintKind::Flow) CHECK(sl(c) == doctest::Approx(0.16));  // 0.4^2 - 0
}
