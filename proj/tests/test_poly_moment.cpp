#include <doctest.h>

#include "pfcert/moment.hpp"
#include "pfcert/poly.hpp"
#include "test_util.hpp"

using namespace pfcert;

namespace {
Polynomial X(int i) { return Polynomial::var(i); }
}  // namespace

TEST_CASE("monomial order is graded lexicographic") {
    const auto m = monomials_up_to(2, 2);
    REQUIRE(m.size() == 6);
    CHECK(m[0].degree() == 0);
    CHECK(m[1] == Monomial::var(0));
    CHECK(m[3] == Monomial::from_indices({0, 0}));
    CHECK(m[4] == Monomial::from_indices({0, 1}));
    CHECK(m[5] == Monomial::from_indices({1, 1}));
    CHECK(monomials_up_to(3, 4).size() == 35);  // C(7, 3)
}

TEST_CASE("polynomial arithmetic") {
    const Polynomial p = (X(0) + 1.0) * (X(0) - 1.0);
    CHECK(p == X(0) * X(0) - 1.0);
    CHECK(p.degree() == 2);
    CHECK(p.derivative(0) == 2.0 * X(0));
    CHECK(p.derivative(1).is_zero());
    CHECK(p.substitute(0, X(1) + 2.0) == X(1) * X(1) + 4.0 * X(1) + 3.0);
    CHECK(eval_poly(p, Eigen::Vector2d(3.0, 0.0)) == 8.0);
    CHECK((X(0) * X(1) * X(1)).derivative(1) == 2.0 * X(0) * X(1));
    CHECK((3.0 * X(1) + X(0) * X(0)).linear_coefficient(1) == 3.0);
    CHECK_FALSE((X(1) * X(1)).linear_coefficient(1).has_value());
}

TEST_CASE("linear elimination") {
    PolySystem sys;
    sys.var_names = {"a", "b", "c"};
    sys.add_equality(X(0) - 2.0 * X(1) - 1.0, "a = 2b + 1");
    sys.add_equality(X(0) * X(2) - 1.0, "ac = 1");
    sys.add_inequality(X(1), "b >= 0");
    const auto red = eliminate_linear(sys);
    CHECK(red.system.nvars() == 2);
    const Eigen::Vector3d x(3.0, 1.0, 1.0 / 3.0);
    CHECK(red.expand(red.restrict(x)).isApprox(x));
    CHECK(red.system.equality_residual(red.restrict(x)) < 1e-14);
}

TEST_CASE("relaxation sizes and lifted points") {
    PolySystem sys;
    sys.var_names = {"x", "y"};
    sys.add_equality(X(0) * X(0) + X(1) * X(1) - 1.0, "circle");
    sys.add_inequality(X(0), "x >= 0");
    const auto prob = relax(sys);
    CHECK(prob.m() == 15);         // monomials of degree <= 4 in two variables
    CHECK(prob.blocks[0].dim == 6);  // moment matrix over degree <= 2
    const auto y = lift_point(prob, Eigen::Vector2d(0.6, 0.8));
    CHECK(prob.equality_residual(y) < 1e-14);
    CHECK(prob.min_eigenvalue(y) > -1e-12);
    const auto cand = extract_candidate(prob, y);
    CHECK(cand.x.isApprox(Eigen::Vector2d(0.6, 0.8), 1e-12));
    CHECK(cand.rank_ratio < 1e-12);
}

TEST_CASE("relaxation JSON round trip") {
    PolySystem sys;
    sys.var_names = {"x"};
    sys.add_equality(X(0) * X(0) - 2.0, "x^2 = 2");
    const auto prob = relax(sys);
    const auto back = moment_problem_from_json(to_json(prob));
    CHECK(back.m() == prob.m());
    CHECK((Eigen::MatrixXd(back.eq_matrix) - Eigen::MatrixXd(prob.eq_matrix)).norm() == 0.0);
    CHECK(back.eq_rhs == prob.eq_rhs);
}

TEST_CASE("Jacobian system lift soundness on case3") {
    const auto net = load_case(testutil::data("case3.m"));
    const auto lims = testutil::wide_limits(net);
    const auto sys = build_jacobian_system(net, lims);
    const auto red = eliminate_linear(sys);
    RelaxOptions ro;
    ro.exploit_sign_symmetry = true;
    const auto prob = relax(red.system, ro);
    const VarLayout lay{net.k(), net.num_buses()};
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        const auto [v, z] = testutil::singular_point(net, rng);
        const Eigen::VectorXd x = lay.pack(z, v.rect());
        REQUIRE(sys.equality_residual(x) < 1e-8);
        REQUIRE(sys.inequality_violation(x) == 0.0);
        const auto y = lift_point(prob, red.restrict(x));
        CHECK(prob.equality_residual(y) <= 1e-8);
        CHECK(prob.min_eigenvalue(y) >= -1e-8);
    }
}

TEST_CASE("feasibility system lift soundness on case3") {
    const auto net = load_case(testutil::data("case3.m"));
    auto lims = testutil::wide_limits(net);
    lims.flow_max[0] = 0.3;
    const auto region = RegionSpec::box(Eigen::VectorXd::Zero(net.k()), Eigen::VectorXd::Constant(net.k(), 50.0), 1.0);
    const auto cons = lims.constraints(net);
    int active = -1;
    for (std::size_t c = 0; c < cons.size(); ++c)
        if (cons[c].kind == ConstraintKind::Flow) active = static_cast<int>(c);
    REQUIRE(active >= 0);
    const auto sys = build_feasibility_system(net, lims, region, active);
    const auto red = eliminate_linear(sys);
    const auto prob = relax(red.system);
    const VarLayout lay{net.k(), net.num_buses()};
    std::mt19937_64 rng(6);
    int done = 0;
    while (done < 10) {
        const auto v = testutil::active_flow_point(net, 0, 0.3, rng);
        if (!v) continue;
        const Eigen::VectorXd x = lay.pack(evaluate_F(net, *v), v->rect());
        REQUIRE(sys.equality_residual(x) < 1e-10);
        const auto y = lift_point(prob, red.restrict(x));
        CHECK(prob.equality_residual(y) <= 1e-8);
        CHECK(prob.min_eigenvalue(y) >= -1e-8);
        ++done;
    }
}
