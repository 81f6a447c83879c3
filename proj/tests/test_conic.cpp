#include <doctest.h>

#include "pfcert/conic.hpp"

using namespace pfcert;

namespace {

MomentProblem one_var(const Polynomial& eq, const std::vector<Polynomial>& ineqs = {}) {
    PolySystem sys;
    sys.var_names = {"x"};
    sys.add_equality(eq, "eq");
    for (const auto& g : ineqs) sys.add_inequality(g, "ineq");
    return relax(sys);
}

Polynomial x() { return Polynomial::var(0); }

}  // namespace

TEST_CASE("contradictory linear equalities give a trivial certificate") {
    MomentProblem prob;
    prob.var_names = {};
    prob.index = MomentIndex({Monomial{}});
    prob.eq_matrix.resize(2, 1);
    prob.eq_matrix.insert(0, 0) = 1.0;
    prob.eq_matrix.insert(1, 0) = 1.0;
    prob.eq_rhs = Eigen::Vector2d(1.0, 2.0);
    prob.eq_labels = {"y1 = 1", "y1 = 2"};
    const auto r = solve_feasibility(prob);
    REQUIRE(r.status == ConicStatus::Infeasible);
    CHECK(verify_certificate(prob, *r.certificate));
}

TEST_CASE("x^2 = -1 relaxation is infeasible") {
    const auto prob = one_var(x() * x() + 1.0);
    CHECK(prob.m() == 5);
    const auto r = solve_feasibility(prob);
    REQUIRE(r.status == ConicStatus::Infeasible);
    CHECK(verify_certificate(prob, *r.certificate));
}

TEST_CASE("x^2 = 1, x >= 0 relaxation is feasible") {
    const auto prob = one_var(x() * x() - 1.0, {x()});
    CHECK(prob.blocks[0].dim == 3);
    const auto r = solve_feasibility(prob);
    REQUIRE(r.status == ConicStatus::Feasible);
    CHECK(r.eq_residual <= 1e-7);
    CHECK(r.min_eig >= -1e-7);
}

TEST_CASE("x^2 = 1, x >= 2 relaxation is infeasible") {
    const auto prob = one_var(x() * x() - 1.0, {x() - 2.0});
    const auto r = solve_feasibility(prob);
    REQUIRE(r.status == ConicStatus::Infeasible);
    CHECK(verify_certificate(prob, *r.certificate));
}

TEST_CASE("certificate verification rejects tampering") {
    const auto prob = one_var(x() * x() + 1.0);
    const auto r = solve_feasibility(prob);
    REQUIRE(r.certificate);

    SUBCASE("negative eigenvalue") {
        auto bad = *r.certificate;
        bad.z[0] -= 2.0 * Eigen::MatrixXd::Identity(bad.z[0].rows(), bad.z[0].cols()) * bad.z[0].norm();
        CHECK_FALSE(verify_certificate(prob, bad));
    }
    SUBCASE("perturbed multipliers") {
        auto bad = *r.certificate;
        const auto chk0 = check_certificate(prob, bad);
        bad.mu(1) += 1e-3 * chk0.gap;
        const auto chk = check_certificate(prob, bad);
        CHECK(chk.residual > 1e-4);
        CHECK_FALSE(verify_certificate(prob, bad));
    }
    SUBCASE("JSON round trip") {
        const auto j = nlohmann::json::parse(to_json(*r.certificate).dump());
        const auto p2 = moment_problem_from_json(nlohmann::json::parse(to_json(prob).dump()));
        CHECK(verify_certificate(p2, certificate_from_json(j)));
    }
}
