#include <doctest.h>

#include "pfcert/certify.hpp"
#include "test_util.hpp"

using namespace pfcert;

namespace {

struct Case3 {
    Network net = load_case(testutil::data("case3.m"));
    OperationalLimits lims = OperationalLimits::from_network(net, 0.4);
    Injection s0 = Injection::Zero(2);

    RegionSpec box(double delta) const { return RegionSpec::box(s0, Eigen::VectorXd::Ones(2), delta); }
};

}  // namespace

TEST_CASE("case3 Jacobian relaxation is certified at gamma 0.4") {
    const Case3 c;
    const auto j = check_jacobian(c.net, c.lims);
    REQUIRE(j.certified());
    CHECK(verify_certificate(jacobian_relaxation(c.net, c.lims), *j.certificate));
}

TEST_CASE("case3 gamma search") {
    const Case3 c;
    CertifyOptions o;
    o.tol_gamma = 1e-2;
    const auto g = maximize_gamma(c.net, OperationalLimits::from_network(c.net), 0.5, 2.0, o);
    // frozen from a tol 1e-3 run: infeasible at 1.36, feasible at 1.37
    CHECK(g.gamma_star == doctest::Approx(1.36).epsilon(0.01));
    CHECK(g.bracket_hi - g.gamma_star <= 1e-2 + 1e-12);
    for (const auto& t : g.trials) CHECK(t.certified() == (t.gamma <= g.gamma_star));
    CHECK_THROWS_AS(maximize_gamma(c.net, OperationalLimits::from_network(c.net), 1.5, 2.0, o), PreconditionError);
}

TEST_CASE("zero-size region at a strictly feasible center is certified") {
    const Case3 c;
    CertifyOptions o;
    o.mc_samples = 20;
    const auto r = certify_region(c.net, c.lims, c.box(0.0), o);
    CHECK(r.certified());
    CHECK(r.first_failing() == -1);
}

TEST_CASE("case3 unit box certification is monotone in delta") {
    const Case3 c;
    CertifyOptions o;
    o.mc_samples = 100;
    // delta* = 0.489 for this box, frozen from a tol 1e-3 search
    const auto in = certify_region(c.net, c.lims, c.box(0.45), o);
    CHECK(in.certified());
    REQUIRE(in.monte_carlo);
    CHECK(in.monte_carlo->passed());
    const auto out = certify_region(c.net, c.lims, c.box(0.6), o);
    CHECK(out.outcome == Outcome::NotCertified);
    CHECK(out.first_failing() >= 0);
    // just above delta* the tightness point is unique and extraction is exact
    const auto near = certify_region(c.net, c.lims, c.box(0.495), o);
    CHECK(near.outcome == Outcome::NotCertified);
    const Counterexample* ce = nullptr;
    for (const auto& cv : near.constraints)
        if (cv.counterexample && cv.counterexample->genuine) ce = &*cv.counterexample;
    REQUIRE(ce);
    CHECK(ce->equality_residual <= 1e-6);
    CHECK(ce->inequality_violation <= 1e-6);
}

TEST_CASE("delta search brackets the frozen value") {
    const Case3 c;
    CertifyOptions o;
    o.mc_samples = 50;
    o.tol_delta = 1e-2;
    const auto d = maximize_delta(c.net, c.lims, c.box(1.0), 1.0, o);
    CHECK(d.delta_star == doctest::Approx(0.489).epsilon(0.03));
    REQUIRE(d.above);
    CHECK(d.above->outcome == Outcome::NotCertified);
}

TEST_CASE("infeasible center is a precondition failure") {
    const Case3 c;
    Injection far(2);
    far << 5.0, 5.0;
    CHECK_THROWS_AS(center_solution(c.net, c.lims, far), PreconditionError);
}

TEST_CASE("ODE residual decays like e^-t") {
    const Case3 c;
    const auto v0 = center_solution(c.net, c.lims, c.s0);
    Injection s(2);
    s << 0.3, -0.2;
    for (bool corrector : {false, true}) {
        OdeOptions o;
        o.corrector = corrector;
        const auto rep = ode_validate(c.net, c.lims, v0, s, o);
        CHECK_FALSE(rep.aborted);
        REQUIRE(rep.checkpoints.size() == 5);
        CHECK(rep.max_rel_error() <= 1e-2);
        CHECK(rep.min_sigma > 1e-6);
        CHECK(rep.min_slack > 0.0);
    }
}

TEST_CASE("box fit covers its samples") {
    const Case3 c;
    const auto fit = fit_box_heuristic(c.net, c.lims, 500, 3);
    REQUIRE(fit.samples.cols() > 0);
    CHECK(fit.drawn == 500);
    for (Eigen::Index j = 0; j < fit.samples.cols(); ++j)
        CHECK(((fit.samples.col(j) - fit.center).cwiseAbs() - fit.half_widths).maxCoeff() <= 1e-12);
    const Eigen::MatrixXd q = fit.ellipsoid_shape();
    CHECK(q.determinant() == doctest::Approx(1.0));
}

TEST_CASE("Monte-Carlo check with zero samples is vacuous") {
    const Case3 c;
    const auto v0 = center_solution(c.net, c.lims, c.s0);
    const auto m = monte_carlo_check(c.net, c.lims, c.box(0.1), v0, 0, 1, 0.0);
    CHECK(m.vacuous());
    CHECK(m.passed());
}
