#include "pfcert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "parallel.hpp"
#include "pfcert/moment.hpp"
#include "pfcert/poly.hpp"

namespace pfcert {

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::CertifiedInfeasible: return "certified-infeasible";
        case Verdict::Counterexample: return "counterexample";
        case Verdict::Unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Certified: return "certified";
        case Outcome::NotCertified: return "not-certified";
        case Outcome::Unknown: return "unknown";
    }
    return "unknown";
}

int CertResult::first_failing() const {
    for (const auto& c : constraints)
        if (c.verdict != Verdict::CertifiedInfeasible) return c.index;
    return -1;
}

MomentProblem jacobian_relaxation(const Network& net, const OperationalLimits& lims) {
    const auto red = eliminate_linear(build_jacobian_system(net, lims));
    RelaxOptions ro;
    ro.exploit_sign_symmetry = true;
    return relax(red.system, ro);
}

MomentProblem constraint_relaxation(const Network& net, const OperationalLimits& lims, const RegionSpec& region,
                                    int index) {
    return relax(eliminate_linear(build_feasibility_system(net, lims, region, index)).system);
}

JacobianCheck check_jacobian(const Network& net, const OperationalLimits& lims, const CertifyOptions& opts) {
    const auto prob = jacobian_relaxation(net, lims);
    const auto r = solve_feasibility(prob, opts.conic);
    JacobianCheck out;
    out.gamma = lims.gamma;
    out.status = r.status;
    out.margin = r.margin;
    out.iterations = r.iterations;
    out.moments = prob.m();
    out.certificate = r.certificate;
    out.message = r.message;
    return out;
}

GammaSearch maximize_gamma(const Network& net, const OperationalLimits& lims, double gamma_lo, double gamma_hi,
                           const CertifyOptions& opts) {
    if (!(gamma_lo > 0.0) || !(gamma_hi > gamma_lo)) throw std::invalid_argument("need 0 < gamma_lo < gamma_hi");
    GammaSearch out;
    auto trial = [&](double g) {
        OperationalLimits l = lims;
        l.gamma = g;
        out.trials.push_back(check_jacobian(net, l, opts));
        return out.trials.back();
    };
    auto lo = trial(gamma_lo);
    if (!lo.certified())
        throw PreconditionError("no certificate at requested floor gamma = " + std::to_string(gamma_lo) + " (" +
                                std::string(to_string(lo.status)) + ")");
    out.gamma_star = gamma_lo;
    out.at_star = lo;
    auto hi = trial(gamma_hi);
    if (hi.certified()) {
        out.gamma_star = gamma_hi;
        out.bracket_hi = gamma_hi;
        out.at_star = hi;
        return out;
    }
    double a = gamma_lo;
    double b = gamma_hi;
    while (b - a > opts.tol_gamma) {
        const double mid = 0.5 * (a + b);
        auto r = trial(mid);
        if (r.certified()) {
            a = mid;
            out.at_star = r;
        } else {
            b = mid;
        }
    }
    out.gamma_star = a;
    out.bracket_hi = b;
    return out;
}

namespace {

bool strictly_feasible(const Network& net, const OperationalLimits& lims, const VoltageState& v, double margin) {
    const Eigen::VectorXd sl = eval_operational(net, lims, v);
    return sl.size() == 0 || sl.minCoeff() >= margin;
}

// Follow the straight line from (s_from, v_from) to s_to with adaptive steps.
std::optional<VoltageState> continuation(const Network& net, const Injection& s_from, const VoltageState& v_from,
                                         const Injection& s_to, int steps = 8) {
    VoltageState v = v_from;
    double t = 0.0;
    double h = 1.0 / steps;
    while (t < 1.0) {
        const double tn = std::min(1.0, t + h);
        const Injection s = s_from + tn * (s_to - s_from);
        auto nr = newton_solve(net, s, v);
        if (nr.converged()) {
            v = nr.state;
            t = tn;
            h = std::min(2.0 * h, 0.25);
        } else {
            h *= 0.5;
            if (h < 1e-4) return std::nullopt;
        }
    }
    return v;
}

// Gauss-Newton with minimum-norm steps onto the equalities of `sys`.
Eigen::VectorXd refine_onto_equalities(const PolySystem& sys, Eigen::VectorXd x) {
    const int ne = static_cast<int>(sys.equalities.size());
    const int nv = sys.nvars();
    std::vector<std::vector<std::pair<int, Polynomial>>> grad(ne);
    for (int e = 0; e < ne; ++e)
        for (int v = 0; v < nv; ++v)
            if (sys.equalities[e].involves(v)) grad[e].emplace_back(v, sys.equalities[e].derivative(v));
    for (int it = 0; it < 30; ++it) {
        Eigen::VectorXd h(ne);
        for (int e = 0; e < ne; ++e) h(e) = eval_poly(sys.equalities[e], x);
        if (h.lpNorm<Eigen::Infinity>() < 1e-13) break;
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(ne, nv);
        for (int e = 0; e < ne; ++e)
            for (const auto& [v, p] : grad[e]) jac(e, v) = eval_poly(p, x);
        const Eigen::VectorXd dx = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(jac).solve(h);
        x -= dx;
        if (dx.lpNorm<Eigen::Infinity>() < 1e-15) break;
    }
    return x;
}

ConstraintVerdict solve_constraint(const Network& net, const OperationalLimits& lims, const RegionSpec& region,
                                   const OpConstraint& con, int index, const CertifyOptions& opts) {
    ConstraintVerdict cv;
    cv.index = index;
    cv.label = con.label;
    const auto sys = build_feasibility_system(net, lims, region, index);
    const auto red = eliminate_linear(sys);
    const auto prob = relax(red.system);
    const auto r = solve_feasibility(prob, opts.conic);
    cv.margin = r.margin;
    cv.iterations = r.iterations;
    cv.moments = prob.m();
    cv.message = r.message;
    switch (r.status) {
        case ConicStatus::Infeasible:
            cv.verdict = Verdict::CertifiedInfeasible;
            cv.certificate = r.certificate;
            break;
        case ConicStatus::Unknown:
            cv.verdict = Verdict::Unknown;
            break;
        case ConicStatus::Feasible: {
            cv.verdict = Verdict::Counterexample;
            const auto cand = extract_candidate(prob, r.y);
            const Eigen::VectorXd x = refine_onto_equalities(sys, red.expand(cand.x));
            const VarLayout lay{net.k(), net.num_buses()};
            Counterexample ce;
            ce.v = lay.voltages(x);
            ce.s = lay.aux_part(x);
            ce.equality_residual = sys.equality_residual(x);
            ce.inequality_violation = sys.inequality_violation(x);
            ce.rank_ratio = cand.rank_ratio;
            ce.genuine = ce.equality_residual <= opts.counterexample_tol &&
                         ce.inequality_violation <= opts.counterexample_tol;
            cv.counterexample = std::move(ce);
            break;
        }
    }
    return cv;
}

Eigen::VectorXd sample_region(const RegionSpec& region, std::mt19937_64& rng) {
    const int k = region.dim();
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXd s = region.center;
    if (region.kind == RegionSpec::Kind::Box) {
        for (int i = 0; i < k; ++i) s(i) += region.delta * region.half_widths(i) * uni(rng);
        return s;
    }
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd g(k);
    for (int i = 0; i < k; ++i) g(i) = gauss(rng);
    const double radius = region.delta * std::pow(unit(rng), 1.0 / k);
    const Eigen::VectorXd u = radius * g / g.norm();
    // (s - s0)' Q (s - s0) = |u|^2 with Q = L L'.
    const Eigen::LLT<Eigen::MatrixXd> llt(region.shape);
    s += llt.matrixU().solve(u);
    return s;
}

}  // namespace

VoltageState center_solution(const Network& net, const OperationalLimits& lims, const Injection& s0) {
    if (s0.size() != net.k()) throw std::invalid_argument("center has the wrong dimension");
    const VoltageState flat = VoltageState::flat(net);
    std::optional<VoltageState> v;
    if (auto nr = newton_solve(net, s0, flat); nr.converged()) v = nr.state;
    if (!v) v = continuation(net, evaluate_F(net, flat), flat, s0, 16);
    if (!v) throw PreconditionError("region center has no power flow solution from a flat start");
    const Eigen::VectorXd sl = eval_operational(net, lims, *v);
    if (sl.size() && !(sl.minCoeff() > 0.0)) {
        Eigen::Index worst = 0;
        sl.minCoeff(&worst);
        throw PreconditionError("region center is not strictly feasible: " + lims.constraints(net)[worst].label +
                                " slack " + std::to_string(sl(worst)));
    }
    return *v;
}

MonteCarloReport monte_carlo_check(const Network& net, const OperationalLimits& lims, const RegionSpec& region,
                                   const VoltageState& v0, int samples, std::uint64_t seed, double margin) {
    MonteCarloReport rep;
    rep.samples = std::max(0, samples);
    std::mt19937_64 rng(seed);
    const Injection s0 = region.center;
    for (int i = 0; i < rep.samples; ++i) {
        const Injection s = sample_region(region, rng);
        const auto v = continuation(net, s0, v0, s);
        if (!v) {
            if (rep.worst_reason != "no solution") {
                rep.worst = s;
                rep.worst_reason = "no solution";
            }
            rep.min_slack = -kInf;
            continue;
        }
        ++rep.solved;
        const Eigen::VectorXd sl = eval_operational(net, lims, *v);
        const double m = sl.size() ? sl.minCoeff() : kInf;
        if (m >= margin) ++rep.strictly_feasible;
        if (m < rep.min_slack) {
            rep.min_slack = m;
            rep.worst = s;
            rep.worst_reason = "smallest slack";
        }
    }
    return rep;
}

CertResult certify_region(const Network& net, const OperationalLimits& lims, const RegionSpec& region,
                          const CertifyOptions& opts, const std::optional<JacobianCheck>& jacobian) {
    lims.validate(net);
    region.validate();
    if (region.dim() != net.k()) throw std::invalid_argument("region dimension does not match the injection vector");
    const VoltageState v0 = center_solution(net, lims, region.center);

    CertResult res;
    res.gamma = lims.gamma;
    res.region = region;
    res.jacobian = jacobian && jacobian->gamma == lims.gamma ? *jacobian : check_jacobian(net, lims, opts);
    if (!res.jacobian.certified()) {
        res.outcome = res.jacobian.status == ConicStatus::Unknown ? Outcome::Unknown : Outcome::NotCertified;
        res.message = "Jacobian nonsingularity not certified at this gamma";
        return res;
    }

    const auto cons = lims.constraints(net);
    const int nc = static_cast<int>(cons.size());
    res.constraints.resize(nc);
    detail::parallel_for(nc, opts.jobs, [&](int i) {
        res.constraints[i] = solve_constraint(net, lims, region, cons[i], i, opts);
    });

    bool any_unknown = false;
    bool any_feasible = false;
    for (const auto& c : res.constraints) {
        any_unknown |= c.verdict == Verdict::Unknown;
        any_feasible |= c.verdict == Verdict::Counterexample;
    }
    if (any_feasible) {
        res.outcome = Outcome::NotCertified;
        const ConstraintVerdict* pick = nullptr;
        for (const auto& cc : res.constraints) {
            if (cc.verdict != Verdict::Counterexample) continue;
            if (!pick || (cc.counterexample->genuine && !pick->counterexample->genuine)) pick = &cc;
        }
        res.message = "tightness relaxation feasible for " + pick->label +
                      (pick->counterexample->genuine ? " (genuine counterexample)" : " (candidate not exact)");
        return res;
    }
    if (any_unknown) {
        res.outcome = Outcome::Unknown;
        res.message = "solver returned unknown for at least one constraint";
        return res;
    }
    res.monte_carlo = monte_carlo_check(net, lims, region, v0, opts.mc_samples, opts.seed, opts.strict_margin);
    if (!res.monte_carlo->passed()) {
        res.outcome = Outcome::NotCertified;
        res.message = "Monte-Carlo sample below the strictness margin (" + res.monte_carlo->worst_reason + ")";
        return res;
    }
    res.outcome = Outcome::Certified;
    res.message = "every tightness relaxation infeasible";
    return res;
}

DeltaSearch maximize_delta(const Network& net, const OperationalLimits& lims, const RegionSpec& templ,
                           double delta_hi, const CertifyOptions& opts, const std::optional<JacobianCheck>& jacobian) {
    if (!(delta_hi > opts.tol_delta)) throw std::invalid_argument("delta_hi must exceed the tolerance");
    DeltaSearch out;
    const JacobianCheck jac =
        jacobian && jacobian->gamma == lims.gamma ? *jacobian : check_jacobian(net, lims, opts);
    auto trial = [&](double d) {
        auto r = certify_region(net, lims, templ.scaled(d), opts, jac);
        out.trials.emplace_back(d, r.outcome);
        return r;
    };
    auto hi = trial(delta_hi);
    if (hi.certified()) {
        out.delta_star = delta_hi;
        out.at_star = std::move(hi);
        out.at_star.delta_star = delta_hi;
        return out;
    }
    auto lo = trial(opts.tol_delta);
    if (!lo.certified()) throw PreconditionError("no nontrivial region: not certified at delta = tolerance");
    double a = opts.tol_delta;
    double b = delta_hi;
    out.at_star = std::move(lo);
    out.above = std::move(hi);
    while (b - a > opts.tol_delta) {
        const double mid = 0.5 * (a + b);
        auto r = trial(mid);
        if (r.certified()) {
            a = mid;
            out.at_star = std::move(r);
        } else {
            b = mid;
            out.above = std::move(r);
        }
    }
    out.delta_star = a;
    out.at_star.delta_star = a;
    return out;
}

Eigen::MatrixXd BoxFit::ellipsoid_shape() const {
    const int k = static_cast<int>(samples.rows());
    const int n = static_cast<int>(samples.cols());
    if (n < k + 1) throw PreconditionError("too few samples for a covariance estimate");
    const Eigen::VectorXd mean = samples.rowwise().mean();
    const Eigen::MatrixXd c = samples.colwise() - mean;
    const Eigen::MatrixXd cov = c * c.transpose() / (n - 1);
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw PreconditionError("sample covariance is singular");
    Eigen::MatrixXd q = llt.solve(Eigen::MatrixXd::Identity(k, k));
    q = 0.5 * (q + q.transpose());
    const double logdet = 2.0 * Eigen::LLT<Eigen::MatrixXd>(q).matrixL().toDenseMatrix().diagonal().array().log().sum();
    return q * std::exp(-logdet / k);
}

BoxFit fit_box_heuristic(const Network& net, const OperationalLimits& lims, int n_samples, std::uint64_t seed,
                         const SamplingBox& box) {
    if (n_samples < 1) throw std::invalid_argument("n_samples must be at least 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ang(-box.angle, box.angle);
    std::vector<Injection> acc;
    const VoltageState flat = VoltageState::flat(net);
    for (int i = 0; i < n_samples; ++i) {
        VoltageState v = box.base ? *box.base : flat;
        for (int b = 1; b < net.num_buses(); ++b) v.theta(b) += ang(rng);
        for (int b : net.pq) {
            if (box.base) {
                const double m = std::exp(v.rho(b));
                v.rho(b) = std::log(std::uniform_real_distribution<double>(m - box.v_spread, m + box.v_spread)(rng));
                continue;
            }
            const double lo = std::isfinite(lims.v_min[b]) && lims.v_min[b] > 0.0 ? lims.v_min[b] : box.v_lo;
            const double hi = std::isfinite(lims.v_max[b]) ? lims.v_max[b] : box.v_hi;
            v.rho(b) = std::log(std::uniform_real_distribution<double>(lo, hi)(rng));
        }
        if (strictly_feasible(net, lims, v, 0.0)) acc.push_back(evaluate_F(net, v));
    }
    if (acc.empty()) throw PreconditionError("no sampled voltage profile met the operational limits; widen the sampling box");
    BoxFit fit;
    fit.drawn = n_samples;
    fit.samples.resize(net.k(), static_cast<Eigen::Index>(acc.size()));
    for (std::size_t j = 0; j < acc.size(); ++j) fit.samples.col(static_cast<Eigen::Index>(j)) = acc[j];
    const Eigen::VectorXd lo = fit.samples.rowwise().minCoeff();
    const Eigen::VectorXd hi = fit.samples.rowwise().maxCoeff();
    fit.center = 0.5 * (lo + hi);
    fit.half_widths = 0.5 * (hi - lo);
    return fit;
}

double OdeReport::max_rel_error() const {
    double m = 0.0;
    for (const auto& c : checkpoints) m = std::max(m, c.rel_error);
    return m;
}

OdeReport ode_validate(const Network& net, const OperationalLimits& lims, const VoltageState& v0, const Injection& s,
                       const OdeOptions& opts) {
    using Vec = Eigen::VectorXd;
    OdeReport rep;
    const Injection f0 = evaluate_F(net, v0);
    const double r0 = (f0 - s).norm();
    auto state = [&](const Vec& x) { return with_unknowns(net, v0, x); };
    auto sigma_min = [&](const VoltageState& v) {
        const Eigen::MatrixXd j = jacobian_analytic(net, v);
        return j.size() ? Eigen::JacobiSVD<Eigen::MatrixXd>(j).singularValues().minCoeff() : kInf;
    };
    auto observe = [&](const Vec& x, double t) {
        const VoltageState v = state(x);
        const double sg = sigma_min(v);
        rep.min_sigma = std::min(rep.min_sigma, sg);
        const Vec sl = eval_operational(net, lims, v);
        if (sl.size()) rep.min_slack = std::min(rep.min_slack, sl.minCoeff());
        if (sg < opts.sigma_abort) {
            rep.aborted = true;
            rep.abort_time = t;
            rep.message = "Jacobian nearly singular at t = " + std::to_string(t);
        }
    };
    auto rhs = [&](const Vec& x, Vec& dx) {
        const VoltageState v = state(x);
        dx = jacobian_analytic(net, v).partialPivLu().solve(s - evaluate_F(net, v));
    };

    // Dormand-Prince 5(4).
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    (void)c2, (void)c3, (void)c4, (void)c5;

    Vec x = unknowns(net, v0);
    observe(x, 0.0);
    std::vector<double> marks = opts.checkpoints;
    std::sort(marks.begin(), marks.end());
    std::size_t next_mark = 0;
    double t = 0.0;
    double h = 1e-2;
    Vec k1, k2, k3, k4, k5, k6, k7;
    rhs(x, k1);
    while (!rep.aborted && t < opts.t_end) {
        double target = opts.t_end;
        if (next_mark < marks.size()) target = std::min(target, marks[next_mark]);
        const bool hit = t + h >= target;
        const double hs = hit ? target - t : h;
        rhs(x + hs * a21 * k1, k2);
        rhs(x + hs * (a31 * k1 + a32 * k2), k3);
        rhs(x + hs * (a41 * k1 + a42 * k2 + a43 * k3), k4);
        rhs(x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
        rhs(x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
        const Vec xn = x + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(xn, k7);
        const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const Vec scale = (opts.atol + opts.rtol * x.cwiseAbs().cwiseMax(xn.cwiseAbs()).array()).matrix();
        const double en = err.size() ? (err.array() / scale.array()).abs().maxCoeff() : 0.0;
        if (en > 1.0) {
            h = hs * std::max(0.2, 0.9 * std::pow(en, -0.2));
            continue;
        }
        t += hs;
        x = xn;
        ++rep.steps;
        if (opts.corrector) {
            const Injection goal = s + std::exp(-t) * (f0 - s);
            for (int it = 0; it < 2; ++it) {
                const VoltageState v = state(x);
                const Vec r = evaluate_F(net, v) - goal;
                if (r.lpNorm<Eigen::Infinity>() < 1e-14) break;
                x -= jacobian_analytic(net, v).partialPivLu().solve(r);
            }
        }
        rhs(x, k1);
        observe(x, t);
        if (hit && next_mark < marks.size() && t >= marks[next_mark] - 1e-14) {
            OdeCheckpoint cp;
            cp.t = t;
            cp.residual = (evaluate_F(net, state(x)) - s).norm();
            cp.expected = std::exp(-t) * r0;
            cp.rel_error = cp.expected > 0.0 ? std::abs(cp.residual - cp.expected) / cp.expected : cp.residual;
            rep.checkpoints.push_back(cp);
            ++next_mark;
        }
        if (!hit) h = hs * std::min(5.0, 0.9 * std::pow(std::max(en, 1e-10), -0.2));
    }
    rep.final_state = state(x);
    if (!rep.aborted) rep.message = "integrated to t = " + std::to_string(t);
    return rep;
}

namespace {

nlohmann::json cert_summary(const std::optional<InfeasCertificate>& c) {
    if (!c) return nullptr;
    return {{"gap", c->gap}, {"residual", c->residual}, {"min_eig", c->min_eig}};
}

nlohmann::json complex_json(const Eigen::VectorXcd& v) {
    auto re = nlohmann::json::array();
    auto im = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        re.push_back(v(i).real());
        im.push_back(v(i).imag());
    }
    return {{"re", re}, {"im", im}};
}

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const JacobianCheck& j) {
    return {{"gamma", j.gamma},       {"status", to_string(j.status)}, {"margin", j.margin},
            {"iterations", j.iterations}, {"moments", j.moments},  {"certificate", cert_summary(j.certificate)},
            {"message", j.message}};
}

nlohmann::json to_json(const GammaSearch& g) {
    auto trials = nlohmann::json::array();
    for (const auto& t : g.trials) trials.push_back({{"gamma", t.gamma}, {"status", to_string(t.status)}, {"margin", t.margin}});
    return {{"gamma_star", g.gamma_star}, {"bracket_hi", g.bracket_hi}, {"trials", trials}};
}

nlohmann::json to_json(const ConstraintVerdict& c) {
    nlohmann::json j = {{"index", c.index},           {"label", c.label},          {"verdict", to_string(c.verdict)},
                        {"margin", c.margin},         {"iterations", c.iterations}, {"moments", c.moments},
                        {"certificate", cert_summary(c.certificate)}, {"message", c.message}};
    if (c.counterexample) {
        const auto& ce = *c.counterexample;
        j["counterexample"] = {{"v", complex_json(ce.v)},
                               {"s", vec_json(ce.s)},
                               {"equality_residual", ce.equality_residual},
                               {"inequality_violation", ce.inequality_violation},
                               {"rank_ratio", ce.rank_ratio},
                               {"genuine", ce.genuine}};
    }
    return j;
}

nlohmann::json to_json(const MonteCarloReport& m) {
    nlohmann::json j = {{"samples", m.samples},          {"solved", m.solved},
                        {"strictly_feasible", m.strictly_feasible}, {"min_slack", num(m.min_slack)},
                        {"vacuous", m.vacuous()},        {"passed", m.passed()}};
    if (m.worst) j["worst"] = {{"s", vec_json(*m.worst)}, {"reason", m.worst_reason}};
    return j;
}

nlohmann::json to_json(const CertResult& r) {
    auto cons = nlohmann::json::array();
    for (const auto& c : r.constraints) cons.push_back(to_json(c));
    nlohmann::json j = {{"schema_version", kCertResultSchema},
                        {"outcome", to_string(r.outcome)},
                        {"gamma", r.gamma},
                        {"gamma_star", r.gamma_star ? nlohmann::json(*r.gamma_star) : nlohmann::json(nullptr)},
                        {"delta_star", r.delta_star ? nlohmann::json(*r.delta_star) : nlohmann::json(nullptr)},
                        {"region", to_json(r.region)},
                        {"jacobian", to_json(r.jacobian)},
                        {"constraints", cons},
                        {"first_failing", r.first_failing()},
                        {"message", r.message}};
    j["monte_carlo"] = r.monte_carlo ? to_json(*r.monte_carlo) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const DeltaSearch& d) {
    auto trials = nlohmann::json::array();
    for (const auto& [delta, o] : d.trials) trials.push_back({{"delta", delta}, {"outcome", to_string(o)}});
    nlohmann::json j = {{"delta_star", d.delta_star}, {"trials", trials}, {"at_star", to_json(d.at_star)}};
    j["above"] = d.above ? to_json(*d.above) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const OdeReport& o) {
    auto cps = nlohmann::json::array();
    for (const auto& c : o.checkpoints)
        cps.push_back({{"t", c.t}, {"residual", c.residual}, {"expected", c.expected}, {"rel_error", c.rel_error}});
    return {{"checkpoints", cps},      {"min_sigma", num(o.min_sigma)}, {"min_slack", num(o.min_slack)},
            {"steps", o.steps},        {"aborted", o.aborted},          {"abort_time", o.abort_time},
            {"message", o.message}};
}

}  // namespace pfcert
