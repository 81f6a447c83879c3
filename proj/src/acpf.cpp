#include "pfcert/acpf.hpp"

#include <algorithm>
#include <cmath>

namespace pfcert {

Eigen::VectorXcd VoltageState::rect() const {
    Eigen::VectorXcd v(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) v(i) = std::polar(std::exp(rho(i)), theta(i));
    return v;
}

VoltageState VoltageState::from_rect(const Eigen::VectorXcd& v) {
    VoltageState s;
    s.theta.resize(v.size());
    s.rho.resize(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        s.theta(i) = std::arg(v(i));
        s.rho(i) = std::log(std::abs(v(i)));
    }
    return s;
}

VoltageState VoltageState::flat(const Network& net) {
    VoltageState s;
    const int nb = net.num_buses();
    s.theta = Eigen::VectorXd::Zero(nb);
    s.rho = Eigen::VectorXd::Zero(nb);
    for (const auto& b : net.buses)
        if (b.kind != BusKind::PQ) s.rho(b.index) = std::log(b.v_set);
    return s;
}

bool is_valid(const Network& net, const VoltageState& v, double tol) {
    if (v.theta.size() != net.num_buses() || v.rho.size() != net.num_buses()) return false;
    if (std::abs(v.theta(0)) > tol) return false;
    for (const auto& b : net.buses)
        if (b.kind != BusKind::PQ && std::abs(v.rho(b.index) - std::log(b.v_set)) > tol) return false;
    return true;
}

Eigen::VectorXd unknowns(const Network& net, const VoltageState& v) {
    const int n = net.n();
    Eigen::VectorXd x(net.k());
    for (int i = 1; i <= n; ++i) x(i - 1) = v.theta(i);
    for (std::size_t p = 0; p < net.pq.size(); ++p) x(n + static_cast<int>(p)) = v.rho(net.pq[p]);
    return x;
}

VoltageState with_unknowns(const Network& net, VoltageState base, const Eigen::VectorXd& x) {
    const int n = net.n();
    for (int i = 1; i <= n; ++i) base.theta(i) = x(i - 1);
    for (std::size_t p = 0; p < net.pq.size(); ++p) base.rho(net.pq[p]) = x(n + static_cast<int>(p));
    return base;
}

Injection nominal_injection(const Network& net) {
    const int n = net.n();
    Injection s(net.k());
    for (int i = 1; i <= n; ++i) s(i - 1) = net.buses[i].p_nominal;
    for (std::size_t p = 0; p < net.pq.size(); ++p) s(n + static_cast<int>(p)) = net.buses[net.pq[p]].q_nominal;
    return s;
}

OperationalLimits OperationalLimits::from_network(const Network& net, double gamma) {
    OperationalLimits l;
    for (const auto& b : net.buses) {
        l.v_min.push_back(b.v_min);
        l.v_max.push_back(b.v_max);
        l.q_min.push_back(b.q_min);
        l.q_max.push_back(b.q_max);
    }
    for (const auto& br : net.branches) l.flow_max.push_back(br.flow_limit);
    l.p0_min = net.buses[0].p_min;
    l.p0_max = net.buses[0].p_max;
    l.gamma = gamma;
    return l;
}

double OperationalLimits::effective_flow_limit(int branch) const {
    return std::min(gamma, flow_max.at(branch));
}

void OperationalLimits::validate(const Network& net) const {
    const auto nb = static_cast<std::size_t>(net.num_buses());
    if (v_min.size() != nb || v_max.size() != nb || q_min.size() != nb || q_max.size() != nb ||
        flow_max.size() != net.branches.size())
        throw ModelError("operational limits do not match the network dimensions");
    if (!(gamma > 0.0)) throw ModelError("gamma must be positive");
    for (int i : net.pq)
        if (!(v_min[i] < v_max[i])) throw ModelError("empty voltage band at bus " + std::to_string(net.external_id(i)));
    for (std::size_t i = 0; i < nb; ++i)
        if (q_min[i] > q_max[i]) throw ModelError("empty reactive band at bus " + std::to_string(net.buses[i].external_id));
    for (double f : flow_max)
        if (!(f > 0.0)) throw ModelError("flow limits must be positive");
    if (p0_min > p0_max) throw ModelError("empty slack active band");
}

std::vector<OpConstraint> OperationalLimits::constraints(const Network& net) const {
    std::vector<OpConstraint> out;
    auto bus_label = [&](const char* what, int bus) {
        return std::string(what) + "(bus " + std::to_string(net.external_id(bus)) + ")";
    };
    for (int i : net.pq) {
        if (std::isfinite(v_min[i]) && v_min[i] > 0.0)
            out.push_back({ConstraintKind::VoltageMin, i, -1, v_min[i], bus_label("vmin", i)});
        if (std::isfinite(v_max[i])) out.push_back({ConstraintKind::VoltageMax, i, -1, v_max[i], bus_label("vmax", i)});
    }
    for (std::size_t e = 0; e < net.branches.size(); ++e) {
        const double f = effective_flow_limit(static_cast<int>(e));
        if (!std::isfinite(f)) continue;
        const auto& br = net.branches[e];
        out.push_back({ConstraintKind::Flow, -1, static_cast<int>(e), f,
                       "flow(" + std::to_string(net.external_id(br.from)) + "," +
                           std::to_string(net.external_id(br.to)) + ")"});
    }
    for (int i : net.pv) {
        if (std::isfinite(q_min[i])) out.push_back({ConstraintKind::ReactiveMinPV, i, -1, q_min[i], bus_label("qmin", i)});
        if (std::isfinite(q_max[i])) out.push_back({ConstraintKind::ReactiveMaxPV, i, -1, q_max[i], bus_label("qmax", i)});
    }
    if (std::isfinite(q_min[0])) out.push_back({ConstraintKind::ReactiveMinSlack, 0, -1, q_min[0], "q0min"});
    if (std::isfinite(q_max[0])) out.push_back({ConstraintKind::ReactiveMaxSlack, 0, -1, q_max[0], "q0max"});
    if (std::isfinite(p0_min)) out.push_back({ConstraintKind::ActiveMinSlack, 0, -1, p0_min, "p0min"});
    if (std::isfinite(p0_max)) out.push_back({ConstraintKind::ActiveMaxSlack, 0, -1, p0_max, "p0max"});
    return out;
}

Eigen::VectorXcd bus_injections(const Network& net, const Eigen::VectorXcd& v) {
    const Eigen::VectorXcd current = net.Y * v;
    return v.cwiseProduct(current.conjugate());
}

Injection evaluate_F(const Network& net, const VoltageState& v) {
    const int nb = net.num_buses();
    const int n = net.n();
    Injection f = Injection::Zero(net.k());
    auto reactive_row = [&](int i) {
        double q = 0.0;
        for (int j = 0; j < nb; ++j) {
            const double mag = std::exp(v.rho(i) + v.rho(j));
            const double d = v.theta(i) - v.theta(j);
            q += net.G(i, j) * mag * std::sin(d) - net.B(i, j) * mag * std::cos(d);
        }
        return q;
    };
    for (int i = 1; i <= n; ++i) {
        double p = 0.0;
        for (int j = 0; j < nb; ++j) {
            const double mag = std::exp(v.rho(i) + v.rho(j));
            const double d = v.theta(i) - v.theta(j);
            p += net.B(i, j) * mag * std::sin(d) + net.G(i, j) * mag * std::cos(d);
        }
        f(i - 1) = p;
    }
    for (std::size_t p = 0; p < net.pq.size(); ++p) f(n + static_cast<int>(p)) = reactive_row(net.pq[p]);
    return f;
}

Eigen::MatrixXd jacobian_analytic(const Network& net, const VoltageState& state) {
    const int n = net.n();
    const int k = net.k();
    const Eigen::VectorXcd v = state.rect();
    const Eigen::VectorXcd current = net.Y * v;
    const std::complex<double> j1(0.0, 1.0);

    // dS/dtheta = j diag(V) conj(diag(I) - Y diag(V)), dS/drho = diag(V) conj(Y diag(V)) + conj(diag(I)) diag(V)
    const Eigen::MatrixXcd yv = net.Y * v.asDiagonal();
    Eigen::MatrixXcd d_theta = -yv.conjugate();
    d_theta.diagonal() += current.conjugate();
    d_theta = j1 * (v.asDiagonal() * d_theta);
    Eigen::MatrixXcd d_rho = v.asDiagonal() * yv.conjugate();
    d_rho.diagonal() += current.conjugate().cwiseProduct(v);

    Eigen::MatrixXd jac(k, k);
    for (int r = 0; r < k; ++r) {
        const bool active = r < n;
        const int bus = active ? r + 1 : net.pq[r - n];
        for (int c = 0; c < k; ++c) {
            const bool angle = c < n;
            const int col_bus = angle ? c + 1 : net.pq[c - n];
            const auto d = angle ? d_theta(bus, col_bus) : d_rho(bus, col_bus);
            jac(r, c) = active ? d.real() : d.imag();
        }
    }
    return jac;
}

Eigen::MatrixXd JacobianQuadForm::evaluate(const Eigen::VectorXcd& v) const {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(k, k);
    for (const auto& t : diag) jac += std::norm(v(t.bus)) * t.delta;
    for (const auto& t : edges) {
        const auto prod = v(t.i) * std::conj(v(t.j));
        jac += prod.real() * t.gamma + prod.imag() * t.psi;
    }
    return jac;
}

JacobianQuadForm jacobian_quadform(const Network& net) {
    const int n = net.n();
    const int k = net.k();
    JacobianQuadForm qf;
    qf.k = k;

    auto p_row = [&](int bus) { return bus >= 1 ? bus - 1 : -1; };
    auto q_row = [&](int bus) {
        const int p = net.pq_position(bus);
        return p < 0 ? -1 : n + p;
    };
    auto theta_col = [&](int bus) { return bus >= 1 ? bus - 1 : -1; };
    auto rho_col = q_row;

    for (int i : net.pq) {
        Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(k, k);
        delta(p_row(i), rho_col(i)) = 2.0 * net.G(i, i);
        delta(q_row(i), rho_col(i)) = -2.0 * net.B(i, i);
        qf.diag.push_back({i, std::move(delta)});
    }

    for (const auto& br : net.branches) {
        const int a = br.from;
        const int b = br.to;
        Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(k, k);
        Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(k, k);
        // Each injection row contains alpha*R + beta*I with R = Re(V_a conj V_b), I = Im(V_a conj V_b).
        struct RowTerm {
            int row;
            double alpha;
            double beta;
        };
        const RowTerm rows[] = {
            {p_row(a), net.G(a, b), net.B(a, b)},
            {p_row(b), net.G(b, a), -net.B(b, a)},
            {q_row(a), -net.B(a, b), net.G(a, b)},
            {q_row(b), -net.B(b, a), -net.G(b, a)},
        };
        for (const auto& t : rows) {
            if (t.row < 0) continue;
            // d/dtheta_a: beta*R - alpha*I; d/dtheta_b: -beta*R + alpha*I; d/drho_{a,b}: alpha*R + beta*I.
            if (int c = theta_col(a); c >= 0) {
                gamma(t.row, c) += t.beta;
                psi(t.row, c) -= t.alpha;
            }
            if (int c = theta_col(b); c >= 0) {
                gamma(t.row, c) -= t.beta;
                psi(t.row, c) += t.alpha;
            }
            for (int bus : {a, b}) {
                if (int c = rho_col(bus); c >= 0) {
                    gamma(t.row, c) += t.alpha;
                    psi(t.row, c) += t.beta;
                }
            }
        }
        qf.edges.push_back({a, b, std::move(gamma), std::move(psi)});
    }
    return qf;
}

NewtonResult newton_solve(const Network& net, const Injection& s, const VoltageState& start, const NewtonOptions& opts) {
    NewtonResult res;
    res.state = start;
    Eigen::VectorXd x = unknowns(net, start);
    auto mismatch = [&](const VoltageState& v) -> Eigen::VectorXd { return evaluate_F(net, v) - s; };

    Eigen::VectorXd r = mismatch(res.state);
    double norm = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it <= opts.max_iter; ++it) {
        res.iterations = it;
        res.residual = norm;
        if (!std::isfinite(norm)) break;
        if (norm <= opts.tol) {
            res.status = NewtonResult::Status::Converged;
            return res;
        }
        if (it == opts.max_iter) break;
        const Eigen::MatrixXd jac = jacobian_analytic(net, res.state);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        if (!(lu.rcond() > 1e-14)) {
            res.status = NewtonResult::Status::Singular;
            return res;
        }
        const Eigen::VectorXd dx = lu.solve(-r);
        double step = 1.0;
        bool accepted = false;
        for (int half = 0; half < 30; ++half) {
            auto trial = with_unknowns(net, res.state, x + step * dx);
            Eigen::VectorXd rt = mismatch(trial);
            const double nt = rt.lpNorm<Eigen::Infinity>();
            if (std::isfinite(nt) && nt < norm) {
                x += step * dx;
                res.state = std::move(trial);
                r = std::move(rt);
                norm = nt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    res.status = NewtonResult::Status::NoConvergence;
    return res;
}

double eval_constraint(const Network& net, const OperationalLimits& lims, const OpConstraint& c,
                       const Eigen::VectorXcd& v) {
    auto injection = [&](int bus) {
        const Complex current = net.Y.row(bus) * v;
        return v(bus) * std::conj(current);
    };
    switch (c.kind) {
        case ConstraintKind::VoltageMin: return std::norm(v(c.bus)) - c.bound * c.bound;
        case ConstraintKind::VoltageMax: return c.bound * c.bound - std::norm(v(c.bus));
        case ConstraintKind::Flow: {
            const auto& br = net.branches[c.branch];
            const double f = lims.effective_flow_limit(c.branch);
            return f * f - std::norm(v(br.from) - v(br.to));
        }
        case ConstraintKind::ReactiveMinPV:
        case ConstraintKind::ReactiveMinSlack: return injection(c.bus).imag() - c.bound;
        case ConstraintKind::ReactiveMaxPV:
        case ConstraintKind::ReactiveMaxSlack: return c.bound - injection(c.bus).imag();
        case ConstraintKind::ActiveMinSlack: return injection(0).real() - c.bound;
        case ConstraintKind::ActiveMaxSlack: return c.bound - injection(0).real();
    }
    return 0.0;
}

Eigen::VectorXd eval_operational(const Network& net, const OperationalLimits& lims, const VoltageState& state) {
    const auto cons = lims.constraints(net);
    const Eigen::VectorXcd v = state.rect();
    Eigen::VectorXd out(static_cast<Eigen::Index>(cons.size()));
    for (std::size_t i = 0; i < cons.size(); ++i) out(static_cast<Eigen::Index>(i)) = eval_constraint(net, lims, cons[i], v);
    return out;
}

}  // namespace pfcert
