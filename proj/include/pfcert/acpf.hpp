#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pfcert/netmodel.hpp"

namespace pfcert {

/// Bus voltages in log-polar form: V_i = exp(rho_i + j theta_i).
struct VoltageState {
    Eigen::VectorXd theta;
    Eigen::VectorXd rho;

    Eigen::VectorXcd rect() const;
    static VoltageState from_rect(const Eigen::VectorXcd& v);
    /// theta = 0, |V| = set-point on slack/PV buses and 1 on PQ buses.
    static VoltageState flat(const Network& net);
};

/// H^eq: theta_0 = 0, |V_0| = v_0 and |V_i| = v_i on PV buses.
bool is_valid(const Network& net, const VoltageState& v, double tol = 1e-12);

/// Unknown vector (theta_1..theta_n, rho_pq).
Eigen::VectorXd unknowns(const Network& net, const VoltageState& v);
/// Overwrite the unknowns of `base` with `x`; fixed coordinates are kept.
VoltageState with_unknowns(const Network& net, VoltageState base, const Eigen::VectorXd& x);

/// Active injections at buses 1..n followed by reactive injections at PQ buses.
using Injection = Eigen::VectorXd;

/// Nominal injection vector read from the case tables.
Injection nominal_injection(const Network& net);

enum class ConstraintKind {
    VoltageMin,
    VoltageMax,
    Flow,
    ReactiveMinPV,
    ReactiveMaxPV,
    ReactiveMinSlack,
    ReactiveMaxSlack,
    ActiveMinSlack,
    ActiveMaxSlack,
};

/// One scalar operational inequality h(V) >= 0; every h is a quadratic in V.
struct OpConstraint {
    ConstraintKind kind;
    int bus = -1;     // internal index, -1 for flows
    int branch = -1;  // branch index for flows
    double bound = 0.0;
    std::string label;
};

struct OperationalLimits {
    std::vector<double> v_min;     // per bus, applied on PQ buses
    std::vector<double> v_max;
    std::vector<double> flow_max;  // per branch, bound on |V_i - V_j|
    std::vector<double> q_min;     // per bus, applied on PV buses and the slack
    std::vector<double> q_max;
    double p0_min = -kInf;
    double p0_max = kInf;
    double gamma = kInf;

    static OperationalLimits from_network(const Network& net, double gamma = kInf);

    double effective_flow_limit(int branch) const;

    /// Scalar constraints in the fixed order: magnitudes, flows, PV reactive,
    /// slack reactive, slack active. Infinite bounds are omitted.
    std::vector<OpConstraint> constraints(const Network& net) const;

    /// Throws ModelError on empty intervals or gamma <= 0.
    void validate(const Network& net) const;
};

/// Complex power injected at every bus, S = V .* conj(Y V).
Eigen::VectorXcd bus_injections(const Network& net, const Eigen::VectorXcd& v);

Injection evaluate_F(const Network& net, const VoltageState& v);

/// Exact partial derivatives of F with respect to (theta_nsb, rho_pq).
Eigen::MatrixXd jacobian_analytic(const Network& net, const VoltageState& v);

/// J_F(V) = sum_pq Delta_i |V_i|^2 + sum_edges Gamma_ij Re(V_i conj V_j) + Psi_ij Im(V_i conj V_j).
struct JacobianQuadForm {
    struct DiagTerm {
        int bus;
        Eigen::MatrixXd delta;
    };
    struct EdgeTerm {
        int i;
        int j;
        Eigen::MatrixXd gamma;
        Eigen::MatrixXd psi;
    };

    int k = 0;
    std::vector<DiagTerm> diag;
    std::vector<EdgeTerm> edges;

    Eigen::MatrixXd evaluate(const Eigen::VectorXcd& v) const;
};

JacobianQuadForm jacobian_quadform(const Network& net);

struct NewtonOptions {
    double tol = 1e-8;
    int max_iter = 50;
};

struct NewtonResult {
    enum class Status { Converged, NoConvergence, Singular };
    Status status = Status::NoConvergence;
    VoltageState state;
    int iterations = 0;
    double residual = 0.0;  // infinity norm of F(V) - s

    bool converged() const { return status == Status::Converged; }
};

/// Damped Newton on (theta_nsb, rho_pq) with residual-halving line search.
NewtonResult newton_solve(const Network& net, const Injection& s, const VoltageState& start,
                          const NewtonOptions& opts = {});

/// Value of one constraint; positive means strictly satisfied.
double eval_constraint(const Network& net, const OperationalLimits& lims, const OpConstraint& c,
                       const Eigen::VectorXcd& v);

/// One slack per entry of `lims.constraints(net)`.
Eigen::VectorXd eval_operational(const Network& net, const OperationalLimits& lims, const VoltageState& v);

}  // namespace pfcert
