#pragma once

#include <optional>
#include <random>
#include <string>

#include "pfcert/acpf.hpp"
#include "pfcert/netmodel.hpp"

namespace testutil {

inline std::string data(const std::string& name) { return std::string(PFCERT_DATA_DIR) + "/" + name; }

// Slack bus 1 at 1.0 pu feeding a PQ bus 2 through a lossless line.
inline std::string two_bus(double x, double b = 0.0) {
    return "function mpc = two_bus\n"
           "mpc.baseMVA = 100;\n"
           "mpc.bus = [\n"
           "1 3 0 0 0 0 1 1 0 100 1 1.1 0.9;\n"
           "2 1 0 0 0 0 1 1 0 100 1 1.1 0.9;\n"
           "];\n"
           "mpc.gen = [\n"
           "1 0 0 100 -100 1 100 1 100 -100;\n"
           "];\n"
           "mpc.branch = [\n"
           "1 2 0 " + std::to_string(x) + " " + std::to_string(b) + " 0 0 0 0 0 1 -360 360;\n"
           "];\n";
}

// Valid state: angles in [-a, a], PQ magnitudes in [lo, hi], fixed magnitudes at set-points.
inline pfcert::VoltageState random_state(const pfcert::Network& net, std::mt19937_64& rng, double a = 0.5,
                                         double lo = 0.9, double hi = 1.1) {
    auto v = pfcert::VoltageState::flat(net);
    std::uniform_real_distribution<double> ang(-a, a), mag(lo, hi);
    for (int i = 1; i < net.num_buses(); ++i) v.theta(i) = ang(rng);
    for (int i : net.pq) v.rho(i) = std::log(mag(rng));
    return v;
}

// Point with a singular Jacobian: bisect det J along a ray of growing angles.
// Returns the state and a unit null vector.
inline std::pair<pfcert::VoltageState, Eigen::VectorXd> singular_point(const pfcert::Network& net,
                                                                       std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dir(-1.0, 1.0), mag(0.9, 1.1);
    for (;;) {
        auto base = pfcert::VoltageState::flat(net);
        Eigen::VectorXd d(net.num_buses());
        d(0) = 0.0;
        for (int i = 1; i < net.num_buses(); ++i) d(i) = dir(rng);
        for (int i : net.pq) base.rho(i) = std::log(mag(rng));
        auto at = [&](double t) {
            auto v = base;
            v.theta = t * d;
            return v;
        };
        auto det = [&](double t) { return pfcert::jacobian_analytic(net, at(t)).determinant(); };
        double a = 0.0, fa = det(0.0);
        for (double b = 0.05; b <= 3.0; b += 0.05) {
            const double fb = det(b);
            if ((fa > 0) != (fb > 0)) {
                for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
                    const double m = 0.5 * (a + b);
                    if ((det(m) > 0) == (fa > 0)) a = m;
                    else b = m;
                }
                const auto v = at(0.5 * (a + b));
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(pfcert::jacobian_analytic(net, v), Eigen::ComputeFullV);
                return {v, svd.matrixV().col(svd.matrixV().cols() - 1)};
            }
            a = b;
            fa = fb;
        }
    }
}

// Limits loose enough for sampled points: PQ band [0.5, 1.5], nothing else.
inline pfcert::OperationalLimits wide_limits(const pfcert::Network& net) {
    auto l = pfcert::OperationalLimits::from_network(net);
    for (auto& q : l.q_min) q = -pfcert::kInf;
    for (auto& q : l.q_max) q = pfcert::kInf;
    for (auto& f : l.flow_max) f = pfcert::kInf;
    l.p0_min = -pfcert::kInf;
    l.p0_max = pfcert::kInf;
    for (int i : net.pq) {
        l.v_min[i] = 0.5;
        l.v_max[i] = 1.5;
    }
    return l;
}

// Random valid state with |V_from - V_to| = f on `branch`, or nullopt when the magnitudes do not allow it.
inline std::optional<pfcert::VoltageState> active_flow_point(const pfcert::Network& net, int branch, double f,
                                                             std::mt19937_64& rng) {
    auto v = random_state(net, rng);
    const auto& br = net.branches[branch];
    const double a = std::exp(v.rho(br.from)), b = std::exp(v.rho(br.to));
    const double c = (a * a + b * b - f * f) / (2 * a * b);
    if (std::abs(c) > 1.0) return std::nullopt;
    const double sign = std::uniform_real_distribution<double>(0, 1)(rng) < 0.5 ? -1.0 : 1.0;
    if (br.to != 0) v.theta(br.to) = v.theta(br.from) + sign * std::acos(c);
    else v.theta(br.from) = v.theta(br.to) + sign * std::acos(c);
    return v;
}

}  // namespace testutil
