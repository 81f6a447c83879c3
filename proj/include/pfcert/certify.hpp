#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pfcert/acpf.hpp"
#include "pfcert/conic.hpp"
#include "pfcert/moment.hpp"
#include "pfcert/netmodel.hpp"
#include "pfcert/region.hpp"

namespace pfcert {

/// A documented precondition of a certification routine does not hold.
class PreconditionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct CertifyOptions {
    double tol_gamma = 1e-3;
    double tol_delta = 1e-3;
    int jobs = 1;
    ConicOptions conic;
    /// Minimum H^op slack over the Monte-Carlo check before a region counts as certified.
    double strict_margin = 1e-6;
    int mc_samples = 500;
    std::uint64_t seed = 1;
    /// Tolerance for accepting an extracted counterexample.
    double counterexample_tol = 1e-6;
};

/// Outcome of the singular-Jacobian relaxation at one gamma.
struct JacobianCheck {
    double gamma = 0.0;
    ConicStatus status = ConicStatus::Unknown;
    double margin = 0.0;
    int iterations = 0;
    int moments = 0;
    std::optional<InfeasCertificate> certificate;
    std::string message;

    bool certified() const { return status == ConicStatus::Infeasible; }
};

/// Relaxation whose infeasibility certifies a nonsingular Jacobian at lims.gamma.
MomentProblem jacobian_relaxation(const Network& net, const OperationalLimits& lims);
/// Relaxation of the tightness system for constraint `index` of lims.constraints(net).
MomentProblem constraint_relaxation(const Network& net, const OperationalLimits& lims, const RegionSpec& region,
                                    int index);

JacobianCheck check_jacobian(const Network& net, const OperationalLimits& lims, const CertifyOptions& opts = {});

struct GammaSearch {
    double gamma_star = 0.0;  // largest tested gamma with a verified certificate
    double bracket_hi = 0.0;  // smallest tested gamma without one
    std::vector<JacobianCheck> trials;
    JacobianCheck at_star;
};

/// Bisection on gamma in [gamma_lo, gamma_hi]. Unknown counts as not certified.
/// Throws PreconditionError when gamma_lo itself is not certified.
GammaSearch maximize_gamma(const Network& net, const OperationalLimits& lims, double gamma_lo, double gamma_hi,
                           const CertifyOptions& opts = {});

/// A point (V, s) feasible for the tightness system of one constraint.
struct Counterexample {
    Eigen::VectorXcd v;
    Injection s;
    double equality_residual = 0.0;
    double inequality_violation = 0.0;
    double rank_ratio = 0.0;
    bool genuine = false;  // both residuals within tolerance after refinement
};

enum class Verdict { CertifiedInfeasible, Counterexample, Unknown };
std::string_view to_string(Verdict v);

struct ConstraintVerdict {
    int index = -1;
    std::string label;
    Verdict verdict = Verdict::Unknown;
    double margin = 0.0;
    int iterations = 0;
    int moments = 0;
    std::optional<InfeasCertificate> certificate;
    std::optional<Counterexample> counterexample;
    std::string message;
};

struct MonteCarloReport {
    int samples = 0;
    int solved = 0;
    int strictly_feasible = 0;  // solved with every slack >= margin
    double min_slack = kInf;
    std::optional<Injection> worst;  // sample with the smallest slack or a failed solve
    std::string worst_reason;

    bool vacuous() const { return samples == 0; }
    bool passed() const { return strictly_feasible == samples; }
};

enum class Outcome { Certified, NotCertified, Unknown };
std::string_view to_string(Outcome o);

struct CertResult {
    double gamma = 0.0;
    std::optional<double> gamma_star;
    std::optional<double> delta_star;
    RegionSpec region;
    Outcome outcome = Outcome::Unknown;
    JacobianCheck jacobian;
    std::vector<ConstraintVerdict> constraints;
    std::optional<MonteCarloReport> monte_carlo;
    std::string message;

    bool certified() const { return outcome == Outcome::Certified; }
    /// First constraint (by index) whose relaxation was not infeasible, or -1.
    int first_failing() const;
};

/// Voltages solving F(V) = s0 from a flat start, checked for strict feasibility.
/// Throws PreconditionError when s0 has no strictly feasible solution.
VoltageState center_solution(const Network& net, const OperationalLimits& lims, const Injection& s0);

/// Certify that every s in `region` is strictly feasible. `jacobian` may carry a
/// result already computed at lims.gamma; otherwise it is solved here.
CertResult certify_region(const Network& net, const OperationalLimits& lims, const RegionSpec& region,
                          const CertifyOptions& opts = {}, const std::optional<JacobianCheck>& jacobian = {});

struct DeltaSearch {
    double delta_star = 0.0;
    CertResult at_star;
    std::optional<CertResult> above;  // result at the smallest failing delta
    std::vector<std::pair<double, Outcome>> trials;
};

/// Bisection on the region scale in (0, delta_hi]. Throws PreconditionError when
/// the region is not certified even at delta = tol_delta.
DeltaSearch maximize_delta(const Network& net, const OperationalLimits& lims, const RegionSpec& templ,
                           double delta_hi, const CertifyOptions& opts = {},
                           const std::optional<JacobianCheck>& jacobian = {});

/// Uniform samples of s in the region solved by continuation from the center.
MonteCarloReport monte_carlo_check(const Network& net, const OperationalLimits& lims, const RegionSpec& region,
                                   const VoltageState& v0, int samples, std::uint64_t seed, double margin);

struct BoxFit {
    Injection center;
    Eigen::VectorXd half_widths;
    Eigen::MatrixXd samples;  // accepted injections, one per column
    int drawn = 0;

    /// Inverse sample covariance scaled to unit determinant.
    Eigen::MatrixXd ellipsoid_shape() const;
};

struct SamplingBox {
    double angle = 0.5;   // |theta_i| <= angle on non-slack buses
    double v_lo = 0.9;    // PQ magnitude range used when a limit is infinite
    double v_hi = 1.1;
    /// When set, angles and PQ magnitudes are drawn around this state instead:
    /// theta_i +- angle and |V_i| +- v_spread.
    std::optional<VoltageState> base;
    double v_spread = 0.05;
};

/// Sample voltage profiles, keep those meeting H^op, map through F and fit a box.
/// Throws PreconditionError when no sample is accepted.
BoxFit fit_box_heuristic(const Network& net, const OperationalLimits& lims, int n_samples, std::uint64_t seed,
                         const SamplingBox& box = {});

struct OdeOptions {
    double t_end = 5.0;
    std::vector<double> checkpoints{1.0, 2.0, 3.0, 4.0, 5.0};
    double rtol = 1e-10;
    double atol = 1e-12;
    bool corrector = true;
    double sigma_abort = 1e-8;
};

struct OdeCheckpoint {
    double t = 0.0;
    double residual = 0.0;  // ||F(V(t)) - s||
    double expected = 0.0;  // e^{-t} ||F(V0) - s||
    double rel_error = 0.0;
};

struct OdeReport {
    std::vector<OdeCheckpoint> checkpoints;
    double min_sigma = kInf;  // smallest Jacobian singular value on the path
    double min_slack = kInf;  // smallest H^op slack on the path
    int steps = 0;
    bool aborted = false;
    double abort_time = 0.0;
    std::string message;
    VoltageState final_state;

    double max_rel_error() const;
};

/// Integrate dx/dt = J(x)^{-1} (s - F(x)) from V0, where F(V0) = s0.
OdeReport ode_validate(const Network& net, const OperationalLimits& lims, const VoltageState& v0, const Injection& s,
                       const OdeOptions& opts = {});

nlohmann::json to_json(const JacobianCheck& j);
nlohmann::json to_json(const GammaSearch& g);
nlohmann::json to_json(const ConstraintVerdict& c);
nlohmann::json to_json(const MonteCarloReport& m);
nlohmann::json to_json(const CertResult& r);
nlohmann::json to_json(const DeltaSearch& d);
nlohmann::json to_json(const OdeReport& o);

inline constexpr const char* kCertResultSchema = "pfcert.certresult/1";

}  // namespace pfcert
