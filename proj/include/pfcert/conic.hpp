#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pfcert/moment.hpp"

namespace pfcert {

struct ConicOptions {
    double feas_tol = 1e-7;  // equality residual and eigenvalue floor for a Feasible verdict
    double eps_res = 1e-7;   // certificate residual bound (after normalizing b'mu = 1)
    double eps_psd = 1e-8;   // certificate eigenvalue floor (after normalizing)
    int max_iter = 120;
    bool verbose = false;

    /// Defaults, with max_iter overridden by PFCERT_MAX_ITER when set.
    static ConicOptions from_env();
};

/// Farkas-type proof that E y = e, A_k(y) >= 0 has no solution:
/// E' mu + sum_k A_k^*(Z_k) = 0, Z_k >= 0, e' mu > 0.
struct InfeasCertificate {
    Eigen::VectorXd mu;
    std::vector<Eigen::MatrixXd> z;
    double gap = 0.0;       // e' mu
    double residual = 0.0;  // ||E' mu + sum A_k^*(Z_k)||_inf
    double min_eig = 0.0;   // smallest eigenvalue over all Z_k
};

struct CertificateCheck {
    bool shapes_ok = false;
    double gap = 0.0;
    double residual = 0.0;  // divided by gap
    double min_eig = 0.0;   // divided by gap
};

/// Residuals of a certificate, normalized so that the gap is one.
CertificateCheck check_certificate(const MomentProblem& prob, const InfeasCertificate& cert);
/// True iff gap > 0, every Z_k has min eigenvalue >= -eps_psd and the residual is <= eps_res,
/// all measured after scaling the certificate to unit gap.
bool verify_certificate(const MomentProblem& prob, const InfeasCertificate& cert, double eps_psd = 1e-8,
                        double eps_res = 1e-7);

enum class ConicStatus { Feasible, Infeasible, Unknown };
std::string_view to_string(ConicStatus s);

struct ConicResult {
    ConicStatus status = ConicStatus::Unknown;
    Eigen::VectorXd y;  // feasible point, or the last iterate
    double eq_residual = 0.0;
    double min_eig = 0.0;
    std::optional<InfeasCertificate> certificate;
    int iterations = 0;
    double margin = 0.0;  // phase-1 value: largest t with every block >= t I
    std::string message;
};

/// Decide feasibility of a moment problem. Feasible only with a point meeting feas_tol,
/// Infeasible only with a certificate that passes verify_certificate.
ConicResult solve_feasibility(const MomentProblem& prob, const ConicOptions& opts = {});

nlohmann::json to_json(const InfeasCertificate& cert);
InfeasCertificate certificate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConicResult& r, bool include_point = false);

/// External solver adapter: read a status file produced by another solver for `prob`
/// ({"status": "feasible", "y": [...]} or {"status": "infeasible", "certificate": {...}})
/// and re-check it with the same acceptance rules as solve_feasibility.
ConicResult import_external_result(const MomentProblem& prob, const nlohmann::json& status,
                                   const ConicOptions& opts = {});

inline constexpr const char* kCertificateSchema = "pfcert.certificate/1";

}  // namespace pfcert
