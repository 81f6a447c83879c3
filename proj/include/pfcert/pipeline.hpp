#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pfcert/certify.hpp"
#include "pfcert/netmodel.hpp"
#include "pfcert/region.hpp"

namespace pfcert {

/// Thrown for malformed or inconsistent run configurations.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// PQ voltage band used in place of the case values.
struct VoltageBand {
    enum class Mode { Case, None, Fixed };
    Mode mode = Mode::Case;
    double lo = 0.0;
    double hi = kInf;
};

struct LimitOverrides {
    std::optional<double> flow_limit;  // uniform |V_i - V_j| bound on every branch
    bool generator_limits = true;      // false drops PV/slack reactive and slack active limits
    VoltageBand voltage_band;
};

struct RegionTemplate {
    RegionSpec::Kind kind = RegionSpec::Kind::Box;
    std::string center = "nominal";  // nominal | zero | fit | explicit
    Eigen::VectorXd center_values;
    std::string widths = "unit";  // unit | fit | explicit; for ellipsoids unit means Q = I
    Eigen::VectorXd width_values;
    std::optional<double> delta;  // certify at this scale instead of searching
    double delta_max = 1.0;
    int fit_samples = 2000;
    std::string fit_around = "flat";  // flat | nominal (the power flow solution at the nominal injection)
    double fit_angle = 0.5;
    double fit_v_spread = 0.05;  // only with fit_around = nominal
};

struct RunConfig {
    std::string case_path;
    LimitOverrides limits;
    double gamma_floor = 0.1;
    double gamma_max = 2.0;
    bool search_gamma = true;
    std::optional<double> gamma;  // gamma used for the region; defaults to the searched gamma*
    bool certify_region = true;  // false runs the gamma search only
    RegionTemplate region;
    double tol_gamma = 1e-3;
    double tol_delta = 1e-3;
    std::uint64_t seed = 1;
    int mc_samples = 500;
    int jobs = 1;
    std::string out = "out";
};

/// Missing keys keep their defaults; unknown keys raise ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_config(const std::string& path);

/// Case limits with the overrides applied and gamma set.
OperationalLimits apply_limits(const Network& net, const LimitOverrides& ov, double gamma = kInf);

/// Region at scale 1 (or the fixed delta) built from the template.
RegionSpec build_region(const Network& net, const OperationalLimits& lims, const RunConfig& cfg);

CertifyOptions certify_options(const RunConfig& cfg);

struct RunReport {
    RunConfig config;
    Network network;
    std::optional<GammaSearch> gamma_search;
    std::optional<DeltaSearch> delta_search;
    std::optional<CertResult> result;  // final region verdict, absent for gamma-only runs

    /// Region outcome, or Certified when a gamma-only run found gamma*.
    Outcome outcome() const;
};

/// Full pipeline: optional gamma search, then a fixed-delta certification or a delta search.
/// Throws PreconditionError when the gamma floor or the region center fails.
RunReport run_certify(const RunConfig& cfg);

nlohmann::json to_json(const RunReport& r);

inline constexpr const char* kReportSchema = "pfcert.report/1";
inline constexpr const char* kConfigSchema = "pfcert.config/1";

}  // namespace pfcert
