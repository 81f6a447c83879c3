#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace pfcert {

/// Injection-space region around a center s0.
/// Box: s0 - delta*w <= s <= s0 + delta*w. Ellipsoid: (s - s0)' Q (s - s0) <= delta^2.
struct RegionSpec {
    enum class Kind { Box, Ellipsoid };

    Kind kind = Kind::Box;
    Eigen::VectorXd center;
    Eigen::VectorXd half_widths;  // box only; zero entries pin a coordinate
    Eigen::MatrixXd shape;        // ellipsoid only
    double delta = 0.0;

    static RegionSpec box(Eigen::VectorXd center, Eigen::VectorXd half_widths, double delta);
    static RegionSpec ellipsoid(Eigen::VectorXd center, Eigen::MatrixXd shape, double delta);

    int dim() const { return static_cast<int>(center.size()); }
    RegionSpec scaled(double new_delta) const;
    bool contains(const Eigen::VectorXd& s, double tol = 0.0) const;
    /// Throws std::invalid_argument on shape mismatch, negative widths or a non-PD shape matrix.
    void validate() const;
};

nlohmann::json to_json(const RegionSpec& r);
RegionSpec region_from_json(const nlohmann::json& j);

}  // namespace pfcert
