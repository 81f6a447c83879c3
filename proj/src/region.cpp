#include "pfcert/region.hpp"

#include <stdexcept>

namespace pfcert {

RegionSpec RegionSpec::box(Eigen::VectorXd center, Eigen::VectorXd half_widths, double delta) {
    RegionSpec r;
    r.kind = Kind::Box;
    r.center = std::move(center);
    r.half_widths = std::move(half_widths);
    r.delta = delta;
    r.validate();
    return r;
}

RegionSpec RegionSpec::ellipsoid(Eigen::VectorXd center, Eigen::MatrixXd shape, double delta) {
    RegionSpec r;
    r.kind = Kind::Ellipsoid;
    r.center = std::move(center);
    r.shape = std::move(shape);
    r.delta = delta;
    r.validate();
    return r;
}

RegionSpec RegionSpec::scaled(double new_delta) const {
    RegionSpec r = *this;
    r.delta = new_delta;
    return r;
}

bool RegionSpec::contains(const Eigen::VectorXd& s, double tol) const {
    const Eigen::VectorXd d = s - center;
    if (kind == Kind::Box) {
        for (Eigen::Index i = 0; i < d.size(); ++i)
            if (std::abs(d(i)) > delta * half_widths(i) + tol) return false;
        return true;
    }
    return d.dot(shape * d) <= delta * delta + tol;
}

void RegionSpec::validate() const {
    if (!(delta >= 0.0)) throw std::invalid_argument("region radius must be non-negative");
    if (kind == Kind::Box) {
        if (half_widths.size() != center.size()) throw std::invalid_argument("box widths do not match the center");
        if ((half_widths.array() < 0.0).any()) throw std::invalid_argument("box widths must be non-negative");
        return;
    }
    if (shape.rows() != center.size() || shape.cols() != center.size())
        throw std::invalid_argument("ellipsoid shape does not match the center");
    if ((shape - shape.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + shape.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("ellipsoid shape must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(shape);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("ellipsoid shape must be positive definite");
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const RegionSpec& r) {
    nlohmann::json j;
    j["kind"] = r.kind == RegionSpec::Kind::Box ? "box" : "ellipsoid";
    j["center"] = vec_json(r.center);
    j["delta"] = r.delta;
    if (r.kind == RegionSpec::Kind::Box) {
        j["half_widths"] = vec_json(r.half_widths);
    } else {
        auto rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < r.shape.rows(); ++i) rows.push_back(vec_json(r.shape.row(i).transpose()));
        j["shape"] = rows;
    }
    return j;
}

RegionSpec region_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    Eigen::VectorXd center = json_vec(j.at("center"));
    const double delta = j.at("delta").get<double>();
    if (kind == "box") return RegionSpec::box(center, json_vec(j.at("half_widths")), delta);
    if (kind != "ellipsoid") throw std::invalid_argument("unknown region kind '" + kind + "'");
    const auto& rows = j.at("shape");
    Eigen::MatrixXd q(rows.size(), center.size());
    for (std::size_t i = 0; i < rows.size(); ++i) q.row(static_cast<Eigen::Index>(i)) = json_vec(rows[i]).transpose();
    return RegionSpec::ellipsoid(center, q, delta);
}

}  // namespace pfcert
