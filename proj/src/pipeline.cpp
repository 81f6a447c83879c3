#include "pfcert/pipeline.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace pfcert {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items())
        if (!known.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

Eigen::VectorXd to_vector(const json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + " must be an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(what + " must be an array of numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

json from_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for '" + key + "' in " + where);
    }
}

json opt_num(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

}  // namespace

RunConfig config_from_json(const json& j) {
    RunConfig c;
    reject_unknown(j, {"schema_version", "case", "limits", "gamma", "region", "tol", "seed", "mc_samples", "jobs", "out"},
                   "config");
    if (j.contains("schema_version") && j["schema_version"] != kConfigSchema)
        throw ConfigError("unsupported config schema " + j["schema_version"].dump());
    if (j.contains("case")) c.case_path = get<std::string>(j, "case", "config");

    if (j.contains("limits")) {
        const auto& l = j["limits"];
        reject_unknown(l, {"flow_limit", "generator_limits", "voltage_band"}, "limits");
        if (l.contains("flow_limit") && !l["flow_limit"].is_null()) c.limits.flow_limit = get<double>(l, "flow_limit", "limits");
        if (l.contains("generator_limits")) c.limits.generator_limits = get<bool>(l, "generator_limits", "limits");
        if (l.contains("voltage_band")) {
            const auto& vb = l["voltage_band"];
            if (vb.is_null()) {
                c.limits.voltage_band.mode = VoltageBand::Mode::None;
            } else if (vb.is_string() && vb == "case") {
                c.limits.voltage_band.mode = VoltageBand::Mode::Case;
            } else if (vb.is_array() && vb.size() == 2 && vb[0].is_number() && vb[1].is_number()) {
                c.limits.voltage_band = {VoltageBand::Mode::Fixed, vb[0].get<double>(), vb[1].get<double>()};
            } else {
                throw ConfigError("voltage_band must be \"case\", null or [lo, hi]");
            }
        }
    }

    if (j.contains("gamma")) {
        const auto& g = j["gamma"];
        reject_unknown(g, {"floor", "max", "search", "value"}, "gamma");
        if (g.contains("floor")) c.gamma_floor = get<double>(g, "floor", "gamma");
        if (g.contains("max")) c.gamma_max = get<double>(g, "max", "gamma");
        if (g.contains("search")) c.search_gamma = get<bool>(g, "search", "gamma");
        if (g.contains("value") && !g["value"].is_null()) c.gamma = get<double>(g, "value", "gamma");
    }

    if (j.contains("region") && j["region"].is_null()) c.certify_region = false;
    if (j.contains("region") && !j["region"].is_null()) {
        const auto& r = j["region"];
        reject_unknown(r, {"kind", "center", "widths", "delta", "delta_max", "fit_samples", "fit_around", "fit_angle",
                              "fit_v_spread"}, "region");
        if (r.contains("kind")) {
            const auto k = get<std::string>(r, "kind", "region");
            if (k == "box") c.region.kind = RegionSpec::Kind::Box;
            else if (k == "ellipsoid") c.region.kind = RegionSpec::Kind::Ellipsoid;
            else throw ConfigError("region kind must be box or ellipsoid");
        }
        auto source = [&](const char* key, std::string& name, Eigen::VectorXd& values, std::set<std::string> names) {
            if (!r.contains(key)) return;
            if (r[key].is_array()) {
                name = "explicit";
                values = to_vector(r[key], key);
            } else {
                name = get<std::string>(r, key, "region");
                if (!names.contains(name)) throw ConfigError(std::string("unknown region ") + key + " source '" + name + "'");
            }
        };
        source("center", c.region.center, c.region.center_values, {"nominal", "zero", "fit"});
        source("widths", c.region.widths, c.region.width_values, {"unit", "fit"});
        if (r.contains("delta") && !r["delta"].is_null()) c.region.delta = get<double>(r, "delta", "region");
        if (r.contains("delta_max")) c.region.delta_max = get<double>(r, "delta_max", "region");
        if (r.contains("fit_samples")) c.region.fit_samples = get<int>(r, "fit_samples", "region");
        if (r.contains("fit_around")) {
            c.region.fit_around = get<std::string>(r, "fit_around", "region");
            if (c.region.fit_around != "flat" && c.region.fit_around != "nominal")
                throw ConfigError("region.fit_around must be flat or nominal");
        }
        if (r.contains("fit_angle")) c.region.fit_angle = get<double>(r, "fit_angle", "region");
        if (r.contains("fit_v_spread")) c.region.fit_v_spread = get<double>(r, "fit_v_spread", "region");
    }

    if (j.contains("tol")) {
        const auto& t = j["tol"];
        reject_unknown(t, {"gamma", "delta"}, "tol");
        if (t.contains("gamma")) c.tol_gamma = get<double>(t, "gamma", "tol");
        if (t.contains("delta")) c.tol_delta = get<double>(t, "delta", "tol");
    }
    if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", "config");
    if (j.contains("mc_samples")) c.mc_samples = get<int>(j, "mc_samples", "config");
    if (j.contains("jobs")) c.jobs = get<int>(j, "jobs", "config");
    if (j.contains("out")) c.out = get<std::string>(j, "out", "config");

    if (!(c.tol_gamma > 0.0) || !(c.tol_delta > 0.0)) throw ConfigError("tolerances must be positive");
    if (c.mc_samples < 0) throw ConfigError("mc_samples must be non-negative");
    if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
    if (c.gamma && !(*c.gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (c.region.delta && !(*c.region.delta >= 0.0)) throw ConfigError("delta must be non-negative");
    return c;
}

json to_json(const RunConfig& c) {
    json band;
    switch (c.limits.voltage_band.mode) {
        case VoltageBand::Mode::Case: band = "case"; break;
        case VoltageBand::Mode::None: band = nullptr; break;
        case VoltageBand::Mode::Fixed: band = {c.limits.voltage_band.lo, c.limits.voltage_band.hi}; break;
    }
    json region = {{"kind", c.region.kind == RegionSpec::Kind::Box ? "box" : "ellipsoid"},
                   {"delta", opt_num(c.region.delta)},
                   {"delta_max", c.region.delta_max},
                   {"fit_samples", c.region.fit_samples},
                   {"fit_around", c.region.fit_around},
                   {"fit_angle", c.region.fit_angle},
                   {"fit_v_spread", c.region.fit_v_spread}};
    region["center"] = c.region.center == "explicit" ? from_vector(c.region.center_values) : json(c.region.center);
    region["widths"] = c.region.widths == "explicit" ? from_vector(c.region.width_values) : json(c.region.widths);
    return {{"schema_version", kConfigSchema},
            {"case", c.case_path},
            {"limits",
             {{"flow_limit", opt_num(c.limits.flow_limit)},
              {"generator_limits", c.limits.generator_limits},
              {"voltage_band", band}}},
            {"gamma", {{"floor", c.gamma_floor}, {"max", c.gamma_max}, {"search", c.search_gamma}, {"value", opt_num(c.gamma)}}},
            {"region", c.certify_region ? region : json(nullptr)},
            {"tol", {{"gamma", c.tol_gamma}, {"delta", c.tol_delta}}},
            {"seed", c.seed},
            {"mc_samples", c.mc_samples},
            {"jobs", c.jobs},
            {"out", c.out}};
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

OperationalLimits apply_limits(const Network& net, const LimitOverrides& ov, double gamma) {
    auto lims = OperationalLimits::from_network(net, gamma);
    if (ov.flow_limit) std::fill(lims.flow_max.begin(), lims.flow_max.end(), *ov.flow_limit);
    if (!ov.generator_limits) {
        std::fill(lims.q_min.begin(), lims.q_min.end(), -kInf);
        std::fill(lims.q_max.begin(), lims.q_max.end(), kInf);
        lims.p0_min = -kInf;
        lims.p0_max = kInf;
    }
    for (int b : net.pq) {
        switch (ov.voltage_band.mode) {
            case VoltageBand::Mode::Case: break;
            case VoltageBand::Mode::None:
                lims.v_min[b] = 0.0;
                lims.v_max[b] = kInf;
                break;
            case VoltageBand::Mode::Fixed:
                lims.v_min[b] = ov.voltage_band.lo;
                lims.v_max[b] = ov.voltage_band.hi;
                break;
        }
    }
    lims.validate(net);
    return lims;
}

RegionSpec build_region(const Network& net, const OperationalLimits& lims, const RunConfig& cfg) {
    const auto& t = cfg.region;
    const int k = net.k();
    std::optional<BoxFit> fit;
    if (t.center == "fit" || t.widths == "fit") {
        SamplingBox sb;
        sb.angle = t.fit_angle;
        sb.v_spread = t.fit_v_spread;
        if (t.fit_around == "nominal") {
            const auto nr = newton_solve(net, nominal_injection(net), VoltageState::flat(net));
            if (!nr.converged()) throw PreconditionError("no power flow solution at the nominal injection");
            sb.base = nr.state;
        }
        fit = fit_box_heuristic(net, lims, t.fit_samples, cfg.seed, sb);
    }

    Eigen::VectorXd center;
    if (t.center == "nominal") center = nominal_injection(net);
    else if (t.center == "zero") center = Eigen::VectorXd::Zero(k);
    else if (t.center == "fit") center = fit->center;
    else center = t.center_values;
    if (center.size() != k) throw ConfigError("region center has " + std::to_string(center.size()) + " entries, expected " + std::to_string(k));

    const double delta = t.delta.value_or(1.0);
    if (t.kind == RegionSpec::Kind::Box) {
        Eigen::VectorXd w;
        if (t.widths == "unit") w = Eigen::VectorXd::Ones(k);
        else if (t.widths == "fit") w = fit->half_widths;
        else w = t.width_values;
        if (w.size() != k) throw ConfigError("region widths have the wrong dimension");
        return RegionSpec::box(center, w, delta);
    }
    Eigen::MatrixXd q;
    if (t.widths == "unit") q = Eigen::MatrixXd::Identity(k, k);
    else if (t.widths == "fit") q = fit->ellipsoid_shape();
    else {
        if (t.width_values.size() != k) throw ConfigError("region widths have the wrong dimension");
        q = t.width_values.cwiseProduct(t.width_values).cwiseInverse().asDiagonal();
    }
    return RegionSpec::ellipsoid(center, q, delta);
}

CertifyOptions certify_options(const RunConfig& cfg) {
    CertifyOptions o;
    o.tol_gamma = cfg.tol_gamma;
    o.tol_delta = cfg.tol_delta;
    o.jobs = cfg.jobs;
    o.conic = ConicOptions::from_env();
    o.mc_samples = cfg.mc_samples;
    o.seed = cfg.seed;
    return o;
}

RunReport run_certify(const RunConfig& cfg) {
    RunReport rep;
    rep.config = cfg;
    rep.network = load_case(cfg.case_path);
    const auto& net = rep.network;
    const auto opts = certify_options(cfg);
    auto lims = apply_limits(net, cfg.limits);

    if (cfg.search_gamma) rep.gamma_search = maximize_gamma(net, lims, cfg.gamma_floor, cfg.gamma_max, opts);
    if (cfg.gamma) lims.gamma = *cfg.gamma;
    else if (rep.gamma_search) lims.gamma = rep.gamma_search->gamma_star;
    else throw ConfigError("gamma.value is required when gamma.search is false");
    if (!cfg.certify_region) return rep;

    const auto region = build_region(net, lims, cfg);
    std::optional<JacobianCheck> jac;
    if (rep.gamma_search && rep.gamma_search->at_star.gamma == lims.gamma) jac = rep.gamma_search->at_star;
    if (cfg.region.delta) {
        rep.result = certify_region(net, lims, region, opts, jac);
    } else {
        rep.delta_search = maximize_delta(net, lims, region, cfg.region.delta_max, opts, jac);
        rep.result = rep.delta_search->at_star;
    }
    if (rep.gamma_search) rep.result->gamma_star = rep.gamma_search->gamma_star;
    return rep;
}

Outcome RunReport::outcome() const { return result ? result->outcome : Outcome::Certified; }

json to_json(const RunReport& r) {
    json j = {{"schema_version", kReportSchema},
              {"config", to_json(r.config)},
              {"network", {{"name", r.network.name}, {"buses", r.network.num_buses()}, {"branches", r.network.branches.size()}}},
              {"result", r.result ? to_json(*r.result) : json(nullptr)}};
    j["gamma_search"] = r.gamma_search ? to_json(*r.gamma_search) : json(nullptr);
    if (r.delta_search) {
        auto d = to_json(*r.delta_search);
        d.erase("at_star");
        j["delta_search"] = d;
    } else {
        j["delta_search"] = nullptr;
    }
    return j;
}

}  // namespace pfcert
