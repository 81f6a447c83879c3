#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "pfcert/certify.hpp"
#include "pfcert/oracle.hpp"
#include "pfcert/pipeline.hpp"

#ifndef PFCERT_VERSION
#define PFCERT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pfcert;

namespace {

enum Exit { kOk = 0, kFailure = 1, kNotCertified = 2, kUnknown = 3, kInputError = 4, kPrecondition = 5 };

std::string sha256(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), {}};
}

// Writes `j` with a trailing newline and returns the bytes written.
std::string write_json(const fs::path& p, const json& j) {
    const std::string text = j.dump(2) + "\n";
    std::ofstream(p, std::ios::binary) << text;
    return text;
}

int exit_for(Outcome o) {
    switch (o) {
        case Outcome::Certified: return kOk;
        case Outcome::NotCertified: return kNotCertified;
        case Outcome::Unknown: return kUnknown;
    }
    return kUnknown;
}

json certificate_file(const std::string& kind, double gamma, int index, const std::string& label,
                      const InfeasCertificate& c) {
    return {{"schema_version", kCertificateSchema}, {"kind", kind},   {"gamma", gamma},
            {"index", index},                       {"label", label}, {"certificate", to_json(c)}};
}

// Certificates of the final result, written next to the report and listed with their hashes.
json write_certificates(const fs::path& out, const CertResult& r) {
    fs::create_directories(out / "certificates");
    auto list = json::array();
    auto emit = [&](const std::string& name, const json& body) {
        const auto rel = fs::path("certificates") / name;
        list.push_back({{"file", rel.generic_string()}, {"sha256", sha256(write_json(out / rel, body))}});
    };
    if (r.jacobian.certificate) emit("jacobian.json", certificate_file("jacobian", r.gamma, -1, "jacobian", *r.jacobian.certificate));
    for (const auto& c : r.constraints)
        if (c.certificate)
            emit("constraint_" + std::to_string(c.index) + ".json",
                 certificate_file("constraint", r.gamma, c.index, c.label, *c.certificate));
    return list;
}

json write_jacobian_only(const fs::path& out, const JacobianCheck& jac) {
    CertResult r;
    r.gamma = jac.gamma;
    r.jacobian = jac;
    return write_certificates(out, r);
}

std::string summary(const RunReport& rep) {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "case       " << rep.config.case_path << " (" << rep.network.num_buses() << " buses)\n";
    if (rep.gamma_search) os << "gamma*     " << rep.gamma_search->gamma_star << " (next tested " << rep.gamma_search->bracket_hi << ")\n";
    if (!rep.result) return os.str();
    const auto& res = *rep.result;
    os << "gamma      " << res.gamma << "\n";
    if (rep.delta_search) os << "delta*     " << rep.delta_search->delta_star << "\n";
    else os << "delta      " << res.region.delta << "\n";
    os << "outcome    " << to_string(res.outcome) << "\n";
    os << "message    " << res.message << "\n";
    if (rep.delta_search && rep.delta_search->above) {
        const auto& a = *rep.delta_search->above;
        const int f = a.first_failing();
        os << "above      delta " << a.region.delta << ": " << a.message << "\n";
        if (f >= 0) os << "failing    " << a.constraints[f].label << "\n";
    }
    if (res.monte_carlo)
        os << "monte-carlo " << res.monte_carlo->strictly_feasible << "/" << res.monte_carlo->samples
           << " strictly feasible, min slack " << res.monte_carlo->min_slack << "\n";
    const auto& reg = res.region;
    if (reg.kind == RegionSpec::Kind::Box && res.certified()) {
        os << "\ncoordinate        lower        upper\n";
        const auto& net = rep.network;
        for (int i = 0; i < reg.dim(); ++i) {
            const bool is_p = i < static_cast<int>(net.nsb.size());
            const int bus = is_p ? net.nsb[i] : net.pq[i - net.nsb.size()];
            std::ostringstream name;
            name << (is_p ? "p" : "q") << net.external_id(bus);
            os << std::left << std::setw(12) << name.str() << std::right << std::setw(13)
               << reg.center(i) - reg.delta * reg.half_widths(i) << std::setw(13)
               << reg.center(i) + reg.delta * reg.half_widths(i) << "\n";
        }
    }
    return os.str();
}

struct CommonFlags {
    std::string config;
    std::string case_path;
    std::optional<double> gamma_floor;
    std::optional<double> gamma;
    std::string region;
    std::optional<double> delta_max;
    std::optional<double> delta;
    std::optional<double> tol;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> jobs;

    void add(CLI::App* app) {
        app->add_option("--config", config, "run configuration JSON");
        app->add_option("--case", case_path, "MATPOWER or native JSON case file");
        app->add_option("--gamma-floor", gamma_floor, "lower end of the gamma search");
        app->add_option("--gamma", gamma, "gamma used for the region instead of gamma*");
        app->add_option("--region", region, "region kind")->check(CLI::IsMember({"box", "ellipsoid"}));
        app->add_option("--delta-max", delta_max, "upper end of the delta search");
        app->add_option("--delta", delta, "certify at this scale instead of searching");
        app->add_option("--tol", tol, "bisection tolerance for gamma and delta");
        app->add_option("--seed", seed, "random seed");
        app->add_option("--out", out, "output directory");
        app->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    }

    RunConfig resolve() const {
        RunConfig c = config.empty() ? RunConfig{} : load_config(config);
        if (!case_path.empty()) c.case_path = case_path;
        if (c.case_path.empty()) throw ConfigError("no case given (use --case or a config file)");
        if (gamma_floor) c.gamma_floor = *gamma_floor;
        if (gamma) c.gamma = *gamma;
        if (region == "box") c.region.kind = RegionSpec::Kind::Box;
        if (region == "ellipsoid") c.region.kind = RegionSpec::Kind::Ellipsoid;
        if (delta_max) c.region.delta_max = *delta_max;
        if (delta) c.region.delta = *delta;
        if (tol) c.tol_gamma = c.tol_delta = *tol;
        if (seed) c.seed = *seed;
        if (!out.empty()) c.out = out;
        if (jobs) c.jobs = *jobs;
        return c;
    }
};

int cmd_certify(const CommonFlags& f) {
    const RunConfig cfg = f.resolve();
    const auto t0 = std::chrono::system_clock::now();
    const RunReport rep = run_certify(cfg);
    const auto t1 = std::chrono::system_clock::now();

    const fs::path out = cfg.out;
    fs::create_directories(out);
    json j = to_json(rep);
    j["version"] = PFCERT_VERSION;
    j["case_sha256"] = sha256(read_file(cfg.case_path));
    if (rep.result) j["certificates"] = write_certificates(out, *rep.result);
    else if (rep.gamma_search) j["certificates"] = write_jacobian_only(out, rep.gamma_search->at_star);
    write_json(out / "report.json", j);
    write_json(out / "run_info.json",
               {{"started", std::chrono::duration<double>(t0.time_since_epoch()).count()},
                {"seconds", std::chrono::duration<double>(t1 - t0).count()}});
    const std::string text = summary(rep);
    std::ofstream(out / "summary.txt") << text;
    std::cout << text;
    return exit_for(rep.outcome());
}

std::vector<double> parse_pair(const std::string& s, const char* what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
    if (v.empty() || v.size() > 2) throw ConfigError(std::string(what) + " takes one or two comma-separated numbers");
    return v;
}

int cmd_map(const CommonFlags& f, const std::string& axes_s, const std::string& lo_s, const std::string& hi_s,
            const std::string& res_s, const std::string& csv) {
    const RunConfig cfg = f.resolve();
    const Network net = load_case(cfg.case_path);
    const auto lims = apply_limits(net, cfg.limits, cfg.gamma.value_or(kInf));
    MapSpec spec;
    for (double a : parse_pair(axes_s, "--axes")) spec.axes.push_back(static_cast<int>(a));
    spec.lo = parse_pair(lo_s, "--lo");
    spec.hi = parse_pair(hi_s, "--hi");
    for (double r : parse_pair(res_s, "--resolution")) spec.resolution.push_back(static_cast<int>(r));
    auto widen = [&](auto& v) { if (v.size() == 1 && spec.axes.size() == 2) v.push_back(v[0]); };
    widen(spec.lo);
    widen(spec.hi);
    widen(spec.resolution);
    spec.base = cfg.region.center == "explicit" ? cfg.region.center_values
                : cfg.region.center == "zero"   ? Eigen::VectorXd::Zero(net.k())
                                                : nominal_injection(net);
    try {
        MapOptions mo;
        mo.jobs = cfg.jobs;
        mo.seed = cfg.seed;
        const auto map = map_feasible_set(net, lims, spec, mo);
        const fs::path path = csv.empty() ? fs::path(cfg.out) / "map.csv" : fs::path(csv);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream os(path);
        write_csv(os, map);
        std::cout << map.count(CellVerdict::StrictlyFeasible) << " of " << map.cells.size()
                  << " cells strictly feasible -> " << path.string() << "\n";
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return kOk;
}

struct Loaded {
    json report;
    RunConfig cfg;
    Network net;
    OperationalLimits lims;
    RegionSpec region;
};

Loaded load_report(const fs::path& path) {
    Loaded l;
    try {
        l.report = json::parse(read_file(path));
        l.cfg = config_from_json(l.report.at("config"));
        l.net = load_case(l.cfg.case_path);
        const auto& res = l.report.at("result");
        const double gamma = res.is_null() ? l.report.at("gamma_search").at("gamma_star").get<double>()
                                           : res.at("gamma").get<double>();
        l.lims = apply_limits(l.net, l.cfg.limits, gamma);
        if (!res.is_null()) l.region = region_from_json(res.at("region"));
    } catch (const json::exception& e) {
        throw ConfigError("malformed report " + path.string() + ": " + e.what());
    }
    return l;
}

int cmd_validate(const std::string& report_path, int samples, int targets, std::uint64_t seed) {
    if (report_path.empty()) throw ConfigError("validate needs --report");
    const Loaded l = load_report(report_path);
    if (l.report.at("result").is_null()) throw ConfigError("report has no region to validate");
    const auto v0 = center_solution(l.net, l.lims, l.region.center);
    const auto mc = monte_carlo_check(l.net, l.lims, l.region, v0, samples, seed, 0.0);

    std::mt19937_64 rng(seed);
    auto ode = json::array();
    bool ode_ok = true;
    OdeOptions oo;
    oo.corrector = false;
    for (int t = 0; t < targets; ++t) {
        Eigen::VectorXd s = l.region.center;
        // Rejection sampling keeps targets inside either region kind.
        for (int tries = 0; tries < 1000; ++tries) {
            Eigen::VectorXd cand = l.region.center;
            for (int i = 0; i < cand.size(); ++i) {
                const double w = l.region.kind == RegionSpec::Kind::Box ? l.region.half_widths(i)
                                                                        : 1.0 / std::sqrt(l.region.shape(i, i));
                cand(i) += l.region.delta * w * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
            }
            if (l.region.contains(cand)) {
                s = cand;
                break;
            }
        }
        const auto rep = ode_validate(l.net, l.lims, v0, s, oo);
        const bool ok = !rep.aborted && rep.max_rel_error() <= 0.01 && rep.min_sigma > 1e-6 && rep.min_slack > 0.0;
        ode_ok &= ok;
        auto j = to_json(rep);
        j["passed"] = ok;
        ode.push_back(j);
    }
    const json out = {{"report", report_path}, {"seed", seed}, {"monte_carlo", to_json(mc)}, {"ode", ode}};
    std::cout << out.dump(2) << "\n";
    if (mc.vacuous()) std::cerr << "note: zero samples requested, Monte-Carlo check is vacuous\n";
    return mc.passed() && ode_ok ? kOk : kNotCertified;
}

int cmd_verify(const std::string& report_path) {
    if (report_path.empty()) throw ConfigError("verify needs --report");
    const Loaded l = load_report(report_path);
    const fs::path dir = fs::path(report_path).parent_path();
    bool all = true;
    for (const auto& entry : l.report.value("certificates", json::array())) {
        const auto file = dir / entry.at("file").get<std::string>();
        const std::string bytes = read_file(file);
        const bool hash_ok = sha256(bytes) == entry.at("sha256").get<std::string>();
        const json body = json::parse(bytes);
        OperationalLimits lims = l.lims;
        lims.gamma = body.at("gamma").get<double>();
        const bool is_jac = body.at("kind") == "jacobian";
        const auto prob = is_jac ? jacobian_relaxation(l.net, lims)
                                 : constraint_relaxation(l.net, lims, l.region, body.at("index").get<int>());
        const auto cert = certificate_from_json(body.at("certificate"));
        const auto chk = check_certificate(prob, cert);
        const bool ok = hash_ok && verify_certificate(prob, cert);
        all &= ok;
        std::cout << (ok ? "ok    " : "FAIL  ") << body.at("label").get<std::string>() << "  residual " << chk.residual
                  << "  min_eig " << chk.min_eig << (hash_ok ? "" : "  (hash mismatch)") << "\n";
    }
    return all ? kOk : kNotCertified;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Certified injection regions for AC power flow"};
    app.require_subcommand(1);
    app.set_version_flag("--version", PFCERT_VERSION);

    CommonFlags certify_flags;
    auto* certify = app.add_subcommand("certify", "search gamma, then certify or maximize a region");
    certify_flags.add(certify);

    CommonFlags map_flags;
    std::string axes = "0,1", lo = "-1.2", hi = "1.2", res = "100", csv;
    auto* map = app.add_subcommand("map", "brute-force feasibility map over one or two injections");
    map_flags.add(map);
    map->add_option("--axes", axes, "injection coordinates, e.g. 0,1");
    map->add_option("--lo", lo, "lower range per axis");
    map->add_option("--hi", hi, "upper range per axis");
    map->add_option("--resolution", res, "grid points per axis");
    map->add_option("--csv", csv, "output CSV (default <out>/map.csv)");

    std::string report;
    int samples = 500, targets = 20;
    std::uint64_t seed = 1;
    auto* validate = app.add_subcommand("validate", "Monte-Carlo and ODE checks of a certified region");
    validate->add_option("--report", report, "report.json from certify")->required();
    validate->add_option("--samples", samples, "Monte-Carlo samples");
    validate->add_option("--ode-targets", targets, "ODE targets");
    validate->add_option("--seed", seed, "random seed");

    std::string verify_report;
    auto* verify = app.add_subcommand("verify", "re-check the certificate files listed in a report");
    verify->add_option("--report", verify_report, "report.json from certify")->required();

    std::string export_case, export_out;
    auto* exp = app.add_subcommand("export", "write a case as native JSON");
    exp->add_option("--case", export_case, "case file")->required();
    exp->add_option("--out", export_out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInputError;
    }

    try {
        if (*certify) return cmd_certify(certify_flags);
        if (*map) return cmd_map(map_flags, axes, lo, hi, res, csv);
        if (*validate) return cmd_validate(report, samples, targets, seed);
        if (*verify) return cmd_verify(verify_report);
        if (*exp) {
            const std::string text = to_json(load_case(export_case)).dump(2) + "\n";
            if (export_out.empty()) std::cout << text;
            else std::ofstream(export_out) << text;
            return kOk;
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kInputError;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kInputError;
    } catch (const ConfigError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kInputError;
    } catch (const PreconditionError& e) {
        std::cerr << "precondition failed: " << e.what() << "\n";
        return kPrecondition;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kOk;
}
