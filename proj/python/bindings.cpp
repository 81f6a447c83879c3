#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pfcert/certify.hpp"
#include "pfcert/oracle.hpp"
#include "pfcert/pipeline.hpp"

namespace py = pybind11;
using namespace pfcert;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

CertifyOptions options(int jobs, int mc_samples, std::uint64_t seed, double tol) {
    CertifyOptions o;
    o.jobs = jobs;
    o.mc_samples = mc_samples;
    o.seed = seed;
    o.tol_gamma = o.tol_delta = tol;
    o.conic = ConicOptions::from_env();
    return o;
}

}  // namespace

PYBIND11_MODULE(_pfcert, m) {
    m.doc() = "Certified injection regions for AC power flow";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_RuntimeError);

    py::class_<Network>(m, "Network")
        .def_property_readonly("name", [](const Network& n) { return n.name; })
        .def_property_readonly("num_buses", &Network::num_buses)
        .def_property_readonly("k", &Network::k)
        .def_property_readonly("pv", [](const Network& n) { return n.pv; })
        .def_property_readonly("pq", [](const Network& n) { return n.pq; })
        .def_property_readonly("Y", [](const Network& n) { return n.Y; })
        .def("external_id", &Network::external_id)
        .def("to_json", [](const Network& n) { return to_py(to_json(n)); });

    py::class_<VoltageState>(m, "VoltageState")
        .def(py::init<>())
        .def_readwrite("theta", &VoltageState::theta)
        .def_readwrite("rho", &VoltageState::rho)
        .def("rect", &VoltageState::rect)
        .def_static("flat", &VoltageState::flat)
        .def_static("from_rect", &VoltageState::from_rect);

    py::class_<OperationalLimits>(m, "OperationalLimits")
        .def_readwrite("v_min", &OperationalLimits::v_min)
        .def_readwrite("v_max", &OperationalLimits::v_max)
        .def_readwrite("flow_max", &OperationalLimits::flow_max)
        .def_readwrite("q_min", &OperationalLimits::q_min)
        .def_readwrite("q_max", &OperationalLimits::q_max)
        .def_readwrite("p0_min", &OperationalLimits::p0_min)
        .def_readwrite("p0_max", &OperationalLimits::p0_max)
        .def_readwrite("gamma", &OperationalLimits::gamma)
        .def_static("from_network", &OperationalLimits::from_network, py::arg("net"), py::arg("gamma") = kInf)
        .def("labels", [](const OperationalLimits& l, const Network& n) {
            std::vector<std::string> out;
            for (const auto& c : l.constraints(n)) out.push_back(c.label);
            return out;
        });

    py::class_<RegionSpec>(m, "RegionSpec")
        .def_static("box", &RegionSpec::box, py::arg("center"), py::arg("half_widths"), py::arg("delta"))
        .def_static("ellipsoid", &RegionSpec::ellipsoid, py::arg("center"), py::arg("shape"), py::arg("delta"))
        .def_readonly("center", &RegionSpec::center)
        .def_readonly("delta", &RegionSpec::delta)
        .def("scaled", &RegionSpec::scaled)
        .def("contains", &RegionSpec::contains, py::arg("s"), py::arg("tol") = 0.0)
        .def("to_json", [](const RegionSpec& r) { return to_py(to_json(r)); });

    m.def("load_case", &load_case, py::arg("path"), py::arg("default_flow_limit") = kInf);
    m.def("parse_case", [](const std::string& text) { return parse_case(text); });
    m.def(
        "apply_limits",
        [](const Network& net, const py::object& overrides, double gamma) {
            auto cfg = config_from_json({{"limits", from_py(overrides)}});
            return apply_limits(net, cfg.limits, gamma);
        },
        py::arg("net"), py::arg("overrides") = py::dict(), py::arg("gamma") = kInf);
    m.def("nominal_injection", &nominal_injection);
    m.def("evaluate_F", &evaluate_F);
    m.def("jacobian", &jacobian_analytic);
    m.def(
        "newton_solve",
        [](const Network& net, const Injection& s, const std::optional<VoltageState>& start) {
            const auto r = newton_solve(net, s, start.value_or(VoltageState::flat(net)));
            return py::make_tuple(r.converged(), r.state, r.residual);
        },
        py::arg("net"), py::arg("s"), py::arg("start") = py::none());
    m.def("slacks", &eval_operational);

    m.def(
        "check_jacobian",
        [](const Network& net, const OperationalLimits& lims) { return to_py(to_json(check_jacobian(net, lims))); },
        py::arg("net"), py::arg("lims"));
    m.def(
        "maximize_gamma",
        [](const Network& net, const OperationalLimits& lims, double lo, double hi, double tol) {
            return to_py(to_json(maximize_gamma(net, lims, lo, hi, options(1, 0, 1, tol))));
        },
        py::arg("net"), py::arg("lims"), py::arg("gamma_lo"), py::arg("gamma_hi"), py::arg("tol") = 1e-3);
    m.def(
        "certify_region",
        [](const Network& net, const OperationalLimits& lims, const RegionSpec& region, int jobs, int mc_samples,
           std::uint64_t seed) { return to_py(to_json(certify_region(net, lims, region, options(jobs, mc_samples, seed, 1e-3)))); },
        py::arg("net"), py::arg("lims"), py::arg("region"), py::arg("jobs") = 1, py::arg("mc_samples") = 500,
        py::arg("seed") = 1);
    m.def(
        "maximize_delta",
        [](const Network& net, const OperationalLimits& lims, const RegionSpec& templ, double delta_hi, double tol,
           int jobs, int mc_samples, std::uint64_t seed) {
            return to_py(to_json(maximize_delta(net, lims, templ, delta_hi, options(jobs, mc_samples, seed, tol))));
        },
        py::arg("net"), py::arg("lims"), py::arg("template"), py::arg("delta_hi"), py::arg("tol") = 1e-3,
        py::arg("jobs") = 1, py::arg("mc_samples") = 500, py::arg("seed") = 1);
    m.def(
        "map_feasible_set",
        [](const Network& net, const OperationalLimits& lims, const std::vector<int>& axes, const Injection& base,
           const std::vector<double>& lo, const std::vector<double>& hi, const std::vector<int>& resolution, int jobs,
           std::uint64_t seed) {
            MapOptions mo;
            mo.jobs = jobs;
            mo.seed = seed;
            const auto map = map_feasible_set(net, lims, {axes, base, lo, hi, resolution}, mo);
            std::vector<std::vector<double>> coords;
            std::vector<std::string> verdicts;
            for (const auto& c : map.cells) {
                coords.push_back(c.coords);
                verdicts.emplace_back(to_string(c.verdict));
            }
            return py::make_tuple(coords, verdicts);
        },
        py::arg("net"), py::arg("lims"), py::arg("axes"), py::arg("base"), py::arg("lo"), py::arg("hi"),
        py::arg("resolution"), py::arg("jobs") = 1, py::arg("seed") = 1);
    m.def("run_certify", [](const py::object& config) {
        return to_py(to_json(run_certify(config_from_json(from_py(config)))));
    });
}
