#include "pfcert/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <stdexcept>

#include "parallel.hpp"

namespace pfcert {

int MapSpec::cells() const {
    int n = axes.empty() ? 0 : 1;
    for (int r : resolution) n *= std::max(0, r);
    return n;
}

std::string_view to_string(CellVerdict v) {
    switch (v) {
        case CellVerdict::StrictlyFeasible: return "strictly-feasible";
        case CellVerdict::NoSolution: return "no-solution";
        case CellVerdict::ConstraintViolating: return "constraint-violating";
    }
    return "no-solution";
}

Injection FeasibilityMap::injection(const MapCell& c) const {
    Injection s = spec.base;
    for (std::size_t a = 0; a < spec.axes.size(); ++a) s(spec.axes[a]) = c.coords[a];
    return s;
}

int FeasibilityMap::count(CellVerdict v) const {
    return static_cast<int>(std::count_if(cells.begin(), cells.end(), [&](const MapCell& c) { return c.verdict == v; }));
}

namespace {

void validate(const Network& net, const MapSpec& spec) {
    const std::size_t na = spec.axes.size();
    if (na > 2) throw std::invalid_argument("a map covers at most two coordinates");
    if (spec.lo.size() != na || spec.hi.size() != na || spec.resolution.size() != na)
        throw std::invalid_argument("map ranges do not match the axes");
    if (spec.base.size() != net.k()) throw std::invalid_argument("map base point has the wrong dimension");
    for (std::size_t a = 0; a < na; ++a)
        if (spec.axes[a] < 0 || spec.axes[a] >= net.k()) throw std::invalid_argument("map axis out of range");
}

double coordinate(const MapSpec& spec, int a, int i) {
    const int r = spec.resolution[a];
    if (r == 1) return 0.5 * (spec.lo[a] + spec.hi[a]);
    return spec.lo[a] + (spec.hi[a] - spec.lo[a]) * i / (r - 1);
}

struct Attempt {
    const Network& net;
    const OperationalLimits& lims;

    // Keeps the solution with the largest minimum slack.
    void operator()(MapCell& cell, const Injection& s, const VoltageState& start) const {
        const auto nr = newton_solve(net, s, start);
        if (!nr.converged()) return;
        const Eigen::VectorXd sl = eval_operational(net, lims, nr.state);
        const double m = sl.size() ? sl.minCoeff() : kInf;
        if (!cell.state || m > cell.min_slack) {
            cell.min_slack = m;
            cell.state = nr.state;
            cell.verdict = m > 0.0 ? CellVerdict::StrictlyFeasible : CellVerdict::ConstraintViolating;
        }
    }
};

}  // namespace

FeasibilityMap map_feasible_set(const Network& net, const OperationalLimits& lims, const MapSpec& spec,
                                const MapOptions& opts) {
    validate(net, spec);
    FeasibilityMap map;
    map.spec = spec;
    const int total = spec.cells();
    if (total == 0) return map;
    const int nx = spec.resolution[0];
    const int ny = spec.axes.size() > 1 ? spec.resolution[1] : 1;
    map.cells.resize(total);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            auto& c = map.cells[ix + nx * iy];
            c.coords.push_back(coordinate(spec, 0, ix));
            if (spec.axes.size() > 1) c.coords.push_back(coordinate(spec, 1, iy));
        }

    const Attempt attempt{net, lims};
    const VoltageState flat = VoltageState::flat(net);
    auto done = [](const MapCell& c) { return c.verdict == CellVerdict::StrictlyFeasible; };

    // Sweep anti-diagonals; each cell only reads neighbours on the previous diagonal.
    auto sweep = [&](bool forward) {
        for (int w = 0; w <= nx + ny - 2; ++w) {
            std::vector<int> wave;
            for (int ix = std::max(0, w - ny + 1); ix <= std::min(nx - 1, w); ++ix) {
                const int iy = w - ix;
                wave.push_back(forward ? ix + nx * iy : (nx - 1 - ix) + nx * (ny - 1 - iy));
            }
            detail::parallel_for(static_cast<int>(wave.size()), opts.jobs, [&](int j) {
                const int idx = wave[j];
                auto& cell = map.cells[idx];
                if (done(cell)) return;
                const int ix = idx % nx;
                const int iy = idx / nx;
                const Injection s = map.injection(cell);
                if (forward && !cell.state) attempt(cell, s, flat);
                const int dx = forward ? -1 : 1;
                const int jx = ix + dx;
                const int jy = iy + dx;
                if (jx >= 0 && jx < nx && map.cells[jx + nx * iy].state && !done(cell))
                    attempt(cell, s, *map.cells[jx + nx * iy].state);
                if (jy >= 0 && jy < ny && map.cells[ix + nx * jy].state && !done(cell))
                    attempt(cell, s, *map.cells[ix + nx * jy].state);
            });
        }
    };
    sweep(true);
    sweep(false);

    detail::parallel_for(total, opts.jobs, [&](int idx) {
        auto& cell = map.cells[idx];
        if (done(cell)) return;
        std::mt19937_64 rng(opts.seed * 1000003ULL + static_cast<std::uint64_t>(idx));
        std::uniform_real_distribution<double> ang(-opts.angle, opts.angle);
        std::uniform_real_distribution<double> mag(opts.v_lo, opts.v_hi);
        const Injection s = map.injection(cell);
        for (int r = 0; r < opts.random_starts && !done(cell); ++r) {
            VoltageState v = flat;
            for (int b = 1; b < net.num_buses(); ++b) v.theta(b) = ang(rng);
            for (int b : net.pq) v.rho(b) = std::log(mag(rng));
            attempt(cell, s, v);
        }
    });
    return map;
}

Containment check_containment(const FeasibilityMap& map, const RegionSpec& region, double tol) {
    Containment out;
    for (std::size_t i = 0; i < map.cells.size(); ++i) {
        const auto& c = map.cells[i];
        Injection s = region.center;
        for (std::size_t a = 0; a < map.spec.axes.size(); ++a) s(map.spec.axes[a]) = c.coords[a];
        if (!region.contains(s, tol)) continue;
        ++out.cells_inside;
        if (c.verdict != CellVerdict::StrictlyFeasible) out.violated.push_back(static_cast<int>(i));
    }
    out.contained = out.violated.empty();
    return out;
}

void write_csv(std::ostream& os, const FeasibilityMap& map) {
    os << "x,y,verdict,min_slack\n";
    os << std::setprecision(12);
    for (const auto& c : map.cells) {
        os << c.coords[0] << ',';
        if (c.coords.size() > 1) os << c.coords[1];
        os << ',' << to_string(c.verdict) << ',';
        if (c.state) os << c.min_slack;
        os << '\n';
    }
}

}  // namespace pfcert
