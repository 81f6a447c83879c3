#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pfcert/acpf.hpp"
#include "pfcert/netmodel.hpp"
#include "pfcert/region.hpp"

namespace pfcert {

/// Grid over one or two injection coordinates; the remaining coordinates stay at `base`.
struct MapSpec {
    std::vector<int> axes;
    Injection base;
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<int> resolution;  // points per axis, endpoints included

    int cells() const;
};

enum class CellVerdict { StrictlyFeasible, NoSolution, ConstraintViolating };
std::string_view to_string(CellVerdict v);

struct MapCell {
    std::vector<double> coords;
    CellVerdict verdict = CellVerdict::NoSolution;
    double min_slack = -kInf;  // best over the solutions found
    std::optional<VoltageState> state;
};

struct FeasibilityMap {
    MapSpec spec;
    std::vector<MapCell> cells;  // first axis varies fastest

    Injection injection(const MapCell& c) const;
    int count(CellVerdict v) const;
};

struct MapOptions {
    int jobs = 1;
    std::uint64_t seed = 1;
    int random_starts = 8;
    double angle = 1.0;  // random starts draw |theta| <= angle
    double v_lo = 0.7;   // and PQ magnitudes in [v_lo, v_hi]
    double v_hi = 1.2;
};

/// Multi-start Newton on every grid point: flat start, continuation from solved
/// neighbours (wavefront sweeps from opposite corners), then seeded random starts.
FeasibilityMap map_feasible_set(const Network& net, const OperationalLimits& lims, const MapSpec& spec,
                                const MapOptions& opts = {});

struct Containment {
    bool contained = true;
    int cells_inside = 0;
    std::vector<int> violated;  // indices into map.cells
};

/// Grid points inside the region (axis coordinates from the cell, the rest from
/// the region center) that are not strictly feasible.
Containment check_containment(const FeasibilityMap& map, const RegionSpec& region, double tol = 1e-12);

/// CSV with columns x, y, verdict, min_slack.
void write_csv(std::ostream& os, const FeasibilityMap& map);

}  // namespace pfcert
