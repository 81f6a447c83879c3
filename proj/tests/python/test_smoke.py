import math
import os
from pathlib import Path

import numpy as np
import pytest

import pfcert

DATA = Path(os.environ.get("PFCERT_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


@pytest.fixture(scope="module")
def case3():
    return pfcert.load_case(str(DATA / "case3.m"))


def test_load_and_admittance(case3):
    assert case3.num_buses == 3
    assert case3.k == 2
    y = case3.Y
    assert y.shape == (3, 3)
    assert np.allclose(y, y.T)


def test_newton_and_jacobian(case3):
    ok, state, res = pfcert.newton_solve(case3, np.array([0.3, -0.2]))
    assert ok and res < 1e-8
    assert np.allclose(pfcert.evaluate_F(case3, state), [0.3, -0.2], atol=1e-8)
    assert pfcert.jacobian(case3, state).shape == (2, 2)


def test_bad_input():
    with pytest.raises(ValueError):
        pfcert.load_case("/nonexistent/case.m")


def test_certify_small_box(case3):
    lims = pfcert.OperationalLimits.from_network(case3, 0.4)
    region = pfcert.RegionSpec.box(np.zeros(2), np.ones(2), 0.3)
    r = pfcert.certify_region(case3, lims, region, mc_samples=50)
    assert r["outcome"] == "certified"
    assert r["monte_carlo"]["passed"]
    assert r["jacobian"]["status"] == "infeasible"


def test_certify_too_large_box(case3):
    lims = pfcert.OperationalLimits.from_network(case3, 0.4)
    region = pfcert.RegionSpec.box(np.zeros(2), np.ones(2), 0.8)
    r = pfcert.certify_region(case3, lims, region, mc_samples=50)
    assert r["outcome"] == "not-certified"


def test_map_and_containment(case3):
    lims = pfcert.OperationalLimits.from_network(case3, 0.4)
    coords, verdicts = pfcert.map_feasible_set(case3, lims, [0, 1], np.zeros(2), [-1.2, -1.2], [1.2, 1.2], [21, 21])
    assert len(coords) == 441
    region = pfcert.RegionSpec.box(np.zeros(2), np.ones(2), 0.48)
    inside = [v for c, v in zip(coords, verdicts) if region.contains(np.array(c))]
    assert inside and all(v == "strictly-feasible" for v in inside)


def test_run_certify_config():
    rep = pfcert.run_certify(
        {
            "case": str(DATA / "case3.m"),
            "gamma": {"search": False, "value": 0.4},
            "region": {"center": "zero", "delta": 0.2},
            "mc_samples": 20,
        }
    )
    assert rep["schema_version"] == "pfcert.report/1"
    assert rep["result"]["outcome"] == "certified"
    assert math.isclose(rep["result"]["gamma"], 0.4)


def test_limit_overrides():
    net = pfcert.load_case(str(DATA / "case6ww.m"))
    lims = pfcert.apply_limits(net, {"generator_limits": False, "voltage_band": None}, 0.4)
    assert all(label.startswith("flow") for label in lims.labels(net))
