import numpy as np
import pytest

from flexweld.core_geom import ArcSet, TWO_PI
from flexweld.logcap import capacity
from flexweld.slitmap import (SlitMapConfig, arcs_in_intervals, build_E, disk_sandwich,
                              interior_deviation, potential_jump, robin_target, sector_quads,
                              slit_map)


@pytest.fixture(scope="module")
def domain16():
    N, A = 16, 20.0
    return slit_map(build_E(N, A), SlitMapConfig(N, A, N, 0.5 / N))


def test_build_E_hits_robin_target():
    N, A = 16, 20.0
    E = build_E(N, A)
    assert len(E) == N
    assert capacity(E).robin == pytest.approx(robin_target(N, A), rel=1e-5)


def test_config_validation():
    with pytest.raises(ValueError):
        SlitMapConfig(4, 10.0, 4, 0.05)
    with pytest.raises(ValueError):
        SlitMapConfig(16, 10.0, 16, 0.05)
    with pytest.raises(ValueError):
        SlitMapConfig(16, 20.0, 16, 0.5)


def test_boundary_argument(domain16):
    ch = domain16.checks
    assert ch["argument_monotone"]
    assert ch["argument_total"] == pytest.approx(TWO_PI, abs=1e-9)
    assert ch["calibration_max"] < 1e-6


def test_slits_radial_and_sandwiched(domain16):
    band = disk_sandwich(domain16)
    N = domain16.config.N
    spread = max(band["A_over_N"] - band["G_min"], band["G_max"] - band["A_over_N"])
    assert spread == pytest.approx(band["c_needed"] * np.log(N) / N)
    assert band["c_needed"] < 2.0
    assert potential_jump(domain16) < 1e-5
    assert interior_deviation(domain16) < 0.05


def test_sector_ratio_band(domain16):
    r = [q.ratio for q in sector_quads(domain16, 1500)[:3]]
    assert all(0.5 <= x <= 2.0 for x in r)


def test_arcs_in_intervals_one_per_interval():
    edges = np.array([0.0, 1.0, 2.5, 4.0, TWO_PI])
    E = arcs_in_intervals(edges, 12.0)
    assert len(E) == len(edges) - 1
    c = E.centers()
    assert all(np.any((c > a) & (c < b)) for a, b in zip(edges[:-1], edges[1:]))
