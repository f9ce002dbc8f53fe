import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flexweld.core_geom import TWO_PI, CircleHomeo, Disk
from flexweld import weld_iter as wi


@given(st.floats(1.0, 20.0), st.floats(0.0, 2.0))
def test_astala_bound_range(K, d):
    b = wi.astala_bound(K, d)
    assert d - 1e-12 <= b <= 2.0 + 1e-12
    assert wi.astala_bound(1.0, d) == pytest.approx(d)


def test_astala_band():
    val, (lo, hi) = wi.astala_bound(1.2, 1.5, C=2.0)
    k = 0.2 / 2.2
    assert lo == pytest.approx(1.5 / (1 + 2 * k))
    assert hi == pytest.approx(min(2.0, 1.5 * (1 + 2 * k)))
    with pytest.raises(ValueError):
        wi.astala_bound(0.5, 1.0)


def test_config_validation():
    h = CircleHomeo.rotation(0.1)
    with pytest.raises(ValueError):
        wi.concentric_config(h, mode="spiral")
    with pytest.raises(ValueError):
        wi.concentric_config(h, steps=wi.MAX_STEPS + 1)
    with pytest.raises(ValueError):
        wi.concentric_config(h, eps_seq=(0.5, -1.0, 0.5))
    with pytest.raises(ValueError):
        wi.concentric_config(h, mode="positive_area", a_seq=(0.5, 1.0, 0.5))
    with pytest.raises(ValueError):
        wi.concentric_config(h, mode="dim_s", s=2.5)
    cfg = wi.concentric_config(h, eps_seq=(0.5, 0.25, 0.1))
    assert cfg.budget() == pytest.approx(1.5 * 1.25 * 1.1)


@pytest.fixture(scope="module")
def concentric():
    cfg = wi.concentric_config(CircleHomeo.rotation(0.1), 1.0, 40.0, steps=1, samples=512)
    st_ = wi.init(cfg)
    return st_, wi.foliate(st_, TWO_PI * np.arange(16) / 16)


def test_annulus_period_matches_round_annulus(concentric):
    _, snap = concentric
    assert snap.coords.P == pytest.approx(TWO_PI / np.log(40.0), rel=5e-3)


def test_initial_state(concentric):
    st_, _ = concentric
    assert st_.step == 0
    assert st_.area == pytest.approx(np.pi * (40.0 ** 2 - 1.0), rel=1e-3)
    # the two curves are concentric circles, so f and g stay 39 apart
    assert st_.mismatch.min() == pytest.approx(39.0, rel=1e-3)


def test_leaves_join_the_curves_without_crossing(concentric):
    _, snap = concentric
    assert len(snap.leaves) == 16
    for k, lf in enumerate(snap.leaves):
        v = lf.vertices
        assert abs(abs(v[0]) - 1.0) < 1e-2 and abs(abs(v[-1]) - 40.0) < 0.4
        nxt = snap.leaves[(k + 1) % 16].vertices
        assert not wi._polylines_cross(v, nxt)


def test_quads_have_positive_length(concentric):
    st_, snap = concentric
    for side in ("f", "g"):
        quads = wi.build_quads(st_, snap, side)
        assert len(quads) == 16
        assert all(q.T > 1.0 for q in quads)


def test_covering_cost():
    assert wi.covering_cost([Disk(0j, 0.1), Disk(1 + 0j, 0.2)], 1.5) == pytest.approx(0.1 ** 1.5 + 0.2 ** 1.5)


@pytest.fixture(scope="module")
def one_step():
    cfg = wi.concentric_config(CircleHomeo.rotation(0.1), 1.0, 400.0, steps=1, samples=256,
                               eps_seq=(0.5,), N_schedule=(8,))
    return wi.run(cfg)


def test_one_step_properties(one_step):
    assert one_step.failure is None
    s = one_step.steps[-1]
    assert s["shrink_ratio"] <= 0.75
    assert s["extension_error_chart"] <= 1e-3
    for side in ("f", "g"):
        assert s["containment"][side]["points_outside"] == 0
    led = s["ledger"]
    assert led["within_budget"] and led["K"] <= 1.5 * 1.01
    assert set(s["A"]) == {"f", "g"} and all(a <= wi.A_MAX for a in s["A"].values())


def test_trace_serializes(one_step):
    data = json.loads(one_step.dumps())
    assert data["config"]["N_schedule"] == [8]
    assert one_step.mismatch_csv().startswith("step,x,mismatch")
    assert one_step.to_svg(1).startswith("<svg")
