import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexweld.core_geom import Disk, rectangle_quad
from flexweld.dimension import (box_dim, connect_squares, conservation_error, covering_cost,
                                frostman_check, layout_in_rectangle, mattila_build,
                                natural_measure, s_additive_squares, separation_check,
                                squares_as_rects, tree_scales)


@settings(max_examples=15)
@given(st.floats(1.05, 1.8))
def test_s_additive_identity_and_packing(s):
    L = s_additive_squares(s, n_min=4)
    ch = L.checks()
    assert ch["identity_error"] < 1e-12
    assert ch["feasible"] and ch["inside_anchors"] and ch["disjoint"]


def test_unpackable_s_refused():
    with pytest.raises(ValueError, match="no s-additive packing"):
        s_additive_squares(1.95)


def test_s_range_enforced():
    for s in (1.0, 2.0, 2.5):
        with pytest.raises(ValueError):
            s_additive_squares(s)
        with pytest.raises(ValueError):
            mattila_build(s, 2)


@pytest.mark.parametrize("s", [1.2, 1.5, 1.8])
def test_tree_sums_and_measure(s):
    tree = mattila_build(s, 3)
    ch = tree.checks()
    assert ch["contained"] and ch["diameters_decreasing"]
    assert ch["additivity_error"] < 1e-9
    meas = natural_measure(tree)
    assert conservation_error(tree, meas) < 1e-12
    assert meas.leaf_masses().sum() == pytest.approx(1.0)
    assert frostman_check(tree, meas, trials=200)["constant"] < 50


def test_box_dim_oracles():
    t = np.linspace(0, 1, 200001)
    assert box_dim(t + 0.3j * t, [2.0 ** -k for k in range(5, 12)]).estimate == pytest.approx(1.0, abs=0.02)
    full = {"x0": np.array([0.0]), "y0": np.array([0.0]), "x1": np.array([1.0]), "y1": np.array([1.0])}
    assert box_dim(full).estimate == pytest.approx(2.0, abs=1e-9)
    # four-corner Cantor dust: dimension log 4 / log 3
    ll = np.array([0j])
    w = 1.0
    for _ in range(6):
        w /= 3
        ll = (ll[:, None] + 2 * w * np.array([0, 1, 1j, 1 + 1j])[None, :]).ravel()
    rep = box_dim(squares_as_rects(ll, w), [3.0 ** -k for k in range(1, 7)])
    assert rep.estimate == pytest.approx(np.log(4) / np.log(3), abs=0.05)


def test_tree_scales_need_depth():
    with pytest.raises(ValueError):
        tree_scales(mattila_build(1.5, 1))


def test_separation_passes():
    assert separation_check(s_additive_squares(1.5), trials=300)["passes"]


def test_covering_cost_and_corridors():
    assert covering_cost([Disk(0j, 0.5), Disk(1 + 0j, 0.25)], 1.0) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        covering_cost([], 1.5)
    L = s_additive_squares(1.5, 4)
    ll, x = layout_in_rectangle(L, 1.5)
    cor = connect_squares(rectangle_quad(1.5), ll[:6], x, 1e-3, 1.5)
    assert cor.cost <= 1e-3
    with pytest.raises(ValueError):
        connect_squares(rectangle_quad(1.5), np.array([-0.1 + 0.5j]), x, 1e-3, 1.5)
