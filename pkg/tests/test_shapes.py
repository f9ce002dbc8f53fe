import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexweld.shapes import (M_for_eps, comb_shape, epsilon_bound, leftover_percentage,
                             minimal_T, rectangle_shape, shape_with_leftover, strip_interpolation)


def identity(y):
    return y


def test_full_rectangle_modulus():
    assert rectangle_shape(5.0).R == pytest.approx(5.0, rel=1e-4)


def test_vertex_gap_raises_modulus():
    full = rectangle_shape(4.0).R
    narrow = rectangle_shape(4.0, gap=0.3).R
    assert narrow > full


@settings(max_examples=20)
@given(st.floats(2.0, 8.0), st.floats(-0.3, 0.3))
def test_strip_interpolation_stretch(M, rel):
    Mt = 1.0 + (M - 1.0) * (1.0 + rel)
    si = strip_interpolation(M, Mt, identity, identity, grid=32)
    k = (Mt - 1.0) / (M - 1.0)
    assert si.sup_mu == pytest.approx(abs(k - 1) / (k + 1), abs=1e-12)
    assert np.all(si.jacobian > 0)


def test_strip_interpolation_boundary_values():
    si = strip_interpolation(4.0, 4.0, identity, lambda y: y + 0.05 * np.sin(np.pi * y), grid=16)
    y = np.linspace(0, 1, 9)
    assert np.allclose(si(1.0 + 1j * y), 1.0 + 1j * y)
    assert np.allclose(si(4.0 + 1j * y).imag, y + 0.05 * np.sin(np.pi * y))


def test_M_rule_and_bound():
    for eps in (0.5, 0.05, 1e-3):
        M = M_for_eps(eps)
        assert np.log(1 / eps) < np.pi * (M - 1) / 2 + np.log(M - 1)
        assert M == 2 or not np.log(1 / eps) < np.pi * (M - 2) / 2 + np.log(M - 2)
    assert epsilon_bound(3.0) == pytest.approx(np.exp(-np.pi) / 3)


def test_leftover_hit_and_infeasible():
    s = shape_with_leftover(0.05, 0.5, minimal_T(0.05, 0.5) + 1.0, compute_R=False)
    assert leftover_percentage(s) == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(ValueError, match="minimal feasible T"):
        shape_with_leftover(0.05, 0.5, minimal_T(0.05, 0.5) - 0.5, compute_R=False)


@settings(max_examples=10)
@given(st.floats(0.0, 0.9))
def test_comb_leftover_monotone_in_depth(d):
    a = leftover_percentage(comb_shape(20.0, 8.0, d, compute_R=False))
    b = leftover_percentage(comb_shape(20.0, 8.0, min(d + 0.05, 0.95), compute_R=False))
    assert 0.0 <= a <= b < 1.0


def test_comb_block_length():
    assert comb_shape(20.0, 8.0, 0.5, compute_R=False).block_length() == pytest.approx(8.0 + 0.05)
