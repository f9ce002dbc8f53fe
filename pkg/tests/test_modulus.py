import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexweld.core_geom import MarkedQuadrilateral, circle_polyline, rectangle_quad
from flexweld.modulus import (annulus_modulus, quad_modulus, quad_uniformize,
                              rect_harmonic_measure)


@pytest.mark.parametrize("width", [0.5, 1.0, 3.0])
def test_rectangle_modulus(width):
    assert quad_modulus(rectangle_quad(width)).modulus == pytest.approx(width, rel=1e-6)


@settings(max_examples=5)
@given(st.floats(0.2, 3.0), st.floats(0.3, 3.0), st.floats(-5, 5))
def test_similarity_invariance(angle, scale, shift):
    Q = MarkedQuadrilateral.from_sides([0, 2], [2, 2 + 1j], [2 + 1j, 1 + 1j, 1 + 2j], [1 + 2j, 2j, 0])
    base = quad_modulus(Q, 1500).modulus
    moved = quad_modulus(Q.transformed(scale * np.exp(1j * angle), shift), 1500).modulus
    assert moved == pytest.approx(base, rel=2e-3)


def test_l_shape_reciprocity():
    Q = MarkedQuadrilateral.from_sides([0, 2], [2, 2 + 1j], [2 + 1j, 1 + 1j, 1 + 2j], [1 + 2j, 2j, 0])
    m = quad_modulus(Q).modulus
    assert m * quad_modulus(Q.swapped()).modulus == pytest.approx(1.0, rel=1e-2)
    # the L-shape is a rectangle 2x1 plus a unit square arm: modulus above 1.5
    assert 1.5 < m < 2.0


@pytest.mark.parametrize("ratio", [2.0, np.e, 10.0])
def test_round_annulus(ratio):
    rep = annulus_modulus(circle_polyline(1.0, 256), circle_polyline(ratio, 256))
    assert rep.modulus == pytest.approx(np.log(ratio) / (2 * np.pi), rel=1e-3)


def test_annulus_rejects_crossing():
    with pytest.raises(ValueError):
        annulus_modulus(circle_polyline(1.0, 64), circle_polyline(1.0, 64, center=0.5))


def test_map_table_roundtrip_and_sides():
    Q = rectangle_quad(2.0)
    T = quad_uniformize(Q, 3000)
    assert T.modulus == pytest.approx(2.0, rel=1e-4)
    z = np.array([0.3 + 0.4j, 1.5 + 0.2j, 1.0 + 0.9j])
    w = T.forward(z)
    assert np.allclose(w, z, atol=1e-3)
    assert np.allclose(T.inverse(w), z, atol=1e-6)


def test_harmonic_measure_band_and_order():
    vals = [rect_harmonic_measure(L) for L in (2.0, 3.0)]
    assert vals[1] < vals[0]
    for L, v in zip((2.0, 3.0), vals):
        assert np.exp(-np.pi * L / 2) <= v <= 8 / np.pi * np.exp(-np.pi * L / 2)
