import numpy as np
import pytest
from hypothesis import given, strategies as st

from flexweld.core_geom import (TWO_PI, ArcSet, CircleHomeo, MarkedQuadrilateral, Polyline,
                                arcset_complement, circle_polyline, homeo_image, normalize_angle,
                                polygon_area, rectangle_quad)


def random_arcs(seed, count):
    rng = np.random.default_rng(seed)
    cuts = np.sort(rng.uniform(0, TWO_PI, 2 * count))
    return ArcSet.from_arcs(list(zip(cuts[::2], cuts[1::2])))


def random_homeo(seed, count=6):
    rng = np.random.default_rng(seed)
    th = np.sort(rng.uniform(0, TWO_PI, count))
    h = np.sort(rng.uniform(0, TWO_PI, count)) + rng.uniform(-1, 1)
    return CircleHomeo(th, h)


def test_normalize_angle_range():
    t = normalize_angle(np.array([-7.0, 0.0, TWO_PI, 13.0]))
    assert np.all((t >= 0) & (t < TWO_PI))
    assert t[2] == 0.0


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_complement_partitions_circle(seed, count):
    E = random_arcs(seed, count)
    C = arcset_complement(E)
    assert E.total_length() + C.total_length() == pytest.approx(TWO_PI, abs=1e-9)
    mids = C.centers()
    assert not np.any(E.contains(mids))


@given(st.integers(0, 10_000))
def test_homeo_inverse_roundtrip(seed):
    h = random_homeo(seed)
    x = np.linspace(-5, 10, 200)
    assert np.allclose(h.inverse().lift(h.lift(x)), x, atol=1e-10)
    assert np.all(np.diff(h.lift(x)) > 0)
    assert np.allclose(h.lift(x + TWO_PI) - h.lift(x), TWO_PI)


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_compose_matches_pointwise(s1, s2):
    f, g = random_homeo(s1), random_homeo(s2)
    x = np.linspace(0, TWO_PI, 97)
    fg = f.compose(g)
    d = normalize_angle(fg(x) - f(g(x)) + 1.0) - 1.0
    assert np.abs(d).max() < 1e-9


@given(st.integers(0, 10_000))
def test_homeo_image_preserves_arc_count(seed):
    E = random_arcs(seed, 3)
    h = random_homeo(seed + 1)
    F = homeo_image(h, E)
    assert len(F) == len(E)
    assert np.all(F.contains(h(E.centers())))


def test_rotation_image_is_rotation():
    E = ArcSet.from_arcs([(0.1, 0.4), (2.0, 3.0)])
    F = homeo_image(CircleHomeo.rotation(0.5), E)
    assert F.total_length() == pytest.approx(E.total_length())
    assert F.is_subset_of(E.rotate(0.5))


def test_arcset_rejects_nothing_small():
    E = ArcSet.from_centers([1.0], [1e-15])
    assert E.lengths()[0] == 1e-15
    assert not E.empty


def test_homeo_rejects_nonmonotone():
    with pytest.raises(ValueError):
        CircleHomeo(np.array([0.0, 1.0]), np.array([1.0, 0.5]))


def test_polyline_area_and_simplicity():
    c = circle_polyline(2.0, 400)
    assert polygon_area(c) == pytest.approx(4 * np.pi, rel=1e-3)
    assert c.is_simple()
    bow = Polyline(np.array([0, 1 + 1j, 1, 1j]))
    assert not bow.is_simple()
    assert c.contains(np.array([0.5, 3.0])).tolist() == [True, False]


def test_rectangle_quad_sides():
    Q = rectangle_quad(3.0)
    assert Q.corners().tolist() == [0, 3, 3 + 1j, 1j]
    S = Q.swapped()
    assert np.allclose(S.side(0), Q.side(1))
    with pytest.raises(ValueError):
        MarkedQuadrilateral.from_sides([0, 1], [2, 3], [3, 4], [4, 0])


def test_json_roundtrip():
    E = ArcSet.from_arcs([(0.2, 0.5)])
    assert ArcSet.from_json(E.to_json()).arcs == E.arcs
    h = random_homeo(3)
    h2 = CircleHomeo.from_json(h.to_json())
    assert np.allclose(h2.theta, h.theta)
    Q = rectangle_quad(2.0)
    assert np.allclose(MarkedQuadrilateral.from_json(Q.to_json()).corners(), Q.corners())
