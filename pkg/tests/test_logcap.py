import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexweld.core_geom import ArcSet, TWO_PI
from flexweld.logcap import (PlanarSegment, arcset_pieces, capacity, capacity_segment,
                             equilibrium_measure, far_set_capacity, koebe_boundary_samples,
                             make_log_singular_homeo, minimize_energy, panel_midpoint_potential,
                             planar_capacity, potential_G, verify_log_singular)


@pytest.mark.parametrize("length", [0.5, 1.0, 4.0])
def test_segment_quarter_length(length):
    assert capacity_segment(0, length) == pytest.approx(length / 4, rel=1e-4)


@pytest.mark.parametrize("alpha", [np.pi, 1.0, 0.02, 1e-6])
def test_arc_sine_law(alpha):
    cap = capacity(ArcSet.from_arcs([(0.3, 0.3 + alpha)])).capacity
    assert cap == pytest.approx(np.sin(alpha / 4), rel=1e-4)


def test_full_circle():
    assert capacity(ArcSet.full_circle()).capacity == pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize("half", [0.3, 1.0])
def test_square_root_preimage(half):
    # z -> z^2 pulls the arc (-2a, 2a) back to two antipodal arcs of width 2a
    two = ArcSet.from_arcs([(-half, half), (np.pi - half, np.pi + half)])
    assert capacity(two).capacity == pytest.approx(np.sqrt(np.sin(half)), rel=1e-4)


def test_separated_tiny_arcs():
    N, w = 16, 1e-8
    E = ArcSet.from_centers(TWO_PI * (np.arange(N) + 0.5) / N, np.full(N, w))
    # preimage of one arc of width N w under z^N
    assert capacity(E, 8).robin == pytest.approx(-np.log(np.sin(N * w / 4)) / N, rel=1e-5)


def test_potential_constant_on_support_and_harmonic_outside():
    mu = equilibrium_measure(ArcSet.from_arcs([(0.0, 1.0)]), 16)
    robin = -np.log(np.sin(0.25))
    g = panel_midpoint_potential(mu)
    assert np.abs(g - robin).max() < 2e-2
    circ = equilibrium_measure(ArcSet.full_circle(), 32)
    assert potential_G(circ, 2.0) == pytest.approx(np.log(0.5), abs=1e-5)
    assert potential_G(circ, 0.3) == pytest.approx(0.0, abs=1e-5)


def test_minimize_energy_kkt():
    rng = np.random.default_rng(1)
    B = rng.normal(size=(6, 6))
    K = B @ B.T + 6 * np.eye(6)
    w, hist, kkt = minimize_energy(K, 1.0)
    assert w.min() >= 0 and w.sum() == pytest.approx(1.0)
    assert np.all(np.diff(hist) <= 1e-12)
    g = 2 * K @ w
    act = w > 1e-12
    assert np.ptp(g[act]) < 1e-6


def test_empty_and_bad_inputs():
    with pytest.raises(ValueError):
        capacity(ArcSet(()))
    with pytest.raises(ValueError):
        capacity_segment(1, 1)
    with pytest.raises(ValueError):
        far_set_capacity(koebe_boundary_samples(64), 1.0, 0.5)


def families(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 5))
    cuts = np.sort(rng.uniform(0, TWO_PI, 2 * k))
    return [ArcSet.from_arcs([(a, b)]) for a, b in zip(cuts[::2], cuts[1::2])]


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_monotone_under_growth(seed):
    arcs = families(seed)
    E = ArcSet.from_arcs([a.intervals()[0] for a in arcs])
    F = ArcSet.from_arcs([a.intervals()[0] for a in arcs[:-1]])
    assert capacity(F, 8).capacity <= capacity(E, 8).capacity * (1 + 1e-6)


@settings(max_examples=10)
@given(st.integers(0, 10_000), st.floats(0.1, 3.0))
def test_similarity_scaling(seed, lam):
    E = ArcSet.from_arcs([a.intervals()[0] for a in families(seed)])
    base = planar_capacity(arcset_pieces(E), 8).capacity
    scaled = planar_capacity(arcset_pieces(E, lam, 0.7 - 0.2j), 8).capacity
    assert scaled == pytest.approx(lam * base, rel=1e-6)


def test_log_singular_certificate():
    h, cert = make_log_singular_homeo(2, seed=0)
    assert cert.valid
    assert cert.cap_E <= 0.5 and cert.cap_image_complement <= 0.5
    assert verify_log_singular(h, 2) is not None


def test_far_set_shrinks():
    s = koebe_boundary_samples(2048)
    E4, c4 = far_set_capacity(s, 1.0, 4.0)
    E16, c16 = far_set_capacity(s, 1.0, 16.0)
    assert c16 < c4
    assert E16.is_subset_of(E4)


def test_segment_piece_matches_helper():
    assert planar_capacity([PlanarSegment(0, 2j)]).capacity == pytest.approx(
        capacity_segment(0, 2j), rel=1e-12)
