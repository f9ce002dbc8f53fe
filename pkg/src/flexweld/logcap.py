"""Logarithmic capacity of arc sets by discrete energy minimization.

A compact set is cut into panels that carry uniform mass.  Panels live in
component-local coordinates (origin point plus a small offset), so arcs far
shorter than the float spacing of their endpoint angles stay well resolved.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .core_geom import (TWO_PI, ArcSet, CircleHomeo, arcset_complement,
                        homeo_image, normalize_angle)

_GX, _GW = leggauss(6)
_GX = 0.5 * (_GX + 1.0)
_GW = 0.5 * _GW


# ---------------------------------------------------------------- geometry

@dataclass(frozen=True)
class PlanarArc:
    """Arc ``center + radius * e^{it}``, ``t`` from ``mid - half`` to ``mid + half``."""
    center: complex
    radius: float
    mid: float
    half: float


@dataclass(frozen=True)
class PlanarSegment:
    a: complex
    b: complex


def arcset_pieces(E: ArcSet, scale: float = 1.0, center: complex = 0.0) -> list:
    """Planar pieces of ``E`` placed on the circle ``|z - center| = scale``."""
    if E.full:
        return [PlanarArc(complex(center), float(scale), np.pi, np.pi)]
    return [PlanarArc(complex(center), float(scale), float(c), 0.5 * float(w))
            for c, w in zip(E.centers(), E.lengths())]


def _graded(p: int) -> np.ndarray:
    k = np.arange(p + 1)
    return 0.5 * (1.0 - np.cos(np.pi * k / p))


@dataclass
class PanelGeometry:
    """Panels on a list of planar pieces.

    ``kind[c]`` is 0 for arcs and 1 for segments.  Each panel stores local
    parameters ``s0 < s1`` (angle offset from the arc midpoint, or length
    along a segment).
    """
    pieces: list
    comp: np.ndarray
    s0: np.ndarray
    s1: np.ndarray
    origin: np.ndarray
    frame: np.ndarray
    kind: np.ndarray
    radius: np.ndarray

    @staticmethod
    def build(pieces: list, panels_per_piece: int) -> "PanelGeometry":
        comp, s0, s1 = [], [], []
        origin, frame, kind, radius = [], [], [], []
        for c, pc in enumerate(pieces):
            if isinstance(pc, PlanarArc):
                full = pc.half >= np.pi - 1e-15
                u = np.linspace(0, 1, panels_per_piece + 1) if full else _graded(panels_per_piece)
                t = -pc.half + 2.0 * pc.half * u
                e = np.exp(1j * pc.mid)
                origin.append(pc.center + pc.radius * e)
                frame.append(pc.radius * e)
                kind.append(0)
                radius.append(pc.radius)
            elif isinstance(pc, PlanarSegment):
                length = abs(pc.b - pc.a)
                if length == 0.0:
                    raise ValueError("degenerate segment")
                t = length * _graded(panels_per_piece)
                origin.append(complex(pc.a))
                frame.append((pc.b - pc.a) / length)
                kind.append(1)
                radius.append(np.inf)
            else:
                raise TypeError(f"unknown piece {pc!r}")
            comp.extend([c] * (len(t) - 1))
            s0.extend(t[:-1])
            s1.extend(t[1:])
        return PanelGeometry(pieces, np.array(comp, dtype=int), np.array(s0), np.array(s1),
                             np.array(origin, dtype=complex), np.array(frame, dtype=complex),
                             np.array(kind, dtype=int), np.array(radius, dtype=float))

    def __len__(self) -> int:
        return self.comp.size

    def local(self, comp, s) -> np.ndarray:
        """Offset of the point with parameter ``s`` from its piece origin."""
        comp = np.asarray(comp)
        s = np.asarray(s, dtype=float)
        arc = 2j * np.sin(0.5 * s) * np.exp(0.5j * s)
        return self.frame[comp] * np.where(self.kind[comp] == 0, arc, s)

    def absolute(self, comp, s) -> np.ndarray:
        return self.origin[np.asarray(comp)] + self.local(comp, s)

    def chord_ends(self):
        return self.local(self.comp, self.s0), self.local(self.comp, self.s1)

    def chord_lengths(self) -> np.ndarray:
        a, b = self.chord_ends()
        return np.abs(b - a)

    def gauss_local(self) -> np.ndarray:
        s = self.s0[:, None] + (self.s1 - self.s0)[:, None] * _GX[None, :]
        return self.local(self.comp[:, None], s)

    def midpoint_params(self) -> np.ndarray:
        return 0.5 * (self.s0 + self.s1)


def _mean_log_line(u, v, length):
    """Mean of log|t - (u + iv)| over t in [0, length]."""
    def F(x):
        r2 = x * x + v * v
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r2 > 0, 0.5 * x * np.log(np.where(r2 > 0, r2, 1.0)), 0.0) - x
            out = out + np.where(v > 0, v * np.arctan2(x, np.where(v > 0, v, 1.0)), 0.0)
        return out

    return (F(length - u) - F(-u)) / length


def _log_sinc_half(x):
    """log|2 sin(x/2) / x|, smooth near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.log(np.abs(2.0 * np.sin(0.5 * x) / np.where(small, 1.0, x)))
    return np.where(small, -x * x / 24.0, big)


def _circle_ids(geom: PanelGeometry) -> np.ndarray:
    ids, seen = [], {}
    for pc in geom.pieces:
        if isinstance(pc, PlanarArc):
            key = (complex(pc.center), float(pc.radius))
            ids.append(seen.setdefault(key, len(seen)))
        else:
            ids.append(-1)
    return np.array(ids, dtype=int)


def _panel_potentials(geom: PanelGeometry, tcomp, tparam=None, tabs=None) -> np.ndarray:
    """Matrix P[t, j] = mean of log(1/|z_t - y|) over panel j.

    A target is a piece index with its local parameter, or (index -1) a free
    point given by ``tabs``.  Well separated pairs use Gauss points on the
    true curve.  Near pairs on a common circle use the exact angular
    formula; other near pairs integrate exactly over the panel chord.
    """
    tcomp = np.atleast_1d(np.asarray(tcomp, dtype=int))
    nt = tcomp.size
    tparam = np.zeros(nt) if tparam is None else np.atleast_1d(np.asarray(tparam, dtype=float))
    safe = np.maximum(tcomp, 0)
    tloc = geom.local(safe, tparam)
    if tabs is not None:
        free = tcomp < 0
        tloc = np.where(free, np.atleast_1d(np.asarray(tabs, dtype=complex)), tloc)
    t_origin = np.where(tcomp >= 0, geom.origin[safe], 0.0)
    circ = _circle_ids(geom)
    t_circ = np.where(tcomp >= 0, circ[safe], -1)
    mids = np.array([pc.mid if isinstance(pc, PlanarArc) else 0.0 for pc in geom.pieces])
    t_mid = mids[safe]

    a_loc, b_loc = geom.chord_ends()
    length = np.abs(b_loc - a_loc)
    direction = (b_loc - a_loc) / length
    mid = 0.5 * (a_loc + b_loc)
    gl = geom.gauss_local()
    p_origin = geom.origin[geom.comp]
    p_circ = circ[geom.comp]
    p_mid = mids[geom.comp]
    p_rad = geom.radius[geom.comp]
    out = np.empty((nt, len(geom)))
    chunk = max(1, 400_000 // max(1, len(geom)))
    for lo in range(0, nt, chunk):
        sl = slice(lo, lo + chunk)
        same = tcomp[sl, None] == geom.comp[None, :]
        base = np.where(same, 0.0, t_origin[sl, None] - p_origin[None, :]) + tloc[sl, None]
        far = np.abs(base - mid[None, :]) > 2.0 * length[None, :]
        with np.errstate(divide="ignore"):
            block = -(np.log(np.abs(base[:, :, None] - gl[None, :, :])) @ _GW)
        ti, pj = np.nonzero(~far)
        if ti.size:
            ti_abs = ti + lo
            on_circle = (t_circ[ti_abs] >= 0) & (t_circ[ti_abs] == p_circ[pj])
            vals = np.empty(ti.size)
            # shared circle: angle difference measured in parameter space
            c = on_circle
            if c.any():
                dm = np.where(same[ti[c], pj[c]], 0.0,
                              np.mod(t_mid[ti_abs[c]] - p_mid[pj[c]] + np.pi, TWO_PI) - np.pi)
                x = dm + tparam[ti_abs[c]] - geom.s0[pj[c]]
                span = geom.s1[pj[c]] - geom.s0[pj[c]]
                m = _mean_log_line(x, np.zeros_like(x), span)
                corr = _log_sinc_half(x[:, None] - span[:, None] * _GX[None, :]) @ _GW
                vals[c] = -(np.log(p_rad[pj[c]]) + m + corr)
            c = ~on_circle
            if c.any():
                r = (base[ti[c], pj[c]] - a_loc[pj[c]]) * np.conj(direction[pj[c]])
                vals[c] = -_mean_log_line(r.real, np.abs(r.imag), length[pj[c]])
            block[ti, pj] = vals
        out[sl] = block
    return out


def energy_matrix(geom: PanelGeometry) -> np.ndarray:
    """Symmetric interaction matrix with chord self-energies on the diagonal."""
    n = len(geom)
    q = _GX.size
    sp = geom.s0[:, None] + (geom.s1 - geom.s0)[:, None] * _GX[None, :]
    P = _panel_potentials(geom, np.repeat(geom.comp, q), sp.reshape(-1)).reshape(n, q, n)
    K = np.einsum("iqj,q->ij", P, _GW)
    K = 0.5 * (K + K.T)
    ell = geom.chord_lengths()
    K[np.arange(n), np.arange(n)] = np.log(1.0 / ell) + 1.5
    return K


# ---------------------------------------------------------------- optimizer

def _kkt_residual(K, w, mass):
    g = 2.0 * K @ w
    lam = float(w @ g) / mass
    support = w > 0
    r_in = np.max(np.abs(g[support] - lam)) if support.any() else 0.0
    r_out = np.max(np.maximum(lam - g[~support], 0.0)) if (~support).any() else 0.0
    return max(r_in, r_out) / max(1.0, abs(lam))


def _project_simplex(v, mass):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - mass
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def minimize_energy(K: np.ndarray, mass: float = 1.0, kkt_tol: float = 1e-8,
                    rel_tol: float = 1e-12, max_iter: int = 100_000,
                    polish_every: int = 25):
    """Minimize w^T K w over nonnegative weights summing to ``mass``.

    Projected gradient steps (step shrinking like 1/sqrt(k) from 1/L, with
    backtracking so the energy never increases) interleaved with an
    active-set polish that solves the KKT system on the current support.
    Returns ``(weights, history, kkt)``.
    """
    n = K.shape[0]
    w = np.full(n, mass / n)
    energy = float(w @ K @ w)
    history = [energy]
    L = 2.0 * np.linalg.norm(K, 2)
    kkt = _kkt_residual(K, w, mass)
    it = 0
    while it < max_iter:
        if kkt < kkt_tol:
            return w, history, kkt
        it += 1
        if it % polish_every == 0 or it == 5:
            w_new = _polish(K, w, mass)
        else:
            step = 1.0 / (L * np.sqrt(1.0 + it / polish_every))
            w_new = _project_simplex(w - step * 2.0 * (K @ w), mass)
        e_new = float(w_new @ K @ w_new)
        if e_new > energy:
            continue
        decrease = energy - e_new
        w, energy = w_new, e_new
        history.append(energy)
        kkt = _kkt_residual(K, w, mass)
        if decrease <= rel_tol * max(1.0, abs(energy)) and kkt < 1e3 * kkt_tol:
            # stalled at a point that is numerically optimal
            if kkt < kkt_tol or it % polish_every == 0:
                return w, history, kkt
    raise RuntimeError(f"energy minimization did not converge (KKT residual {kkt:.3e})")


def _polish(K, w, mass):
    """One primal active-set move: solve on the support, step until a bound hits."""
    n = K.shape[0]
    g = 2.0 * K @ w
    lam = float(w @ g) / mass
    support = (w > 0) | (g < lam)
    for _ in range(n):
        idx = np.nonzero(support)[0]
        m = idx.size
        A = np.zeros((m + 1, m + 1))
        A[:m, :m] = 2.0 * K[np.ix_(idx, idx)]
        A[:m, m] = -1.0
        A[m, :m] = 1.0
        rhs = np.zeros(m + 1)
        rhs[m] = mass
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            return w
        target = np.zeros(n)
        target[idx] = sol[:m]
        if np.all(target >= 0):
            return target
        d = target - w
        neg = d < 0
        ratio = np.where(neg, w / np.where(neg, -d, 1.0), np.inf)
        t = float(np.min(ratio))
        if t > 0:
            return np.maximum(w + t * d, 0.0) * (mass / max(np.sum(np.maximum(w + t * d, 0.0)), 1e-300))
        support &= target > 0
        if not support.any():
            return w
    return w


# ---------------------------------------------------------------- measures

@dataclass
class DiscreteMeasure:
    geometry: PanelGeometry
    masses: np.ndarray
    total_mass: float
    support: ArcSet | None = None

    @property
    def panels(self) -> list:
        """List of ((start, end), mass); arc panels use absolute angles."""
        out = []
        for c, a, b, m in zip(self.geometry.comp, self.geometry.s0, self.geometry.s1, self.masses):
            pc = self.geometry.pieces[c]
            if isinstance(pc, PlanarArc):
                out.append(((pc.mid + a, pc.mid + b), float(m)))
            else:
                out.append(((pc.a + (pc.b - pc.a) * a / abs(pc.b - pc.a),
                             pc.a + (pc.b - pc.a) * b / abs(pc.b - pc.a)), float(m)))
        return out

    def midpoint_angles(self) -> np.ndarray:
        mids = np.array([self.geometry.pieces[c].mid for c in self.geometry.comp])
        return normalize_angle(mids + self.geometry.midpoint_params())

    def mass_on(self, piece: int) -> float:
        return float(self.masses[self.geometry.comp == piece].sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["angle", "mass"])
        for th, m in zip(self.midpoint_angles(), self.masses):
            wr.writerow([repr(float(th)), repr(float(m))])
        return buf.getvalue()


@dataclass
class CapacityReport:
    robin: float
    capacity: float
    energy_history: list
    panel_count: int
    coarse_robin: float = float("nan")
    fine_robin: float = float("nan")

    def to_json(self) -> dict:
        return {"robin": self.robin, "capacity": self.capacity,
                "energy_history": list(map(float, self.energy_history)),
                "panel_count": self.panel_count}


def _solve(pieces, panels_per_piece, mass):
    geom = PanelGeometry.build(pieces, panels_per_piece)
    K = energy_matrix(geom)
    w, hist, kkt = minimize_energy(K, mass)
    return geom, K, w, hist


def equilibrium_measure(E: ArcSet, panels_per_arc: int = 16, mass: float = 1.0) -> DiscreteMeasure:
    if E.empty:
        raise ValueError("equilibrium measure of an empty set")
    if panels_per_arc < 4:
        raise ValueError("panels_per_arc must be at least 4")
    geom, _, w, _ = _solve(arcset_pieces(E), panels_per_arc, mass)
    return DiscreteMeasure(geom, w, float(mass), E)


def planar_capacity(pieces: list, panels_per_piece: int = 16) -> CapacityReport:
    """Capacity of a union of planar arcs and segments."""
    if not pieces:
        raise ValueError("capacity of an empty set")
    if panels_per_piece < 4:
        raise ValueError("panels_per_piece must be at least 4")
    _, K1, w1, _ = _solve(pieces, panels_per_piece, 1.0)
    g2, K2, w2, hist = _solve(pieces, 2 * panels_per_piece, 1.0)
    e1 = float(w1 @ K1 @ w1)
    e2 = float(w2 @ K2 @ w2)
    robin = (4.0 * e2 - e1) / 3.0
    return CapacityReport(robin, float(np.exp(-robin)), hist, len(g2), e1, e2)


def capacity(E: ArcSet, panels_per_arc: int = 16) -> CapacityReport:
    if E.empty:
        raise ValueError("capacity of an empty set")
    return planar_capacity(arcset_pieces(E), panels_per_arc)


def capacity_segment(a: complex, b: complex, panels: int = 16) -> float:
    if a == b:
        raise ValueError("segment endpoints coincide")
    return planar_capacity([PlanarSegment(complex(a), complex(b))], panels).capacity


# ---------------------------------------------------------------- potentials

def _potential(mu: DiscreteMeasure, tcomp, tparam=None, tabs=None) -> np.ndarray:
    return _panel_potentials(mu.geometry, tcomp, tparam, tabs) @ mu.masses


def potential_G(mu: DiscreteMeasure, z) -> np.ndarray | float:
    """Logarithmic potential of ``mu`` at planar points ``z``."""
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    out = _potential(mu, np.full(zz.shape, -1), None, zz)
    return float(out[0]) if np.ndim(z) == 0 else out


def potential_U(mu: DiscreteMeasure, z) -> np.ndarray | float:
    """``G(z) + G(1/conj z)``; symmetric under reflection in the unit circle."""
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(zz == 0):
        raise ValueError("potential_U is undefined at 0")
    refl = 1.0 / np.conj(zz)
    inside = np.abs(zz) <= 1.0
    a = np.where(inside, zz, refl)
    b = np.where(inside, refl, zz)
    out = potential_G(mu, a) + potential_G(mu, b)
    return float(out[0]) if np.ndim(z) == 0 else out


def circle_potential(mu: DiscreteMeasure, theta=None, piece=None, offset=None) -> np.ndarray:
    """G on the unit circle.

    Either absolute angles ``theta``, or ``piece`` indices with angle
    ``offset`` from the piece midpoint (needed on arcs below float spacing).
    Absolute angles are attached to the nearest arc piece so near-field
    terms use the exact circle formula.
    """
    geom = mu.geometry
    if theta is not None:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        mids = np.array([pc.mid for pc in geom.pieces])
        d = np.mod(th[:, None] - mids[None, :] + np.pi, TWO_PI) - np.pi
        piece = np.argmin(np.abs(d), axis=1)
        offset = d[np.arange(th.size), piece]
        return _potential(mu, piece, offset)
    piece = np.atleast_1d(np.asarray(piece, dtype=int))
    offset = np.atleast_1d(np.asarray(offset, dtype=float))
    return _potential(mu, piece, offset)


def panel_midpoint_potential(mu: DiscreteMeasure) -> np.ndarray:
    g = mu.geometry
    return _potential(mu, g.comp, g.midpoint_params())


def conjugate_increments(mu: DiscreteMeasure, E: ArcSet) -> list:
    """Increment ``2 pi mu(I)`` of the conjugate potential over each arc I of E."""
    out = []
    pieces = mu.geometry.pieces
    for k, (lo, hi) in enumerate(E.intervals()):
        if E.full:
            out.append(((lo, hi), TWO_PI * float(mu.masses.sum())))
            continue
        c = E.centers()[k]
        hits = [j for j, pc in enumerate(pieces)
                if isinstance(pc, PlanarArc) and abs(normalize_angle(pc.mid - c + np.pi) - np.pi) < 1e-12]
        out.append(((lo, hi), TWO_PI * sum(mu.mass_on(j) for j in hits)))
    return out


# ---------------------------------------------------------------- log-singular inputs

@dataclass
class LogSingularCertificate:
    n: int
    E_n: ArcSet
    cap_E: float
    cap_image_complement: float

    @property
    def valid(self) -> bool:
        return self.cap_E <= 1.0 / self.n and self.cap_image_complement <= 1.0 / self.n

    def to_json(self) -> dict:
        return {"n": self.n, "E_n": self.E_n.to_json(), "cap_E": self.cap_E,
                "cap_image_complement": self.cap_image_complement, "valid": self.valid}


def _pattern_homeo(m: int, total: float, phase: float) -> tuple:
    """h collapsing the complement of m equal arcs onto m equal arcs."""
    w = total / m
    c = phase + TWO_PI * (np.arange(m) + 0.5) / m
    d = c + np.pi / m
    theta, hv = [], []
    for k in range(m):
        theta += [c[k] - w / 2, c[k] + w / 2]
        hv += [d[k - 1] - (TWO_PI if k == 0 else 0.0) + w / 2, d[k] - w / 2]
    h = CircleHomeo(np.array(theta), np.array(hv))
    E = ArcSet.from_centers(c, np.full(m, w))
    return h, E


def _certify(h: CircleHomeo, E: ArcSet, level: int, panels: int = 12) -> LogSingularCertificate:
    capE = capacity(E, panels).capacity if not E.empty else 0.0
    F = homeo_image(h, arcset_complement(E))
    capF = capacity(F, panels).capacity if not F.empty else 0.0
    return LogSingularCertificate(level, E, capE, capF)


def make_log_singular_homeo(level: int, seed: int = 0):
    """Piecewise-linear h with a certificate at ``level``.

    Starts from 2^level arcs of total length 4^-level and halves the arc
    count until both capacities drop below 1/level.
    """
    if level < 1:
        raise ValueError("level must be at least 1")
    total = 4.0 ** (-level)
    phase = float(np.random.default_rng(seed).uniform(0, TWO_PI))
    for j in range(level, -1, -1):
        m = 2 ** j
        if total / m < 1e-12:
            continue
        h, E = _pattern_homeo(m, total, phase)
        cert = _certify(h, E, level)
        if cert.valid:
            return h, cert
    raise ValueError(f"level {level} infeasible at this resolution")


def verify_log_singular(h: CircleHomeo, level: int):
    """First certificate among slope-threshold arc sets, or None."""
    th = h.theta
    if th.size < 2:
        return None
    hv = h.h
    lo = th
    hi = np.append(th[1:], th[0] + TWO_PI)
    dh = np.append(np.diff(hv), hv[0] + TWO_PI - hv[-1])
    slope = dh / (hi - lo)
    keys = np.unique(np.round(np.log(slope), 9))[::-1]
    for key in keys:
        sel = np.round(np.log(slope), 9) >= key
        if sel.all():
            continue
        E = ArcSet.from_arcs(list(zip(lo[sel], hi[sel])))
        cert = _certify(h, E, level)
        if cert.valid:
            return cert
    return None


# ---------------------------------------------------------------- far sets

def koebe_boundary_samples(n: int = 8192) -> list:
    """Boundary values of z/(1-z)^2 on the circle (pole at angle 0 skipped)."""
    th = TWO_PI * (np.arange(n) + 0.5) / n
    z = np.exp(1j * th)
    return list(zip(th, z / (1.0 - z) ** 2))


def far_set_capacity(boundary_samples, base_distance: float, R: float, panels: int = 12):
    if R < 1:
        raise ValueError("R must be at least 1")
    if base_distance <= 0:
        raise ValueError("base distance must be positive")
    th = np.array([float(t) for t, _ in boundary_samples])
    val = np.abs(np.array([complex(v) for _, v in boundary_samples]))
    order = np.argsort(normalize_angle(th))
    th = normalize_angle(th)[order]
    val = val[order]
    if th.size == 0:
        return ArcSet(()), 0.0
    nxt = np.append(th[1:], th[0] + TWO_PI)
    prv = np.insert(th[:-1], 0, th[-1] - TWO_PI)
    lo = 0.5 * (prv + th)
    hi = 0.5 * (th + nxt)
    sel = val >= R * base_distance
    if not sel.any():
        return ArcSet(()), 0.0
    E = ArcSet.from_arcs(list(zip(lo[sel], hi[sel])), tol=1e-9)
    return E, capacity(E, panels).capacity


def report_json(obj) -> str:
    return json.dumps(obj.to_json(), indent=2, sort_keys=True)
