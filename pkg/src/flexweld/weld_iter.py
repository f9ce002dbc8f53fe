"""Iterative welding construction at desk scale.

Each side keeps its boundary correspondence as a map on the closed disk,
evaluated by recursion through the steps taken so far.  Step ``n`` composes
a shrink ``z -> t z``, the slit map and the extension ``psi``: the previous
map below the sector's inner radius, and inside sector ``W_j`` the chain
``W_j -> [0,R] x [0,1] -> B_j -> shape corrector -> Q_j``.  ``B_j`` moves
points along the unit square so the chain meets the previous map on the
inner arc; it lives where the corrector is the identity, so the two
dilatations never stack.

The g-side works in the plane inverted by ``1/z`` with angle ``-y``, so
both sides share one code path: a bounded domain around 0 whose boundary
is pushed outward into the annulus.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .core_geom import (TWO_PI, ArcSet, CircleHomeo, Disk, MarkedQuadrilateral, Polyline,
                        _segments_intersect, arcset_complement, homeo_image)
from .dimension import connect_squares, covering_cost, s_additive_squares
from .logcap import LogSingularCertificate
from .modulus import TriLocator, _loops_disjoint, _triangulate, gradients, quad_uniformize, solve_dirichlet
from .shapes import (M_for_eps, admissibility, epsilon_bound, rectangle_shape, retune_gap,
                     shape_from_paths, shape_with_leftover)
from .slitmap import SlitMapConfig, arcs_in_intervals, sector_quad, slit_map

__all__ = ["IterationConfig", "FoliationSnapshot", "IterationState", "CurveTrace", "WeldFailure",
           "init", "foliate", "build_quads", "extend_step", "shrink", "run", "astala_bound",
           "covering_cost", "concentric_config"]

MODES = ("plain", "positive_area", "dim_s", "dim_1")
MAX_STEPS = 4
INNER, OUTER = 1, 2
A_MAX = 30.0              # arc width 4 e^-A stays ~1000 ulp above angles of size pi
LEAF_POINTS = 41          # odd, so u = 1/2 is a sample
GRID_TOL = 0.01


class WeldFailure(RuntimeError):
    """A sub-step could not be carried out; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FLEXWELD_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- configuration

@dataclass
class IterationConfig:
    h: CircleHomeo
    inner: Polyline
    outer: Polyline
    eps_seq: tuple
    certificate: LogSingularCertificate | None = None
    mode: str = "plain"
    steps: int = 3
    N_schedule: tuple = (16,)
    a_seq: tuple | None = None
    s: float | None = None
    A: float | None = None
    samples: int = 2048
    grid: int = 64
    shrink_target: float = 2.0 / 3.0
    shrink_accept: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 1 <= self.steps <= MAX_STEPS:
            raise ValueError(f"steps must lie in 1..{MAX_STEPS}")
        eps = np.asarray(self.eps_seq, dtype=float)
        if eps.size < self.steps or np.any(~np.isfinite(eps)) or np.any(eps <= 0):
            raise ValueError("eps_seq needs one finite positive entry per step")
        if not np.isfinite(np.prod(1.0 + eps)):
            raise ValueError("product of (1 + eps_n) is not finite")
        if not self.N_schedule or any(int(n) < 8 for n in self.N_schedule):
            raise ValueError("N_schedule entries must be at least 8")
        if self.mode == "positive_area":
            a = np.asarray(self.a_seq if self.a_seq is not None else [], dtype=float)
            if a.size < self.steps or np.any(a <= 0) or np.any(a >= 1):
                raise ValueError("positive_area mode needs a_seq in (0,1), one per step")
            if not np.prod(a) > 0:
                raise ValueError("product of a_n must be positive")
        if self.mode == "dim_s" and not (self.s is not None and 1.0 < self.s < 2.0):
            raise ValueError("dim_s mode needs s in (1, 2)")
        if self.A is not None and not self.A > max(int(n) for n in self.N_schedule):
            raise ValueError("A must exceed every N")

    def N(self, n: int) -> int:
        return int(self.N_schedule[min(n, len(self.N_schedule) - 1)])

    def budget(self, n: int | None = None) -> float:
        k = self.steps if n is None else n
        return float(np.prod(1.0 + np.asarray(self.eps_seq[:k], dtype=float)))

    def to_json(self) -> dict:
        out = {"mode": self.mode, "steps": self.steps, "eps_seq": [float(e) for e in self.eps_seq],
               "N_schedule": [int(n) for n in self.N_schedule], "A": self.A,
               "samples": self.samples, "grid": self.grid, "shrink_target": self.shrink_target,
               "shrink_accept": self.shrink_accept, "seed": self.seed,
               "h": self.h.to_json(), "inner": self.inner.to_json(), "outer": self.outer.to_json(),
               "budget": self.budget()}
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_json()
        if self.a_seq is not None:
            out["a_seq"] = [float(a) for a in self.a_seq]
        if self.s is not None:
            out["s"] = self.s
        return out


def concentric_config(h: CircleHomeo, r_inner: float = 1.0, r_outer: float = 40.0,
                      vertices: int = 256, **kw) -> IterationConfig:
    from .core_geom import circle_polyline
    eps = kw.pop("eps_seq", (0.5,) * kw.get("steps", 3))
    return IterationConfig(h=h, inner=circle_polyline(r_inner, vertices),
                           outer=circle_polyline(r_outer, vertices), eps_seq=tuple(eps), **kw)


# ---------------------------------------------------------------- initial maps

class _ArcLength:
    """Closed polyline parameterized proportionally to arc length from vertex 0."""

    def __init__(self, poly: Polyline):
        v = poly.vertices
        if poly.signed_area() < 0:
            v = np.roll(v[::-1], 1)
        self.v = np.append(v, v[0])
        s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(self.v)))])
        self.s = s / s[-1]

    def __call__(self, theta):
        q = np.mod(np.asarray(theta, dtype=float) / TWO_PI, 1.0)
        return np.interp(q, self.s, self.v.real) + 1j * np.interp(q, self.s, self.v.imag)


def _star_shaped(poly: Polyline) -> bool:
    v = poly.vertices
    a = np.unwrap(np.angle(v))
    d = np.diff(np.append(a, a[0] + np.sign(a[-1] - a[0]) * TWO_PI))
    return bool(np.all(d > 0) or np.all(d < 0))


# ---------------------------------------------------------------- per-sector maps

@dataclass
class SectorMap:
    index: int
    lo: float
    hi: float
    rho: float
    W: object
    Q: object
    quad: MarkedQuadrilateral
    sigma: np.ndarray
    shape: object
    corrector: object
    report: object
    p: object
    K_B: float
    K_scale: float
    scale: float

    @property
    def T(self) -> float:
        return float(self.Q.modulus)

    @property
    def R(self) -> float:
        return float(self.W.modulus)

    @property
    def K(self) -> float:
        return max(self.K_B, self.report.measured_K) * self.K_scale

    def bend(self, xi, eta):
        eta = np.clip(eta, 0.0, 1.0)
        lam = np.clip(1.0 - xi, 0.0, 1.0)
        return eta + lam * (self.p(eta) - eta)

    def apply(self, w):
        r = self.W.forward(w)
        xi = np.clip(r.real, 0.0, self.R)
        eta = self.bend(xi, r.imag)
        z = self.corrector(xi * self.scale + 1j * eta)
        T = self.T
        z = np.clip(z.real, 0.0, T) + 1j * np.clip(z.imag, 0.0, 1.0)
        return self.Q.inverse(z)

    def to_json(self) -> dict:
        return {"index": self.index, "lo": self.lo, "hi": self.hi, "rho": self.rho,
                "T": self.T, "R_sector": self.R, "R_shape": float(self.shape.R),
                "shape": self.shape.family, "K_bend": self.K_B, "K_scale": self.K_scale,
                "K": self.K, "admissibility": self.report.to_json(),
                "W_residual": float(self.W.residual), "Q_residual": float(self.Q.residual)}


def _bend_dilatation(p, n: int = 129) -> float:
    xi = np.linspace(0.0, 1.0, n)
    eta = np.linspace(0.0, 1.0, 4 * n)
    X, Y = np.meshgrid(xi, eta, indexing="ij")
    lam = 1.0 - X
    fx = 1.0 - 1j * (p(Y) - Y)
    fy = 1j * (1.0 + lam * (p(Y, 1) - 1.0))
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    mu = float(np.max(np.abs(fzb / fz)))
    if not mu < 1:
        return float("inf")
    return (1.0 + mu) / (1.0 - mu)


@dataclass
class StepMap:
    sd: object
    beta: float
    t: float
    edges: np.ndarray
    sectors: list
    rho: np.ndarray
    weights: np.ndarray
    E: ArcSet

    def phi(self, z):
        rot = np.exp(1j * self.beta)
        return rot * self.sd.interior(np.asarray(z, dtype=complex) / rot)

    def sector_of(self, w):
        ang = np.mod(np.angle(w) - self.edges[0], TWO_PI) + self.edges[0]
        j = np.searchsorted(self.edges, ang, side="right") - 1
        return np.clip(j, 0, len(self.sectors) - 1)

    def psi(self, side, n: int, w):
        w = np.asarray(w, dtype=complex)
        out = np.empty(w.shape, dtype=complex)
        j = self.sector_of(w)
        inner = np.abs(w) <= self.rho[j]
        if np.any(inner):
            out[inner] = side.interior(n, w[inner])
        for k, sec in enumerate(self.sectors):
            sel = (~inner) & (j == k)
            if np.any(sel):
                out[sel] = sec.apply(w[sel])
        return out

    def to_json(self) -> dict:
        return {"beta": self.beta, "t": self.t, "edges": [float(e) for e in self.edges],
                "rho": [float(r) for r in self.rho], "E": self.E.to_json(),
                "sectors": [s.to_json() for s in self.sectors]}


class Side:
    """One side of the welding: a map of the disk into its (possibly inverted) plane."""

    def __init__(self, name: str, base):
        self.name = name
        self.base = base
        self.levels: list = []

    def to_plane(self, z):
        z = np.asarray(z, dtype=complex)
        return z if self.name == "f" else 1.0 / z

    from_plane = to_plane

    def welding_angle(self, x, h: CircleHomeo):
        """Side angle of the boundary point paired with ``x``."""
        return np.asarray(x, dtype=float) if self.name == "f" else -h.lift(x)

    def interior(self, n: int, z):
        z = np.asarray(z, dtype=complex)
        if n == 0:
            return np.abs(z) * self.base(np.angle(z))
        lev = self.levels[n - 1]
        return lev.psi(self, n - 1, lev.phi(lev.t * z))

    def boundary(self, n: int, theta):
        theta = np.asarray(theta, dtype=float)
        if n == 0:
            return self.base(theta)
        return self.interior(n, np.exp(1j * theta))


# ---------------------------------------------------------------- annulus coordinates

@dataclass
class AnnulusCoords:
    """Conformal coordinates ``u + i v`` of a doubly connected polygon.

    ``u`` is 0 on the inner curve and 1 on the outer one; ``v`` is its
    conjugate, multivalued with period ``P`` (cut along the positive real axis).
    """
    points: np.ndarray
    tris: np.ndarray
    u: np.ndarray
    v: np.ndarray
    P: float
    energy: float
    inner: Polyline
    outer: Polyline
    _fwd: object = field(default=None, repr=False)
    _inv: object = field(default=None, repr=False)

    def _tri_v(self, tri):
        vt = self.v[self.tris[tri]]
        top = vt.max(axis=-1, keepdims=True)
        return vt + self.P * (vt < top - 0.5 * self.P)

    def forward(self, z):
        if self._fwd is None:
            self._fwd = TriLocator(self.points, self.tris)
        zz = np.atleast_1d(np.asarray(z, dtype=complex))
        tri, b, _ = self._fwd.locate(np.c_[zz.real, zz.imag])
        g = self._fwd.tris[tri]
        u = (b * self.u[g]).sum(-1)
        vt = self.v[g]
        top = vt.max(axis=-1, keepdims=True)
        vt = vt + self.P * (vt < top - 0.5 * self.P)
        v = (b * vt).sum(-1)
        return u + 1j * np.mod(v, self.P)

    def inverse(self, w):
        if self._inv is None:
            g = self.tris
            vt = self.v[g]
            top = vt.max(axis=-1, keepdims=True)
            vt = vt + self.P * (vt < top - 0.5 * self.P)
            low = vt.min(axis=-1, keepdims=True)
            vt = vt - low + np.mod(low, self.P)
            ut = self.u[g]
            zt = self.points[g]
            pts, vals = [], []
            for shift in (-self.P, 0.0, self.P):
                pts.append(np.stack([ut, vt + shift], -1).reshape(-1, 2))
                vals.append(zt.reshape(-1, 2))
            m = len(g)
            tri = np.arange(3 * m).reshape(m, 3)
            tris = np.vstack([tri + 3 * m * k for k in range(3)])
            self._inv = (TriLocator(np.vstack(pts), tris), np.vstack(vals))
        loc, vals = self._inv
        ww = np.atleast_1d(np.asarray(w, dtype=complex))
        q = np.c_[np.clip(ww.real, 0.0, 1.0), np.mod(ww.imag, self.P)]
        tri, b, _ = loc.locate(q)
        z = np.einsum("ni,nij->nj", b, vals[loc.tris[tri]])
        return z[:, 0] + 1j * z[:, 1]


def _distance_refine(out, inner_pts, h0, passes=3):
    import triangle as tr
    tree = cKDTree(inner_pts)
    for _ in range(passes):
        cen = out["vertices"][out["triangles"]].mean(1)
        d, _ = tree.query(cen)
        out["triangle_max_area"] = 0.5 * (0.35 * d + h0) ** 2
        out = tr.triangulate(out, "rpq30aQ")
    return out


def annulus_coordinates(inner: Polyline, outer: Polyline, target_triangles: int = 12000) -> AnnulusCoords:
    import triangle as tr
    for name, c in (("inner", inner), ("outer", outer)):
        if not c.is_simple():
            raise WeldFailure("annulus", f"{name} boundary is not simple")
    if not np.all(outer.contains(inner.vertices)):
        raise WeldFailure("annulus", "inner boundary is not inside the outer one")
    if not _loops_disjoint(inner, outer):
        raise WeldFailure("annulus", "annulus boundaries intersect")
    if not inner.contains(np.array([0j]))[0]:
        raise WeldFailure("annulus", "the origin must lie inside the inner boundary")
    loops = [np.c_[c.vertices.real, c.vertices.imag] for c in (inner, outer)]
    marks = [np.full(len(inner.vertices), INNER), np.full(len(outer.vertices), OUTER)]
    h_in = float(np.median(np.abs(np.diff(inner.vertices))))
    area = abs(outer.signed_area()) - abs(inner.signed_area())
    mesh = _triangulate(loops, marks, [[0.0, 0.0]], area / target_triangles)
    data = {"vertices": mesh.points, "triangles": mesh.tris, "segments": mesh.bedges,
            "segment_markers": mesh.bmarks[:, None].astype(np.int32), "holes": np.array([[0.0, 0.0]])}
    data = _distance_refine(data, loops[0], h_in)
    pts = data["vertices"]
    tris = data["triangles"].astype(int)
    segs = data["segments"].astype(int)
    sm = data["segment_markers"].ravel().astype(int)
    zero = np.zeros(len(pts), dtype=bool)
    one = np.zeros(len(pts), dtype=bool)
    zero[segs[sm == INNER].ravel()] = True
    one[segs[sm == OUTER].ravel()] = True
    from .modulus import Mesh
    m = Mesh(pts, tris, segs, sm)
    u, energy = solve_dirichlet(m, zero, one)
    v, P = _periodic_conjugate(pts, tris, u)
    return AnnulusCoords(pts, tris, u, v, P, energy, inner, outer)


def _periodic_conjugate(points, tris, u):
    """Conjugate ``v`` (grad v = rot90 grad u) with unknown period across the cut."""
    g, _ = gradients(points, tris, u)
    rot = np.c_[-g[:, 1], g[:, 0]]
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    owner = np.tile(np.arange(len(tris)), 3)
    key = np.sort(edges, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    d = points[key[:, 1]] - points[key[:, 0]]
    inc = (rot[owner] * d).sum(1)
    target = np.bincount(inv, weights=inc, minlength=len(uniq)) / np.bincount(inv, minlength=len(uniq))
    a, b = points[uniq[:, 0]], points[uniq[:, 1]]
    # crossing the positive real axis from below to above is the counterclockwise cut
    cross = (a[:, 1] < 0) != (b[:, 1] < 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = a[:, 0] + (b[:, 0] - a[:, 0]) * (-a[:, 1]) / (b[:, 1] - a[:, 1])
    cross &= xint > 0
    sgn = np.where(cross, np.where(b[:, 1] >= 0, 1.0, -1.0), 0.0)
    m, n = len(uniq), len(points)
    rows = np.r_[np.arange(m), np.arange(m), np.flatnonzero(cross)]
    cols = np.r_[uniq[:, 0], uniq[:, 1], np.full(int(cross.sum()), n)]
    vals = np.r_[-np.ones(m), np.ones(m), sgn[cross]]
    D = sp.csr_matrix((vals, (rows, cols)), shape=(m, n + 1))
    keep = np.ones(n + 1, dtype=bool)
    keep[0] = False
    Dk = D[:, keep]
    sol = spl.spsolve((Dk.T @ Dk).tocsc(), Dk.T @ target)
    v = np.r_[0.0, sol[:-1]]
    P = float(sol[-1])
    v = np.mod(v - v.min(), P)
    return v, P


# ---------------------------------------------------------------- state

@dataclass
class FoliationSnapshot:
    leaves: list
    midpoints: np.ndarray
    midcurve: Polyline
    x_points: np.ndarray
    v_f: np.ndarray
    v_g: np.ndarray
    coords: AnnulusCoords = field(repr=False)
    half: int = LEAF_POINTS // 2

    def leaf_lengths(self) -> np.ndarray:
        return np.array([lf.length() for lf in self.leaves])

    def sigma(self, k: int, direction: int = 1, n: int = 33) -> np.ndarray:
        """Midcurve piece from ``y_k`` to the next leaf (``direction`` +1) or previous (-1)."""
        m = 0.5 * (self.v_f + self.v_g)
        N = len(m)
        k2 = (k + direction) % N
        P = self.coords.P
        a = m[k]
        b = m[k2]
        if direction > 0:
            b = a + np.mod(b - a, P)
        else:
            b = a - np.mod(a - b, P)
        z = self.coords.inverse(0.5 + 1j * np.linspace(a, b, n))
        z[0], z[-1] = self.midpoints[k], self.midpoints[k2]
        return z

    def to_json(self) -> dict:
        return {"x_points": [float(x) for x in self.x_points],
                "leaf_lengths": [float(x) for x in self.leaf_lengths()],
                "midpoints": [[float(z.real), float(z.imag)] for z in self.midpoints],
                "period": self.coords.P, "energy": self.coords.energy}


@dataclass
class IterationState:
    config: IterationConfig
    step: int
    f_side: Side
    g_side: Side
    x: np.ndarray
    f: np.ndarray
    g: np.ndarray
    annulus: tuple
    mismatch: np.ndarray
    quads: list = field(default_factory=list)
    leaf_lengths: np.ndarray | None = None
    ledger: list = field(default_factory=list)
    K: float = 1.0
    area: float = 0.0
    E_used: dict = field(default_factory=dict)
    pending: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    @property
    def sup_mismatch(self) -> float:
        return float(self.mismatch.max())

    def cert_samples(self, per_arc: int = 48) -> np.ndarray:
        cert = self.config.certificate
        if cert is None or cert.E_n.empty:
            return self.x
        out = []
        for (lo, hi), w in zip(cert.E_n.arcs, cert.E_n.widths):
            out.append(lo + w * (np.arange(per_arc) + 0.5) / per_arc)
        return np.concatenate(out)

    def decay_samples(self, pend: dict, per_arc: int = 48) -> np.ndarray:
        """Where the leaf decay is measured: the certificate set, else the shared slit arcs."""
        cert = self.config.certificate
        if cert is not None and not cert.E_n.empty:
            return self.cert_samples(per_arc)
        Ef, Eg = pend["f"].E, pend["g"].E
        xs = np.concatenate([lo + w * (np.arange(per_arc) + 0.5) / per_arc
                             for (lo, hi), w in zip(Ef.arcs, Ef.widths)])
        both = Eg.contains(np.mod(self.g_side.welding_angle(xs, self.config.h), TWO_PI), tol=0.0)
        return xs[both] if np.any(both) else xs

    def pair(self, n: int, x):
        """``f_n(x)`` and ``g_n(h(x))`` in the plane."""
        h = self.config.h
        fx = self.f_side.from_plane(self.f_side.boundary(n, self.f_side.welding_angle(x, h)))
        gx = self.g_side.from_plane(self.g_side.boundary(n, self.g_side.welding_angle(x, h)))
        return fx, gx

    def to_json(self) -> dict:
        return {"step": self.step, "sup_mismatch": self.sup_mismatch, "K": self.K,
                "area": self.area, "ledger": self.ledger}


def _curve(side: Side, n: int, count: int, rounds: int = 12, max_points: int = 40000) -> Polyline:
    """Boundary image sampled by chord bisection (chords at most twice the mean uniform chord)."""
    th = TWO_PI * np.arange(count) / count
    z = side.from_plane(side.boundary(n, th))
    if n == 0:
        return Polyline(z, True)
    limit = 2.0 * np.abs(np.diff(np.append(z, z[0]))).sum() / count
    for _ in range(rounds):
        gap = np.abs(np.diff(np.append(z, z[0])))
        bad = np.flatnonzero(gap > limit)
        if bad.size == 0 or th.size + bad.size > max_points:
            break
        nxt = np.append(th[1:], th[0] + TWO_PI)
        mid = 0.5 * (th[bad] + nxt[bad])
        zm = side.from_plane(side.boundary(n, mid))
        th = np.concatenate([th, mid])
        z = np.concatenate([z, zm])
        order = np.argsort(th)
        th, z = th[order], z[order]
    return Polyline(z, True)


def _annulus_area(inner: Polyline, outer: Polyline) -> float:
    return float(abs(outer.signed_area()) - abs(inner.signed_area()))


def _refresh(state: IterationState):
    n = state.step
    cfg = state.config
    state.f, state.g = state.pair(n, state.x)
    state.mismatch = np.abs(state.f - state.g)
    inner = _curve(state.f_side, n, cfg.samples)
    outer = _curve(state.g_side, n, cfg.samples)
    if state.g_side.name == "g":
        outer = Polyline(outer.vertices[::-1], True)
    state.annulus = (inner, outer)
    state.area = _annulus_area(inner, outer)


def init(config: IterationConfig) -> IterationState:
    inner, outer = config.inner, config.outer
    for name, c in (("inner", inner), ("outer", outer)):
        if not c.closed or not c.is_simple():
            raise ValueError(f"{name} boundary must be a simple closed polyline")
    if not inner.contains(np.array([0j]))[0]:
        raise ValueError("the origin must lie inside the inner domain")
    if not np.all(outer.contains(inner.vertices)) or not _loops_disjoint(inner, outer):
        raise ValueError("overlapping closures: the inner curve must lie strictly inside the outer one")
    d = np.abs(inner.vertices[:, None] - outer.vertices[None, :]).min()
    if d <= 1e-12:
        raise ValueError("overlapping closures: the curves touch")
    for name, c in (("inner", inner), ("outer", outer)):
        if not _star_shaped(c):
            raise ValueError(f"{name} curve must be star-shaped about 0 (cone extension)")
    fb = _ArcLength(inner)
    gb_z = _ArcLength(outer)

    def gbase(theta):
        return 1.0 / gb_z(-np.asarray(theta, dtype=float))

    f_side = Side("f", fb)
    g_side = Side("g", gbase)
    x = TWO_PI * np.arange(config.samples) / config.samples
    st = IterationState(config, 0, f_side, g_side, x, None, None, (inner, outer), None)
    _refresh(st)
    st.history.append(_record(st, {}))
    return st


# ---------------------------------------------------------------- foliation

def _lift_increasing(v, P):
    out = np.array(v, dtype=float)
    for k in range(1, len(out)):
        out[k] = out[k - 1] + np.mod(out[k] - out[k - 1], P)
    return out


def _leaf_line(coords: AnnulusCoords, a, b, za, zb, n: int = LEAF_POINTS):
    u = 0.5 - 0.5 * np.cos(np.pi * np.linspace(0.0, 1.0, n))
    u[n // 2] = 0.5
    z = coords.inverse(u + 1j * (a + u * (b - a)))
    z[0], z[-1] = za, zb
    return z


def _polylines_cross(p: np.ndarray, q: np.ndarray) -> bool:
    for i in range(len(p) - 1):
        if np.any(_segments_intersect(p[i], p[i + 1], q[:-1], q[1:])):
            return True
    return False


def foliate(state: IterationState, x_points) -> FoliationSnapshot:
    x_points = np.asarray(x_points, dtype=float)
    if x_points.size < 3 or np.any(np.diff(x_points) <= 0) or x_points[-1] - x_points[0] >= TWO_PI:
        raise ValueError("x_points must increase within one turn")
    inner, outer = state.annulus
    coords = annulus_coordinates(inner, outer)
    fz, gz = state.pair(state.step, x_points)
    P = coords.P
    vf = _lift_increasing(coords.forward(fz).imag, P)
    vg = _lift_increasing(coords.forward(gz).imag, P)
    if vf[-1] - vf[0] >= P or vg[-1] - vg[0] >= P:
        raise WeldFailure("foliate", "leaf endpoints are not cyclically ordered")
    # the leaf through x_0 is the shortest of the candidate lifts
    shifts = vg[0] + P * np.arange(-2, 3) - vf[0]
    vg = vg + P * np.arange(-2, 3)[int(np.argmin(np.abs(shifts)))]
    leaves, mids = [], []
    for k in range(len(x_points)):
        z = _leaf_line(coords, vf[k], vg[k], fz[k], gz[k])
        leaves.append(z)
        mids.append(z[LEAF_POINTS // 2])
    for i in range(len(leaves)):
        for j in range(i + 1, len(leaves)):
            if _polylines_cross(leaves[i][1:-1], leaves[j][1:-1]):
                raise WeldFailure("foliate", f"leaves {i} and {j} cross")
    mc = coords.inverse(0.5 + 1j * np.linspace(0.0, P, 512, endpoint=False))
    return FoliationSnapshot([Polyline(z, closed=False) for z in leaves], np.array(mids),
                             Polyline(mc, True), x_points, vf, vg, coords)


def _side_order(side: Side, snap: FoliationSnapshot, h: CircleHomeo):
    ang = side.welding_angle(snap.x_points, h)
    order = np.argsort(np.mod(ang, TWO_PI), kind="stable")
    edges = np.mod(ang[order], TWO_PI)
    edges = np.append(edges, edges[0] + TWO_PI)
    return order, edges


def _half_leaf(side: Side, snap: FoliationSnapshot, k: int) -> np.ndarray:
    z = snap.leaves[k].vertices
    hz = z[:snap.half + 1] if side.name == "f" else z[snap.half:][::-1]
    return side.to_plane(hz)


def _refine_angles(fn, th: np.ndarray, factor: float = 1.0, rounds: int = 12, max_points: int = 4000):
    """Bisect angle intervals whose image chord exceeds ``factor`` times the mean chord."""
    z = fn(th)
    limit = factor * np.abs(np.diff(z)).sum() / (th.size - 1)
    for _ in range(rounds):
        bad = np.flatnonzero(np.abs(np.diff(z)) > limit)
        if bad.size == 0 or th.size + bad.size > max_points:
            break
        mid = 0.5 * (th[bad] + th[bad + 1])
        th = np.insert(th, bad + 1, mid)
        z = np.insert(z, bad + 1, fn(mid))
    return th, z


def _inner_arc(side: Side, n: int, lo: float, hi: float, rho: float, count: int = 64):
    """Adaptive samples of the previous map on the arc of radius ``rho`` (angles increasing)."""
    if rho < 1:
        fn = lambda t: side.interior(n, rho * np.exp(1j * t))
    else:
        fn = lambda t: side.boundary(n, t)
    return _refine_angles(fn, np.linspace(lo, hi, count))


def _side_quad(side: Side, n: int, lo: float, hi: float, half_lo, half_hi, sigma, rho: float,
               arc=None) -> MarkedQuadrilateral:
    _, zb = _inner_arc(side, n, lo, hi, rho) if arc is None else arc
    b2 = np.array(zb[::-1], dtype=complex)
    if rho < 1:
        r = np.linspace(rho, 1.0, 12)
        rad_lo = side.interior(n, r * np.exp(1j * lo))
        rad_hi = side.interior(n, r[::-1] * np.exp(1j * hi))
        rad_lo[-1] = half_lo[0]
        rad_hi[0] = half_hi[0]
        a1 = np.concatenate([rad_lo[:-1], half_lo])
        a2 = np.concatenate([half_hi[::-1], rad_hi[1:]])
    else:
        a1 = np.asarray(half_lo)
        a2 = np.asarray(half_hi)[::-1]
    b1 = np.array(sigma, dtype=complex)
    b1[0], b1[-1] = a1[-1], a2[0]
    b2[0], b2[-1] = a2[-1], a1[0]
    try:
        Q = MarkedQuadrilateral.from_sides(a1, b1, a2, b2)
    except ValueError as exc:
        raise WeldFailure("build_quads", f"quadrilateral is not positively oriented ({exc})") from None
    if not Q.boundary.is_simple():
        raise WeldFailure("build_quads", "non-simple Q_k")
    return Q


@dataclass
class QuadInfo:
    quad: MarkedQuadrilateral
    T: float
    lo: float
    hi: float
    leaves: tuple
    sigma: np.ndarray


def _quad_specs(state: IterationState, snap: FoliationSnapshot, side: Side, rho=None):
    h = state.config.h
    order, edges = _side_order(side, snap, h)
    N = len(order)
    specs = []
    for j in range(N):
        k_lo, k_hi = int(order[j]), int(order[(j + 1) % N])
        sig = side.to_plane(snap.sigma(k_lo, 1 if (k_hi - k_lo) % N == 1 else -1))
        r = 1.0 if rho is None else float(rho[j])
        specs.append((j, edges[j], edges[j + 1], _half_leaf(side, snap, k_lo),
                      _half_leaf(side, snap, k_hi), sig, r, (k_lo, k_hi)))
    return specs, edges


def build_quads(state: IterationState, snap: FoliationSnapshot, side: str = "f") -> list:
    """Q_k on one side (inner radius 1), each with its modulus ``T_k``."""
    sd = state.f_side if side == "f" else state.g_side
    specs, _ = _quad_specs(state, snap, sd)

    def one(sp_):
        j, lo, hi, hl, hh, sig, r, ks = sp_
        Q = _side_quad(sd, state.step, lo, hi, hl, hh, sig, r)
        return QuadInfo(Q, float(quad_uniformize(Q, 3000).modulus), lo, hi, ks, sig)

    return _pmap(one, specs)


# ---------------------------------------------------------------- shapes per mode

def _M_for_budget(eps: float) -> float:
    """Smallest real ``M > 1`` whose analytic admissibility bound is at most ``eps``."""
    f = lambda M: epsilon_bound(M) - eps
    if f(1.0 + 1e-9) <= 0:
        return 1.0 + 1e-6
    hi = 2.0
    while f(hi) > 0:
        hi *= 2.0
    return float(brentq(f, 1.0 + 1e-9, hi, xtol=1e-10))


def _plain_shape(T: float, R: float):
    if R < T * (1.0 - 1e-4):
        raise WeldFailure("shapes", f"sector length {R:.4g} below quadrilateral modulus {T:.4g}")
    base = rectangle_shape(T)
    if abs(R / T - 1.0) <= 1e-4:
        return base
    return retune_gap(base, R, rtol=1e-4)


def _dim_shape(T: float, R: float, M: float, s: float):
    block = 2.0 * M + 0.25
    width = T - block
    if width <= 0.2:
        raise WeldFailure("shapes", f"no room for corridors: T={T:.4g}, block {block:.4g}")
    layout = s_additive_squares(s)
    scale = min(width, 1.0) * 0.9
    off = complex(0.5 * (width - scale), 0.5 * (1.0 - scale))
    A = MarkedQuadrilateral.from_sides(np.array([0, width]), np.array([width, width + 1j]),
                                       np.array([width + 1j, 1j]), np.array([1j, 0]))
    cor = connect_squares(A, off + scale * layout.placements, scale * layout.x, delta=1e-3, s=s)
    g1 = np.concatenate([[0j], block + np.asarray(cor.gamma1.vertices)])
    g2 = np.concatenate([[1j], block + np.asarray(cor.gamma2.vertices)])
    spec = shape_from_paths(T, Polyline(g1, closed=False), Polyline(g2, closed=False))
    spec.family = {"kind": "corridors", "s": s, "cost": cor.cost, "width": cor.width}
    if abs(spec.R / R - 1.0) > 1e-3:
        raise WeldFailure("shapes", f"corridor shape modulus {spec.R:.4g} cannot match sector length {R:.4g}")
    return spec, cor


# ---------------------------------------------------------------- extension

def _sector_radius(sd, j_sd: int, j_next: int, owner: int) -> float:
    bm = sd.boundary_map
    sel = (bm["kind"] == "arc") & (bm["owner"] == owner)
    r_out = float(np.abs(bm["value"][sel]).min())
    r_tip = max(abs(sd.tips[j_sd]), abs(sd.tips[j_next]))
    if r_tip < 1.0 < r_out:
        return 1.0
    if not r_out > r_tip:
        raise WeldFailure("slit_map", f"sector outer boundary {r_out:.6g} below tip {r_tip:.6g}")
    return r_tip + 0.25 * (r_out - r_tip)


def _side_slit_domain(state: IterationState, side: Side, edges: np.ndarray, N: int, A: float):
    cfg = state.config
    beta = float(edges[0])
    rel = edges - beta
    weights = np.diff(rel) / TWO_PI
    cert = None
    if cfg.certificate is not None and not cfg.certificate.E_n.empty:
        En = cfg.certificate.E_n
        if side.name == "f":
            cert = En.rotate(-beta)
        else:
            F = homeo_image(cfg.h, arcset_complement(En))
            cert = ArcSet.from_arcs([(-hi, -lo) for lo, hi in F.arcs],
                                    widths=list(F.widths)).rotate(-beta)
    E = arcs_in_intervals(rel, A, cert)
    delta = min(0.05, 0.5 / N)
    sd = slit_map(E, SlitMapConfig(N, A, N, delta, samples=max(4096, 32 * N)), weights=weights)
    return sd, beta, weights, E.rotate(beta)


def _sector_quad_plane(sd, i: int, rho: float, beta: float):
    sq = sector_quad(sd, i, target_triangles=1500, inner_radius=rho)
    return sq.quad.transformed(np.exp(1j * beta), 0.0).swapped()


def _choose_shape(state: IterationState, mode: str, n: int, T: float, R: float, eps: float, a_shape):
    cfg = state.config
    M = _M_for_budget(eps)
    extra = {}
    if mode == "positive_area":
        spec = shape_with_leftover(eps, a_shape, T)
        M = float(spec.family["M"])
        if spec.R > R * (1 + 1e-4):
            raise WeldFailure("shapes", f"leftover shape modulus {spec.R:.4g} above sector length {R:.4g}")
        if abs(spec.R / R - 1) > 1e-4:
            spec = retune_gap(spec, R, rtol=1e-4)
        return spec, M, extra
    if not 2.0 * M < T:
        raise WeldFailure("shapes", f"T_k={T:.4g} leaves no room for M={M:.4g} (need 2M < T)")
    if mode == "dim_s":
        spec, cor = _dim_shape(T, R, M, cfg.s)
        extra["corridors"] = cor
        return spec, M, extra
    return _plain_shape(T, R), M, extra


def _build_sector(state, side, n, W, spec_item, rho, eps, mode, a_shape):
    j, lo, hi, hl, hh, sig, _, ks = spec_item
    th, zb = _inner_arc(side, n, lo, hi, rho)
    Qq = _side_quad(side, n, lo, hi, hl, hh, sig, rho, arc=(th, zb))
    Q = quad_uniformize(Qq, 3000)
    T, R = float(Q.modulus), float(W.modulus)
    shape, M, _ = _choose_shape(state, mode, n, T, R, eps, a_shape)
    rep, cor = admissibility(shape, M, grid=state.config.grid, samples=6000)
    if rep.identity_error > 1e-3 or rep.leakage > 1e-9:
        raise WeldFailure("admissibility", f"sector {j}: identity {rep.identity_error:.3g}, "
                          f"leakage {rep.leakage:.3g}")
    eta_w = W.forward(rho * np.exp(1j * th)).imag
    eta_q = Q.forward(zb).imag
    eta_w[0], eta_w[-1], eta_q[0], eta_q[-1] = 0.0, 1.0, 0.0, 1.0
    eta_w = np.maximum.accumulate(np.clip(eta_w, 0.0, 1.0))
    eta_q = np.maximum.accumulate(np.clip(eta_q, 0.0, 1.0))
    keep = np.r_[True, np.diff(eta_w) > 1e-12]
    keep[-1] = True
    ew, eq = eta_w[keep], eta_q[keep]
    if ew[-2] >= 1.0:
        ew, eq = np.r_[ew[:-2], ew[-1]], np.r_[eq[:-2], eq[-1]]
    p = PchipInterpolator(ew, eq)
    K_B = _bend_dilatation(p)
    scale = float(shape.R) / R
    K_s = max(scale, 1.0 / scale)
    return SectorMap(j, float(lo), float(hi), float(rho), W, Q, Qq, sig, shape, cor, rep, p, K_B, K_s, scale)


def _sector_tables(sd, beta: float):
    N = sd.config.N
    rho = np.array([_sector_radius(sd, (j - 1) % N, j % N, j) for j in range(N)])

    def one(j):
        try:
            return quad_uniformize(_sector_quad_plane(sd, (j - 1) % N, rho[j], beta), 3000)
        except ValueError as exc:
            w = float(sd.slit_angles[j % N] - sd.slit_angles[(j - 1) % N]) % TWO_PI
            raise WeldFailure("slit_map", f"sector {j} (angular width {w:.3g}, inner radius {rho[j]:.4g}) "
                              f"has no usable quadrilateral: {exc}") from None

    return rho, _pmap(one, range(N))


def slit_domain_for(state: IterationState, side: Side, edges, N: int, T_max: float, margin: float = 0.03):
    """Slit domain whose shortest sector is ``(1 + margin) T_max`` long (secant in ``A``).

    A fixed ``config.A`` is used as given.
    """
    cfg = state.config
    if cfg.A is not None:
        sd, beta, w, E = _side_slit_domain(state, side, edges, N, cfg.A)
        return (sd, beta, w, E) + _sector_tables(sd, beta) + (cfg.A,)
    target = (1.0 + margin) * T_max
    A = max(N + 0.5, np.pi * (target + 1.0))
    for _ in range(4):
        if A > A_MAX:
            raise WeldFailure("slit_map", f"sector length {target:.4g} needs A ~ {A:.4g}; arcs of width "
                              f"4 exp(-A) are below double precision for A > {A_MAX:g}")
        sd, beta, w, E = _side_slit_domain(state, side, edges, N, A)
        rho, W = _sector_tables(sd, beta)
        R_min = min(t.modulus for t in W)
        if abs(R_min / target - 1.0) < 0.5 * margin or (A <= N + 0.5 and R_min > target):
            break
        A = max(N + 0.5, A + np.pi * (target - R_min))
    return sd, beta, w, E, rho, W, A


def extend_step(state: IterationState, side_name: str, sd, beta: float, snap: FoliationSnapshot,
                eps: float, a_shape: float | None = None, weights=None, E=None,
                tables=None) -> StepMap:
    """Extension ``psi`` for one side; returns the pending step map (t = 1)."""
    side = state.f_side if side_name == "f" else state.g_side
    n = state.step
    specs, edges = _quad_specs(state, snap, side)
    N = len(specs)
    if sd.config.N != N:
        raise WeldFailure("extend", "sector count of the slit domain differs from the quadrilateral count")
    rho, W = tables if tables is not None else _sector_tables(sd, beta)
    mode = state.config.mode
    items = [(s_, rho[s_[0]], W[s_[0]]) for s_ in specs]
    sectors = _pmap(lambda it: _build_sector(state, side, n, it[2], it[0], it[1], eps, mode, a_shape),
                    items)
    return StepMap(sd, beta, 1.0, edges, sectors, rho, weights, E)


def _extension_error(side: Side, n: int, lev: StepMap, count: int = 64) -> tuple:
    """Sup distance between the new and old maps on the retained arcs.

    Returns (plane, chart): the first is measured in the z-plane, the second
    in the side's own chart (1/z for the exterior side).
    """
    plane = chart = 0.0
    for sec in lev.sectors:
        th = np.linspace(sec.lo, sec.hi, count)[1:-1]
        pts = sec.rho * np.exp(1j * th)
        a = sec.apply(pts)
        b = side.interior(n, pts) if sec.rho < 1 else side.boundary(n, th)
        chart = max(chart, float(np.abs(a - b).max()))
        plane = max(plane, float(np.abs(side.from_plane(a) - side.from_plane(b)).max()))
    return plane, chart


def _containment(side: Side, lev: StepMap, count: int = 300) -> dict:
    worst, outside, on_sigma = 0.0, 0, 0.0
    for sec in lev.sectors:
        dom = sec.W.domain
        sel = np.linspace(0, len(dom) - 1, min(count, len(dom))).astype(int)
        img = sec.apply(dom[sel])
        poly = sec.quad.boundary
        ins = poly.contains(img)
        diam = float(np.ptp(poly.vertices.real) + np.ptp(poly.vertices.imag))
        if np.any(~ins):
            d = _dist_to_polyline(img[~ins], poly.vertices, closed=True) / diam
            worst = max(worst, float(d.max()))
            outside += int(np.sum(d > 1e-6))
        far = np.abs(sec.W.image.real - sec.R) < 1e-9
        if np.any(far):
            im = sec.apply(sec.W.domain[far])
            d = _dist_to_polyline(im, sec.sigma, closed=False) / diam
            on_sigma = max(on_sigma, float(d.max()))
    return {"max_outside_rel": worst, "points_outside": outside, "far_side_to_sigma_rel": on_sigma}


def _dist_to_polyline(q, verts, closed: bool):
    v = np.asarray(verts)
    a = v if closed else v[:-1]
    b = np.roll(v, -1) if closed else v[1:]
    d = b - a
    t = np.real((q[:, None] - a[None]) * np.conj(d[None])) / np.maximum(np.abs(d[None]) ** 2, 1e-300)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(q[:, None] - (a[None] + t * d[None])).min(axis=1)


# ---------------------------------------------------------------- shrink

def _leaf_lengths_at(snap: FoliationSnapshot, fz, gz) -> np.ndarray:
    c = snap.coords
    P = c.P
    vf = c.forward(fz).imag
    vg = c.forward(gz).imag
    # same lift as the marked leaves: offset closest to the one at x_0
    ref = snap.v_g[0] - snap.v_f[0]
    vg = vf + ref + np.mod(vg - vf - ref + 0.5 * P, P) - 0.5 * P
    out = np.empty(len(fz))
    for i in range(len(fz)):
        z = _leaf_line(c, vf[i], vg[i], fz[i], gz[i], 21)
        out[i] = np.abs(np.diff(z)).sum()
    return out


def _pair_at(state: IterationState, t: float, x) -> tuple:
    h = state.config.h
    out = []
    for side, lev in ((state.f_side, state.pending["f"]), (state.g_side, state.pending["g"])):
        th = side.welding_angle(x, h)
        w = lev.phi(t * np.exp(1j * th))
        out.append(side.from_plane(lev.psi(side, state.step, w)))
    return out[0], out[1]


def shrink(state: IterationState, target_ratio: float, snap: FoliationSnapshot,
           accept: float | None = None, iters: int = 40) -> IterationState:
    """Bisection on ``t`` until leaf lengths on the certificate set drop by ``target_ratio``."""
    accept = state.config.shrink_accept if accept is None else accept
    xs = state.decay_samples(state.pending)
    f0, g0 = state.pair(state.step, xs)
    l_old = _leaf_lengths_at(snap, f0, g0)

    def ratio(t):
        f1, g1 = _pair_at(state, t, xs)
        new = np.abs(f1 - g1)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(l_old > 1e-14, new / l_old, np.where(new > 1e-14, np.inf, 0.0))
        return float(r.max())

    lo, hi = 0.5, 1.0 - 1e-9
    r_hi = ratio(hi)
    best = (hi, r_hi)
    if r_hi > accept:
        state.pending["shrink"] = {"t": hi, "ratio": r_hi, "ok": False}
        raise WeldFailure("shrink", f"best leaf ratio {r_hi:.4g} at t={hi:.10g} exceeds {accept}")
    r_lo = ratio(lo)
    if r_lo <= target_ratio:
        best = (lo, r_lo)
    elif r_hi > target_ratio:
        best = (hi, r_hi)
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            rm = ratio(mid)
            if rm <= target_ratio:
                hi, best = mid, (mid, rm)
            else:
                lo = mid
            if hi - lo < 1e-10:
                break
    t, r = best
    state.pending["shrink"] = {"t": float(t), "ratio": float(r), "ok": True,
                               "target": float(target_ratio), "accept": float(accept)}
    return state


# ---------------------------------------------------------------- run

def astala_bound(K: float, d: float, C: float | None = None):
    """Upper bound for the dimension of a K-quasiconformal image of a set of dimension ``d``.

    With ``C`` given, also returns the small-dilatation band
    ``(d / (1 + C k), (1 + C k) d)`` with ``k = (K - 1)/(K + 1)``, capped to [0, 2].
    """
    if not K >= 1:
        raise ValueError("K must be at least 1")
    if not 0.0 <= d <= 2.0:
        raise ValueError("d must lie in [0, 2]")
    val = 2.0 * K * d / (2.0 + (K - 1.0) * d)
    if C is None:
        return val
    if C < 0:
        raise ValueError("C must be nonnegative")
    k = (K - 1.0) / (K + 1.0)
    return val, (d / (1.0 + C * k), min(2.0, (1.0 + C * k) * d))


def _annulus_covering(inner: Polyline, outer: Polyline, n: int) -> dict:
    """Disks over the grid boxes meeting the annulus; cheapest box size wins."""
    s = 1.0 + 1.0 / n
    zs = outer.vertices
    x0, x1 = zs.real.min(), zs.real.max()
    y0, y1 = zs.imag.min(), zs.imag.max()
    best = None
    span = max(x1 - x0, y1 - y0)
    for k in range(3, 10):
        b = span / 2 ** k
        xs = x0 + b * (np.arange(int(np.ceil((x1 - x0) / b))) + 0.5)
        ys = y0 + b * (np.arange(int(np.ceil((y1 - y0) / b))) + 0.5)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        c = (X + 1j * Y).ravel()
        inside = outer.contains(c) & ~inner.contains(c)
        near = np.zeros(c.size, dtype=bool)
        for curve in (inner, outer):
            v = curve.resample(max(len(curve), int(curve.length() / (0.5 * b)) + 1)).vertices
            ix = np.floor((v.real - x0) / b).astype(int)
            iy = np.floor((v.imag - y0) / b).astype(int)
            ok = (ix >= 0) & (ix < xs.size) & (iy >= 0) & (iy < ys.size)
            near[ix[ok] * ys.size + iy[ok]] = True
        count = int(np.sum(inside | near))
        r = b / np.sqrt(2.0)
        cost = count * r ** s
        if best is None or cost < best["cost"]:
            best = {"box": b, "radius": r, "count": count, "cost": cost}
    best["s"] = s
    best["budget"] = 2.0 ** (-n)
    best["passes"] = bool(best["cost"] <= best["budget"])
    return best


def _record(state: IterationState, extra: dict) -> dict:
    xs = state.cert_samples()
    f, g = state.pair(state.step, xs)
    rec = {"step": state.step, "sup_mismatch": state.sup_mismatch,
           "sup_mismatch_cert": float(np.abs(f - g).max()), "area": state.area, "K": state.K,
           "inner_vertices": len(state.annulus[0]), "outer_vertices": len(state.annulus[1])}
    rec.update(extra)
    return rec


def _step_once(state: IterationState, n: int, snap: FoliationSnapshot, a_shape):
    cfg = state.config
    eps = float(cfg.eps_seq[n])
    pend = {}
    if "T_max" not in state.pending:
        state.pending["T_max"] = max(q.T for nm in ("f", "g") for q in build_quads(state, snap, nm))
    T_max = state.pending["T_max"]
    for side in (state.f_side, state.g_side):
        _, edges = _side_order(side, snap, cfg.h)
        sd, beta, weights, E, rho, W, A = slit_domain_for(state, side, edges, len(snap.x_points), T_max)
        pend[side.name] = extend_step(state, side.name, sd, beta, snap, eps, a_shape, weights, E,
                                      tables=(rho, W))
        pend[side.name + "_A"] = A
    state.pending.update(pend)
    shrink(state, cfg.shrink_target, snap)
    return pend


def _commit(state: IterationState, pend: dict, snap: FoliationSnapshot) -> dict:
    t = state.pending["shrink"]["t"]
    n = state.step
    info = {}
    for side in (state.f_side, state.g_side):
        lev = pend[side.name]
        lev.t = t
        plane, chart = _extension_error(side, n, lev)
        info[side.name] = {"extension_error": plane, "extension_error_chart": chart,
                           "containment": _containment(side, lev),
                           "K_step": max(s.K for s in lev.sectors),
                           "T": [s.T for s in lev.sectors], "R": [s.R for s in lev.sectors]}
        side.levels.append(lev)
    xs = state.decay_samples(pend)
    prev_f = state.f.copy()
    prev_mis = state.sup_mismatch
    prev_area = state.area
    state.step = n + 1
    state.E_used = {k: pend[k].E for k in ("f", "g")}
    _refresh(state)
    fd, gd = state.pair(state.step, xs)
    decay = float(np.abs(fd - gd).max())
    K_step = max(info["f"]["K_step"], info["g"]["K_step"])
    state.K = max(state.K, K_step)
    budget = state.config.budget(state.step)
    entry = {"step": state.step, "K_step": K_step, "K": state.K, "budget": budget,
             "within_budget": bool(state.K <= budget * (1.0 + GRID_TOL))}
    state.ledger.append(entry)
    return {"t": t, "shrink_ratio": state.pending["shrink"]["ratio"], "decay_mismatch": decay,
            "decay_samples": int(xs.size),
            "mismatch_ratio": state.sup_mismatch / prev_mis if prev_mis > 0 else 0.0,
            "area_ratio": state.area / prev_area if prev_area > 0 else 0.0,
            "f_change": float(np.abs(state.f - prev_f).max()),
            "extension_error": max(info["f"]["extension_error"], info["g"]["extension_error"]),
            "extension_error_chart": max(info["f"]["extension_error_chart"],
                                         info["g"]["extension_error_chart"]),
            "containment": {k: info[k]["containment"] for k in info},
            "T_min": min(min(info[k]["T"]) for k in info), "T_max": max(max(info[k]["T"]) for k in info),
            "R_min": min(min(info[k]["R"]) for k in info),
            "leaf_lengths": [float(x) for x in snap.leaf_lengths()], "ledger": entry}


@dataclass
class CurveTrace:
    config: dict
    steps: list = field(default_factory=list)
    annuli: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    failure: dict | None = None
    final_curve: Polyline | None = None
    fitted_C: float | None = None
    coverings: list = field(default_factory=list)
    mismatch_tables: list = field(default_factory=list)

    @property
    def mismatch(self) -> list:
        return [s["sup_mismatch"] for s in self.steps]

    @property
    def areas(self) -> list:
        return [s["area"] for s in self.steps]

    def ratios(self) -> list:
        m = self.mismatch
        return [m[i + 1] / m[i] if m[i] > 0 else 0.0 for i in range(len(m) - 1)]

    def to_json(self) -> dict:
        out = {"config": self.config, "steps": self.steps, "failure": self.failure,
               "fitted_C": self.fitted_C, "coverings": self.coverings,
               "mismatch_ratios": self.ratios()}
        if self.final_curve is not None:
            out["final_curve"] = self.final_curve.to_json()
        return out

    def dumps(self) -> str:
        return json.dumps(_plain(self.to_json()), indent=1, sort_keys=True)

    def mismatch_csv(self) -> str:
        lines = ["step,x,mismatch"]
        for n, (x, m) in enumerate(self.mismatch_tables):
            lines.extend(f"{n},{a:.12g},{b:.12g}" for a, b in zip(x, m))
        return "\n".join(lines) + "\n"

    def to_svg(self, step: int, size: int = 640) -> str:
        inner, outer = self.annuli[step]
        R = float(np.abs(outer.vertices).max()) * 1.05
        sc = size / (2 * R)

        def pts(z):
            return " ".join(f"{(p.real + R) * sc:.2f},{(R - p.imag) * sc:.2f}" for p in z)

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
        for c, col in ((outer, "black"), (inner, "steelblue")):
            out.append(f'<polygon points="{pts(c.vertices)}" fill="none" stroke="{col}" stroke-width="0.8"/>')
        if step < len(self.snapshots) and self.snapshots[step] is not None:
            snap, quads = self.snapshots[step]
            for lf in snap.leaves:
                out.append(f'<polyline points="{pts(lf.vertices)}" fill="none" stroke="gray" stroke-width="0.5"/>')
            for q in quads:
                out.append(f'<polygon points="{pts(q)}" fill="none" stroke="crimson" stroke-width="0.4"/>')
        out.append("</svg>")
        return "\n".join(out)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def _position_leftover(state, n, snap, a_target):
    """Leftover fraction of the shapes giving area ratio ``a_target`` (bisection)."""
    prev = state.area
    lo, hi = 0.02, 0.98
    best = None
    for _ in range(12):
        a = 0.5 * (lo + hi)
        _clear(state)
        pend = _step_once(state, n, snap, a)
        ratio = _trial_area(state, pend) / prev
        if best is None or abs(ratio - a_target) < abs(best[1] - a_target):
            best = (a, ratio, pend)
        if abs(ratio - a_target) <= 0.01 * a_target:
            break
        if ratio < a_target:
            lo = a
        else:
            hi = a
    return best


def _clear(state):
    state.pending = {k: v for k, v in state.pending.items() if k == "T_max"}


def _trial_area(state: IterationState, pend: dict) -> float:
    t = state.pending["shrink"]["t"]
    cfg = state.config
    th = TWO_PI * np.arange(cfg.samples) / cfg.samples
    curves = []
    for side in (state.f_side, state.g_side):
        lev = pend[side.name]
        w = lev.phi(t * np.exp(1j * th))
        curves.append(Polyline(side.from_plane(lev.psi(side, state.step, w)), True))
    return _annulus_area(curves[0], curves[1])


def run(config: IterationConfig) -> CurveTrace:
    state = init(config)
    trace = CurveTrace(config.to_json())
    trace.steps.append(state.history[0])
    trace.annuli.append(state.annulus)
    trace.mismatch_tables.append((state.x[::8].copy(), state.mismatch[::8].copy()))
    L0 = state.sup_mismatch
    changes = []
    for n in range(config.steps):
        stage = "foliate"
        try:
            N = config.N(n)
            x_pts = TWO_PI * np.arange(N) / N
            snap = foliate(state, x_pts)
            stage = "extend"
            state.pending = {}
            if config.mode == "positive_area":
                a_t = float(config.a_seq[n])
                a, got, pend = _position_leftover(state, n, snap, a_t)
                state.pending["leftover"] = {"a_shape": a, "trial_area_ratio": got}
            else:
                pend = _step_once(state, n, snap, None)
            quads = [sec.quad.boundary.vertices for sec in pend["f"].sectors]
            info = _commit(state, pend, snap)
            info["A"] = {k: float(pend[k + "_A"]) for k in ("f", "g")}
            if config.mode == "positive_area":
                info["leftover"] = state.pending.get("leftover")
                info["area_target"] = float(config.a_seq[n])
            if config.mode == "dim_1":
                cov = _annulus_covering(*state.annulus, n + 1)
                trace.coverings.append(cov)
                info["covering"] = cov
            changes.append(info["f_change"] / ((2.0 / 3.0) ** n * L0) if L0 > 0 else 0.0)
            trace.snapshots.append((snap, [state.f_side.from_plane(q) for q in quads]))
            trace.steps.append(_record(state, info))
            trace.annuli.append(state.annulus)
            trace.mismatch_tables.append((state.x[::8].copy(), state.mismatch[::8].copy()))
        except (WeldFailure, ValueError, np.linalg.LinAlgError) as exc:
            st = exc.stage if isinstance(exc, WeldFailure) else stage
            trace.failure = {"step": n + 1, "stage": st, "reason": str(exc),
                             "shrink": state.pending.get("shrink") if isinstance(state.pending, dict) else None}
            break
    trace.fitted_C = float(max(changes)) if changes else None
    inner, outer = state.annulus
    try:
        coords = annulus_coordinates(inner, outer)
        mc = coords.inverse(0.5 + 1j * np.linspace(0.0, coords.P, 512, endpoint=False))
        trace.final_curve = Polyline(mc, True)
    except WeldFailure:
        trace.final_curve = None
    return trace
