"""Admissible shapes: conformal embeddings of long rectangles into short ones.

A shape is the region ``Q(gamma1, gamma2)`` inside ``[0,T] x [0,1]`` bounded
by the left edge, a lower path ``gamma1`` from 0 to ``p1`` on the right
edge, the right-edge segment ``[p1, p2]`` and an upper path ``gamma2`` from
``i`` to ``p2``.  Its modulus ``R`` is taken for the family joining the two
paths, so the full rectangle with ``p1 = T``, ``p2 = T + i`` has ``R = T``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .core_geom import MarkedQuadrilateral, Polyline, polygon_area
from .modulus import MapTable, quad_modulus, quad_uniformize

TEETH = 8


# ---------------------------------------------------------------- shape specs

@dataclass
class ShapeSpec:
    T: float
    gamma1: Polyline
    gamma2: Polyline
    R: float
    region: MarkedQuadrilateral
    family: dict = field(default_factory=dict)
    _table: MapTable | None = field(default=None, repr=False, compare=False)

    @property
    def p1(self) -> complex:
        return complex(self.gamma1.vertices[-1])

    @property
    def p2(self) -> complex:
        return complex(self.gamma2.vertices[-1])

    def block_length(self) -> float:
        """Largest ``x`` with ``[0, x] x [0, 1]`` inside the region."""
        v = self.region.boundary.vertices
        a, b = v, np.roll(v, -1)
        best = self.T
        for p, q in zip(a, b):
            if abs(p.imag - q.imag) < 1e-15 and (abs(p.imag) < 1e-12 or abs(p.imag - 1) < 1e-12):
                continue
            if abs(p.real) < 1e-12 and abs(q.real) < 1e-12:
                continue
            lo, hi = sorted((p.imag, q.imag))
            if hi <= 1e-12 or lo >= 1 - 1e-12:
                continue
            if abs(q.imag - p.imag) < 1e-15:
                best = min(best, p.real, q.real)
                continue
            ts = [(y - p.imag) / (q.imag - p.imag) for y in (max(lo, 0.0), min(hi, 1.0))]
            for t in ts:
                z = p + np.clip(t, 0, 1) * (q - p)
                if 1e-12 < z.imag < 1 - 1e-12 or abs(p.real - q.real) < 1e-15:
                    best = min(best, z.real)
        return float(best)

    def table(self, samples: int = 6000) -> MapTable:
        if self._table is None or self._table_samples != samples:
            self._table = quad_uniformize(self.region, samples)
            self._table_samples = samples
        return self._table

    _table_samples: int = field(default=0, repr=False, compare=False)

    def leftover(self) -> float:
        return leftover_percentage(self)

    def to_json(self) -> dict:
        return {"T": self.T, "R": self.R, "leftover": leftover_percentage(self),
                "gamma1": self.gamma1.to_json(), "gamma2": self.gamma2.to_json(),
                "family": self.family}

    @staticmethod
    def from_json(data, target_triangles: int = 3000) -> "ShapeSpec":
        g1 = Polyline.from_json(data["gamma1"], closed=False)
        g2 = Polyline.from_json(data["gamma2"], closed=False)
        spec = shape_from_paths(float(data["T"]), g1, g2, compute_R=False)
        spec.R = float(data["R"])
        spec.family = dict(data.get("family", {}))
        return spec

    def to_svg(self, support_M: float | None = None, size: int = 720) -> str:
        sc = size / (self.T + 0.2)
        H = sc * 1.2

        def pt(z):
            return f"{(z.real + 0.1) * sc:.2f},{(1.1 - z.imag) * sc:.2f}"

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{H:.0f}">']
        rect = [0, self.T, self.T + 1j, 1j]
        out.append(f'<polygon points="{" ".join(pt(z) for z in rect)}" fill="none" stroke="gray"/>')
        pts = " ".join(pt(z) for z in self.region.boundary.vertices)
        out.append(f'<polygon points="{pts}" fill="#cfe0f0" stroke="black" stroke-width="0.8"/>')
        if support_M is not None:
            box = [0, support_M, support_M + 1j, 1j]
            out.append(f'<polygon points="{" ".join(pt(z) for z in box)}" fill="none" '
                       'stroke="crimson" stroke-dasharray="4,3"/>')
        out.append("</svg>")
        return "\n".join(out)


def _validate_path(path: np.ndarray, start: complex, T: float, name: str):
    if abs(path[0] - start) > 1e-12:
        raise ValueError(f"{name} must start at {start}")
    if abs(path[-1].real - T) > 1e-12 or not (-1e-12 <= path[-1].imag <= 1 + 1e-12):
        raise ValueError(f"{name} must end on the right edge x = T")
    if np.any(path.real < -1e-12) or np.any(path.real > T + 1e-12) \
            or np.any(path.imag < -1e-12) or np.any(path.imag > 1 + 1e-12):
        raise ValueError(f"{name} leaves the rectangle")
    if not Polyline(path, closed=False).is_simple():
        raise ValueError(f"{name} is not simple")


def shape_from_paths(T: float, gamma1: Polyline, gamma2: Polyline,
                     target_triangles: int = 3000, compute_R: bool = True) -> ShapeSpec:
    g1 = np.asarray(gamma1.vertices, dtype=complex)
    g2 = np.asarray(gamma2.vertices, dtype=complex)
    _validate_path(g1, 0j, T, "gamma1")
    _validate_path(g2, 1j, T, "gamma2")
    if not g1[-1].imag < g2[-1].imag:
        raise ValueError("need Im p1 < Im p2")
    right = np.array([g1[-1], g2[-1]])
    left = np.array([1j, 0j])
    try:
        Q = MarkedQuadrilateral.from_sides(g1, right, g2[::-1], left)
    except ValueError as exc:
        raise ValueError(f"paths do not bound a region: {exc}") from None
    if not Q.boundary.is_simple():
        raise ValueError("paths intersect or the region is not simple")
    spec = ShapeSpec(float(T), Polyline(g1, closed=False), Polyline(g2, closed=False),
                     float("nan"), Q)
    if compute_R:
        spec.R = quad_modulus(Q, target_triangles).modulus
    return spec


def rectangle_shape(T: float, gap: float = 1.0, center: float = 0.5,
                    target_triangles: int = 3000, compute_R: bool = True) -> ShapeSpec:
    """The full rectangle with right-edge quad-vertices ``center -+ gap/2``."""
    y1, y2 = center - 0.5 * gap, center + 0.5 * gap
    if not (0.0 <= y1 < y2 <= 1.0):
        raise ValueError("vertex gap must fit on the right edge")
    g1 = [0j, complex(T)] + ([complex(T, y1)] if y1 > 0 else [])
    g2 = [1j, complex(T, 1)] + ([complex(T, y2)] if y2 < 1 else [])
    spec = shape_from_paths(T, Polyline(np.array(g1), closed=False),
                            Polyline(np.array(g2), closed=False), target_triangles, compute_R)
    spec.family = {"kind": "rectangle", "gap": gap, "center": center}
    return spec


def leftover_percentage(spec: ShapeSpec) -> float:
    return float(1.0 - polygon_area(spec.region.boundary) / spec.T)


# ---------------------------------------------------------------- strip interpolation

def _reflected(fn):
    """Extend a boundary function on [0,1] by odd reflection in 0 and 1."""
    def g(y):
        y = np.asarray(y, dtype=float)
        k = np.floor(y)
        r = y - k
        even = (k % 2) == 0
        return np.where(even, fn(r) + k, k + 1.0 - fn(1.0 - r))
    return g


def _as_function(G, name):
    if callable(G):
        return G
    y = np.linspace(0.0, 1.0, len(G))
    vals = np.asarray(G, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{name} has non-finite samples")
    return CubicSpline(y, vals)


@dataclass
class StripInterp:
    M: float
    M_tilde: float
    G0: object
    G1: object
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    u_x: np.ndarray
    u_y: np.ndarray
    v_x: np.ndarray
    v_y: np.ndarray
    mu: np.ndarray

    def __call__(self, z):
        return _strip_map(self.M, self.M_tilde, self.G0, self.G1, z)

    @property
    def jacobian(self) -> np.ndarray:
        return self.u_x * self.v_y - self.u_y * self.v_x

    @property
    def sup_mu(self) -> float:
        return float(np.abs(self.mu).max())


def _strip_map(M, Mt, G0, G1, z):
    z = np.asarray(z, dtype=complex)
    s = (z.real - 1.0) / (M - 1.0)
    im = s * G1(z.imag) + (1.0 - s) * G0(z.imag)
    return (Mt - 1.0) / (M - 1.0) * (z.real - 1.0) + 1.0 + 1j * im


def _derivative(G, y, h=1e-4):
    if hasattr(G, "derivative"):
        return G.derivative()(y)
    return (-G(y + 2 * h) + 8 * G(y + h) - 8 * G(y - h) + G(y - 2 * h)) / (12 * h)


def strip_interpolation(M: float, M_tilde: float, G0, G1, grid: int = 256) -> StripInterp:
    """Linear interpolation between the boundary maps ``G0`` (x=1) and ``G1`` (x=M)."""
    if not M > 1.0:
        raise ValueError("strip interpolation needs M > 1")
    f0 = _reflected(_as_function(G0, "G0"))
    f1 = _reflected(_as_function(G1, "G1"))
    if not (np.all(np.isfinite(f0(np.linspace(0, 1, 33)))) and np.all(np.isfinite(f1(np.linspace(0, 1, 33))))):
        raise ValueError("non-finite boundary samples")
    x = np.linspace(1.0, M, grid)
    y = np.linspace(0.0, 1.0, grid)
    X, Y = np.meshgrid(x, y, indexing="ij")
    Z = X + 1j * Y
    vals = _strip_map(M, M_tilde, f0, f1, Z)
    s = (X - 1.0) / (M - 1.0)
    u_x = np.full(X.shape, (M_tilde - 1.0) / (M - 1.0))
    u_y = np.zeros(X.shape)
    v_x = (f1(Y) - f0(Y)) / (M - 1.0)
    base0 = _as_function(G0, "G0")
    base1 = _as_function(G1, "G1")
    v_y = s * _derivative(base1, Y) + (1.0 - s) * _derivative(base0, Y)
    Gz = 0.5 * ((u_x + v_y) + 1j * (v_x - u_y))
    Gzb = 0.5 * ((u_x - v_y) + 1j * (v_x + u_y))
    return StripInterp(M, M_tilde, f0, f1, x, y, vals, u_x, u_y, v_x, v_y, Gzb / Gz)


# ---------------------------------------------------------------- the corrector

def epsilon_bound(M: float) -> float:
    return float(np.exp(-np.pi * (M - 1.0) / 2.0) / M)


def epsilon_bound_proof(M: float, C: float = 1.0) -> float:
    """Alternative normalization ``2 C e^{-pi (M-1)/2} / (M-1)`` with a free constant."""
    return float(2.0 * C * np.exp(-np.pi * (M - 1.0) / 2.0) / (M - 1.0))


def M_for_eps(eps: float) -> int:
    """Least integer ``M >= 2`` with ``log(1/eps) < pi (M-1)/2 + log(M-1)``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    M = 2
    while not np.log(1.0 / eps) < np.pi * (M - 1) / 2.0 + np.log(M - 1):
        M += 1
    return M


def _newton_inverse(f, w, iters: int = 30):
    w = np.asarray(w, dtype=complex)
    z = w.copy()
    act = np.flatnonzero(np.ones(w.shape, dtype=bool).ravel())
    zf, wf = z.ravel(), w.ravel()
    for _ in range(iters):
        if act.size == 0:
            break
        step = (f(zf[act]) - wf[act]) / f.derivative(zf[act])
        zf[act] -= step
        act = act[np.abs(step) > 1e-14 * (1.0 + np.abs(zf[act]))]
    return zf.reshape(w.shape)


@dataclass
class BlockSeries:
    """``E(z) = z + sum_n 2 e_n sinh(n pi z)`` on the identity block."""
    coef: np.ndarray
    fit_line: float
    fit_residual: float

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        n = np.arange(1, self.coef.size + 1)
        return z + (2.0 * self.coef * np.sinh(np.pi * n * z[..., None])).sum(-1)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        n = np.arange(1, self.coef.size + 1)
        return 1.0 + (2.0 * self.coef * np.pi * n * np.cosh(np.pi * n * z[..., None])).sum(-1)

    def inverse(self, w, iters: int = 30):
        return _newton_inverse(self, w, iters)


def fit_block_series(table: MapTable, x_fit: float, modes: int = 12, samples: int = 64) -> BlockSeries:
    y = (np.arange(samples) + 0.5) / samples
    z = x_fit + 1j * y
    w = table.inverse(z)
    d = w - z
    n = np.arange(1, modes + 1)
    A_im = 2.0 * np.cosh(np.pi * n * x_fit)[None, :] * np.sin(np.pi * n[None, :] * y[:, None])
    A_re = 2.0 * np.sinh(np.pi * n * x_fit)[None, :] * np.cos(np.pi * n[None, :] * y[:, None])
    A = np.vstack([A_re, A_im])
    b = np.concatenate([d.real, d.imag])
    scale = np.abs(A).max(axis=0)
    c, *_ = np.linalg.lstsq(A / scale, b, rcond=None)
    c = c / scale
    res = float(np.abs(A @ c - b).max())
    return BlockSeries(c, float(x_fit), res)


@dataclass
class StripUniformizer:
    """``phi(z) = z + sum_n a_n sinh(n pi (z-1))`` mapping the strip between
    ``Re z = 1`` and a curve onto ``[1, M~] x [0, 1]``."""
    coef: np.ndarray
    M_tilde: float
    residual: float

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        n = np.arange(1, self.coef.size + 1)
        return z + (self.coef * np.sinh(np.pi * n * (z[..., None] - 1.0))).sum(-1)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        n = np.arange(1, self.coef.size + 1)
        return 1.0 + (self.coef * np.pi * n * np.cosh(np.pi * n * (z[..., None] - 1.0))).sum(-1)

    def inverse(self, w, iters: int = 30):
        return _newton_inverse(self, w, iters)


def uniformize_strip(curve, M: float, modes: int = 12, samples: int = 96) -> StripUniformizer:
    """Spectral collocation for the strip bounded by ``Re z = 1`` and ``curve(y)``.

    The ansatz keeps ``Re phi = 1`` on the left line and ``Im phi`` equal to
    0 and 1 on the horizontal lines; Gauss-Newton fits ``Re phi = M~`` on
    the curve.
    """
    y = (np.arange(samples) + 0.5) / samples
    c = curve(y)
    n = np.arange(1, modes + 1)
    a = np.zeros(modes)
    Mt = float(np.mean(c.real))
    scale = np.abs(np.sinh(np.pi * n * (M - 1.0)))
    for _ in range(40):
        S = np.sinh(np.pi * n[None, :] * (c[:, None] - 1.0)).real
        r = c.real + S @ a - Mt
        J = np.hstack([S / scale, -np.ones((samples, 1))])
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        a += step[:-1] / scale
        Mt += step[-1]
        if np.abs(step).max() < 1e-16:
            break
    S = np.sinh(np.pi * n[None, :] * (c[:, None] - 1.0)).real
    res = float(np.abs(c.real + S @ a - Mt).max())
    return StripUniformizer(a, float(Mt), res)


@dataclass
class AdmissibilityReport:
    M: float
    epsilon_bound: float
    measured_sup_dilatation: float
    support_box: tuple
    epsilon_bound_proof: float = float("nan")
    measured_K: float = 1.0
    refined_sup_dilatation: float = float("nan")
    refinement_change: float = float("nan")
    leakage: float = 0.0
    identity_error: float = 0.0
    vertex_error: float = 0.0
    support_overhang: float = 0.0
    M_tilde: float = float("nan")
    fit_residual: float = 0.0
    strip_residual: float = 0.0
    grid: int = 256

    @property
    def guard_ok(self) -> bool:
        return self.refinement_change < 0.10

    def passes(self, eps: float | None = None) -> bool:
        ok = self.identity_error <= 1e-3 and self.leakage <= 1e-9
        if eps is not None:
            ok = ok and self.measured_K - 1.0 <= eps
        return bool(ok)

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "M", "epsilon_bound", "epsilon_bound_proof", "measured_sup_dilatation", "measured_K",
            "refined_sup_dilatation", "refinement_change", "leakage", "identity_error",
            "vertex_error", "support_overhang", "M_tilde", "fit_residual", "strip_residual", "grid")}
        out["support_box"] = list(self.support_box)
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in out.items()}


@dataclass
class Corrector:
    """The corrected embedding ``alpha o E`` of ``[0,R] x [0,1]`` into the shape,
    and ``alpha`` itself on the shape."""
    spec: ShapeSpec
    M: float
    block: BlockSeries
    strip: StripUniformizer
    interp: StripInterp
    table: MapTable

    def embed(self, z):
        """Conformal embedding ``E``."""
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        inner = z.real <= self.block.fit_line
        out[inner] = self.block(z[inner])
        if np.any(~inner):
            out[~inner] = self.table.inverse(z[~inner])
        return out

    def __call__(self, z):
        """``alpha o E``: identity for ``x <= 1``, strip map up to ``M``, then ``E``."""
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        left = z.real <= 1.0
        mid = (z.real > 1.0) & (z.real < self.M)
        right = z.real >= self.M
        out[left] = z[left]
        if np.any(mid):
            out[mid] = self.strip.inverse(self.interp(z[mid]))
        if np.any(right):
            out[right] = self.embed(z[right])
        return out

    def source(self, w):
        """Inverse of ``alpha o E`` on the part of the shape inside the block."""
        w = np.asarray(w, dtype=complex)
        x = self.block.inverse(w)
        out = x.copy()
        left = x.real <= 1.0
        out[left] = w[left]
        mid = (x.real > 1.0) & (x.real < self.M)
        if np.any(mid):
            out[mid] = _invert_strip_map(self.interp, self.strip(w[mid]))
        return out

    def alpha(self, w, branch=None):
        """``alpha`` on points ``w`` of the shape inside the identity block.

        ``branch`` forces the piece used (0 left, 1 strip, 2 right); it lets
        finite differences stay on the piece of their center point.
        """
        w = np.asarray(w, dtype=complex)
        x = self.block.inverse(w)
        if branch is None:
            branch = np.where(x.real <= 1.0, 0, np.where(x.real < self.M, 1, 2))
        branch = np.broadcast_to(branch, w.shape)
        out = w.copy()
        b0 = branch == 0
        out[b0] = x[b0]
        b1 = branch == 1
        if np.any(b1):
            out[b1] = self.strip.inverse(self.interp(x[b1]))
        return out

    def branch_of(self, w):
        x = self.block.inverse(np.asarray(w, dtype=complex))
        return np.where(x.real <= 1.0, 0, np.where(x.real < self.M, 1, 2))


def _invert_strip_map(interp: StripInterp, w, iters: int = 40):
    M, Mt = interp.M, interp.M_tilde
    x = 1.0 + (w.real - 1.0) * (M - 1.0) / (Mt - 1.0)
    s = (x - 1.0) / (M - 1.0)
    y = w.imag.copy()
    for _ in range(iters):
        f = s * interp.G1(y) + (1 - s) * interp.G0(y) - w.imag
        h = 1e-7
        df = (s * (interp.G1(y + h) - interp.G1(y - h)) + (1 - s) * (interp.G0(y + h) - interp.G0(y - h))) / (2 * h)
        step = f / df
        y = y - step
        if np.all(np.abs(step) < 1e-15):
            break
    return x + 1j * y


def _dilatation(fn, branch_fn, X, Y, h):
    """Pointwise Beltrami coefficient by fourth-order centered differences."""
    W = X + 1j * Y
    br = branch_fn(W)

    def F(dz):
        return fn(W + dz, br)

    fx = (-F(2 * h) + 8 * F(h) - 8 * F(-h) + F(-2 * h)) / (12 * h)
    fy = (-F(2j * h) + 8 * F(1j * h) - 8 * F(-1j * h) + F(-2j * h)) / (12 * h)
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    return np.abs(fzb / fz)


def build_corrector(spec: ShapeSpec, M: float, samples: int = 12000) -> Corrector:
    block = spec.block_length()
    if not M > 1.0:
        raise ValueError("admissibility needs M > 1")
    if block < 2 * M - 1e-12:
        raise ValueError(f"containment fails: block length {block:.6g} < 2M = {2 * M:.6g}")
    if not 2 * M < spec.T:
        raise ValueError(f"need 2M < T (2M={2 * M:.6g}, T={spec.T:.6g})")
    table = spec.table(samples)
    x_fit = max(M + 0.25, min(block, 2 * M) - 0.75)
    series = fit_block_series(table, x_fit)
    strip = uniformize_strip(lambda y: series(M + 1j * y), M)

    def G0(y):
        return strip(1.0 + 1j * np.asarray(y)).imag

    def G1(y):
        return strip(series(M + 1j * np.asarray(y))).imag

    interp = strip_interpolation(M, strip.M_tilde, G0, G1, grid=16)
    return Corrector(spec, float(M), series, strip, interp, table)


def admissibility(spec: ShapeSpec, M: float, grid: int = 256, samples: int = 12000):
    """Corrector ``alpha`` of a shape, with its measured dilatation.

    Returns ``(report, corrector)``.  Dilatation is measured for ``alpha``
    on the shape over ``[0, x_max] x [0, 1]``; each grid point differentiates
    the piece of ``alpha`` that contains it.
    """
    cor = build_corrector(spec, M, samples)
    x_max = min(cor.block.fit_line, spec.T)

    def measure(n):
        h = 0.25 / n
        xs = np.linspace(0.0, x_max, n)
        ys = np.linspace(0.0, 1.0, n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        mu = _dilatation(cor.alpha, cor.branch_of, X, Y, h)
        return X, mu

    X, mu = measure(grid)
    _, mu2 = measure(2 * grid)
    inside = X <= M + 1e-12
    sup = float(mu[inside].max())
    sup2 = float(mu2.max())
    leak = float(mu[~inside].max()) if np.any(~inside) else 0.0
    change = abs(sup2 - sup) / max(sup, 1e-300)
    # identity on the unit square, and continuity across the pieces
    t = np.linspace(0.0, 1.0, 65)
    sq = (np.linspace(0, 1, 17)[:, None] + 1j * t[None, :]).ravel()
    id_err = float(np.abs(cor(sq) - sq).max())
    seam1 = float(np.abs(cor.strip.inverse(cor.interp(1.0 + 1j * t)) - (1.0 + 1j * t)).max())
    seamM = float(np.abs(cor.strip.inverse(cor.interp(M + 1j * t)) - cor.block(M + 1j * t)).max())
    xf = cor.block.fit_line
    seamF = float(np.abs(cor.block(xf + 1j * t) - cor.table.inverse(xf + 1j * t)).max())
    # alpha is the identity near the quad-vertices, so they stay fixed exactly
    # when E sends the rectangle corners to them
    R = cor.table.modulus
    vert = float(np.abs(cor.table.corner_images - np.array([0, R, R + 1j, 1j])).max())
    overhang = float(max(0.0, (cor.block(M + 1j * t).real - M).max()))
    muK = (1.0 + sup) / (1.0 - sup)
    rep = AdmissibilityReport(
        M=float(M), epsilon_bound=epsilon_bound(M), measured_sup_dilatation=sup,
        support_box=(0.0, float(M), 0.0, 1.0), epsilon_bound_proof=epsilon_bound_proof(M),
        measured_K=float(muK), refined_sup_dilatation=sup2, refinement_change=float(change),
        leakage=leak, identity_error=max(id_err, seam1, seamM, seamF), vertex_error=vert,
        support_overhang=overhang, M_tilde=cor.strip.M_tilde, fit_residual=cor.block.fit_residual,
        strip_residual=cor.strip.residual, grid=grid)
    return rep, cor


# ---------------------------------------------------------------- leftover control

def comb_shape(T: float, block: float, depth: float, gap: float = 1.0,
               target_triangles: int = 3000, compute_R: bool = True) -> ShapeSpec:
    """Identity block ``[0, block] x [0,1]``, then eight teeth alternating
    from the bottom and the top edge with the given depth."""
    if not 0.0 <= depth < 1.0:
        raise ValueError("tooth depth must lie in [0, 1)")
    zone = T - block
    if zone <= 0:
        raise ValueError("no room for teeth")
    slot = zone / TEETH
    g = min(0.1, slot / 4.0)
    g1 = [0j]
    g2 = [1j]
    if depth > 1e-9:          # thinner teeth collapse onto the edge
        for j in range(TEETH):
            a = block + j * slot + 0.5 * g
            b = block + (j + 1) * slot - 0.5 * g
            if j % 2 == 0:
                g1 += [complex(a, 0), complex(a, depth), complex(b, depth), complex(b, 0)]
            else:
                g2 += [complex(a, 1), complex(a, 1 - depth), complex(b, 1 - depth), complex(b, 1)]
    y1, y2 = 0.5 - 0.5 * gap, 0.5 + 0.5 * gap
    g1 += [complex(T, 0)] + ([complex(T, y1)] if y1 > 0 else [])
    g2 += [complex(T, 1)] + ([complex(T, y2)] if y2 < 1 else [])
    spec = shape_from_paths(T, Polyline(np.array(g1), closed=False),
                            Polyline(np.array(g2), closed=False), target_triangles, compute_R)
    spec.family = {"kind": "comb", "block": block, "depth": depth, "gap": gap, "teeth": TEETH,
                   "tooth_gap": g}
    return spec


def minimal_T(eps: float, a: float) -> float:
    return 4.0 * M_for_eps(eps) / (1.0 - a)


def shape_with_leftover(eps: float, a: float, T: float, target_triangles: int = 3000,
                        compute_R: bool = True, tol: float = 1e-3) -> ShapeSpec:
    if not 0.0 < a < 1.0:
        raise ValueError("leftover a must lie in (0, 1)")
    M = M_for_eps(eps)
    Tmin = 4.0 * M / (1.0 - a)
    if not T > Tmin:
        raise ValueError(f"infeasible: T={T} must exceed 4M/(1-a)={Tmin:.6g} (minimal feasible T)")
    block = 2.0 * M
    d_lo, d_hi = 0.0, 0.98

    def left(d):
        return leftover_percentage(comb_shape(T, block, d, compute_R=False))

    if left(d_hi) < a:
        raise ValueError(f"comb family reaches leftover {left(d_hi):.4f} < {a} at T={T}")
    for _ in range(80):
        mid = 0.5 * (d_lo + d_hi)
        if left(mid) < a:
            d_lo = mid
        else:
            d_hi = mid
        if d_hi - d_lo < 1e-13:
            break
    spec = comb_shape(T, block, 0.5 * (d_lo + d_hi), target_triangles=target_triangles,
                      compute_R=compute_R)
    if abs(leftover_percentage(spec) - a) > tol:
        raise ValueError("leftover bisection did not converge")
    if epsilon_bound(M) > eps:
        raise ValueError(f"epsilon bound {epsilon_bound(M):.3g} exceeds eps={eps}")
    spec.family["M"] = M
    spec.family["eps"] = eps
    return spec


def retune_gap(spec: ShapeSpec, R_target: float, rtol: float = 2e-3,
               target_triangles: int = 3000) -> ShapeSpec:
    """Move the right-edge quad-vertices together until the modulus is ``R_target``."""
    fam = dict(spec.family)
    kind = fam.get("kind")

    def build(gap):
        if kind == "comb":
            return comb_shape(spec.T, fam["block"], fam["depth"], gap, target_triangles)
        return rectangle_shape(spec.T, gap, fam.get("center", 0.5), target_triangles)

    cur = build(fam.get("gap", 1.0))
    if cur.R > R_target * (1 + rtol):
        raise ValueError(f"modulus {cur.R:.5g} already above target {R_target:.5g}")
    lo, hi = 1e-6, fam.get("gap", 1.0)
    best = cur
    for _ in range(60):
        if abs(best.R / R_target - 1.0) <= rtol:
            break
        mid = np.sqrt(lo * hi)
        trial = build(mid)
        if trial.R > R_target:
            lo = mid
        else:
            hi = mid
        best = trial
    if abs(best.R / R_target - 1.0) > rtol:
        raise ValueError("vertex-gap bisection did not reach the target modulus")
    for k in ("M", "eps"):
        if k in fam:
            best.family[k] = fam[k]
    return best


def uniform_R_family(T_list, eps: float, a: float, target_triangles: int = 3000):
    shapes = [shape_with_leftover(eps, a, T, target_triangles) for T in T_list]
    R = max(s.R for s in shapes)
    out = []
    for s in shapes:
        if abs(s.R / R - 1.0) <= 2e-3:
            out.append(s)
        else:
            out.append(retune_gap(s, R, target_triangles=target_triangles))
    return R, out


def report_json(obj) -> str:
    return json.dumps(obj.to_json(), indent=2, sort_keys=True)
