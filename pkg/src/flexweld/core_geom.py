"""Geometric value types on the unit circle and in the plane.

Angles are plain floats normalized to [0, 2pi).  Arcs are stored as lifted
intervals ``(lo, hi)`` with ``0 <= lo < 2pi`` and ``lo < hi <= lo + 2pi`` so a
wraparound arc simply has ``hi > 2pi``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
ARC_TOL = 1e-12


def normalize_angle(theta):
    """Representative of ``theta`` in [0, 2pi)."""
    t = np.mod(theta, TWO_PI)
    if np.ndim(t) == 0:
        return 0.0 if float(t) >= TWO_PI else float(t)
    t = np.where(t >= TWO_PI, 0.0, t)
    return t


def chord(a, b):
    """Euclidean distance between e^{ia} and e^{ib}, accurate for tiny gaps."""
    return 2.0 * np.abs(np.sin(0.5 * (np.asarray(a) - np.asarray(b))))


@dataclass(frozen=True)
class ArcSet:
    """Finite union of disjoint closed arcs of the unit circle.

    ``widths`` carries the exact arc lengths; it matters for arcs far below
    the float spacing of their endpoint angles.
    """

    arcs: tuple = ()
    full: bool = False
    widths: tuple = ()

    def __post_init__(self):
        if len(self.widths) != len(self.arcs):
            object.__setattr__(self, "widths", tuple(hi - lo for lo, hi in self.arcs))

    @staticmethod
    def from_arcs(arcs: Iterable[Sequence[float]], tol: float = ARC_TOL,
                  widths: Sequence[float] | None = None) -> "ArcSet":
        items = []
        for idx, (lo, hi) in enumerate(arcs):
            lo, hi = float(lo), float(hi)
            length = float(widths[idx]) if widths is not None else hi - lo
            if length <= 0.0 or (widths is None and length <= tol):
                continue
            if length >= TWO_PI - tol:
                return ArcSet((), True)
            lo_n = normalize_angle(lo)
            items.append([lo_n, lo_n + (hi - lo), length])
        if not items:
            return ArcSet(())
        items.sort()
        merged = [items[0]]
        for lo, hi, w in items[1:]:
            if lo <= merged[-1][1] + tol:
                merged[-1][1] = max(merged[-1][1], hi)
                merged[-1][2] = merged[-1][1] - merged[-1][0]
            else:
                merged.append([lo, hi, w])
        # arcs crossing the seam may swallow arcs at the start
        while len(merged) > 1 and merged[-1][1] >= merged[0][0] + TWO_PI - tol:
            merged[-1][1] = max(merged[-1][1], merged[0][1] + TWO_PI)
            merged[-1][2] = merged[-1][1] - merged[-1][0]
            merged.pop(0)
        if any(w >= TWO_PI - tol for _, _, w in merged):
            return ArcSet((), True)
        return ArcSet(tuple((lo, hi) for lo, hi, _ in merged), False,
                      tuple(w for _, _, w in merged))

    @staticmethod
    def from_centers(centers: Sequence[float], widths: Sequence[float]) -> "ArcSet":
        """Arcs given by midpoint angle and exact length."""
        c = np.asarray(centers, dtype=float)
        w = np.asarray(widths, dtype=float)
        return ArcSet.from_arcs(list(zip(c - w / 2, c + w / 2)), widths=list(w))

    def centers(self) -> np.ndarray:
        if self.full:
            return np.array([np.pi])
        return np.array([lo for lo, _ in self.arcs]) + 0.5 * self.lengths()

    @staticmethod
    def full_circle() -> "ArcSet":
        return ArcSet((), True)

    @property
    def empty(self) -> bool:
        return not self.full and len(self.arcs) == 0

    def __len__(self) -> int:
        return 1 if self.full else len(self.arcs)

    def lengths(self) -> np.ndarray:
        if self.full:
            return np.array([TWO_PI])
        return np.array(self.widths, dtype=float)

    def total_length(self) -> float:
        return float(self.lengths().sum()) if not self.empty else 0.0

    def intervals(self) -> list:
        """Arcs as lifted (lo, hi) pairs; the full circle is (0, 2pi)."""
        if self.full:
            return [(0.0, TWO_PI)]
        return list(self.arcs)

    def contains(self, theta, tol: float = ARC_TOL) -> np.ndarray:
        t = normalize_angle(np.atleast_1d(np.asarray(theta, dtype=float)))
        if self.full:
            return np.ones(t.shape, dtype=bool)
        out = np.zeros(t.shape, dtype=bool)
        for lo, hi in self.arcs:
            d = np.mod(t - lo, TWO_PI)
            out |= (d <= hi - lo + tol) | (d >= TWO_PI - tol)
        return out

    def is_subset_of(self, other: "ArcSet", tol: float = 1e-9) -> bool:
        if other.full or self.empty:
            return True
        if self.full:
            return False
        for lo, hi in self.arcs:
            ok = False
            for lo2, hi2 in other.arcs:
                d = np.mod(lo - lo2, TWO_PI)
                if d > TWO_PI - tol:
                    d -= TWO_PI
                if d >= -tol and d + (hi - lo) <= hi2 - lo2 + tol:
                    ok = True
                    break
            if not ok:
                return False
        return True

    def rotate(self, alpha: float) -> "ArcSet":
        if self.full or self.empty:
            return self
        return ArcSet.from_arcs([(lo + alpha, hi + alpha) for lo, hi in self.arcs],
                                widths=self.widths)

    def to_json(self) -> list:
        return [[lo, hi] for lo, hi in self.intervals()]

    @staticmethod
    def from_json(data) -> "ArcSet":
        pairs = [tuple(map(float, p)) for p in data]
        for p in pairs:
            if len(p) != 2:
                raise ValueError("arc entries must be [lo, hi] pairs")
        return ArcSet.from_arcs(pairs)


def arcset_complement(E: ArcSet) -> ArcSet:
    """Closure of the complement of ``E`` in the unit circle."""
    if E.full:
        return ArcSet(())
    if E.empty:
        return ArcSet.full_circle()
    arcs = list(E.arcs)
    gaps = []
    for i, (lo, hi) in enumerate(arcs):
        nxt = arcs[(i + 1) % len(arcs)][0]
        if i == len(arcs) - 1:
            nxt += TWO_PI
        if nxt > hi + ARC_TOL:
            gaps.append((hi, nxt))
    return ArcSet.from_arcs(gaps)


@dataclass(frozen=True)
class CircleHomeo:
    """Piecewise-linear lift of an orientation-preserving circle homeomorphism.

    ``theta`` is strictly increasing in [t0, t0 + 2pi) and ``h`` strictly
    increasing with h(theta + 2pi) = h(theta) + 2pi.
    """

    theta: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        hv = np.asarray(self.h, dtype=float)
        if th.ndim != 1 or th.shape != hv.shape or th.size < 1:
            raise ValueError("breakpoint arrays must be 1-d of equal length")
        if np.any(np.diff(th) <= 0) or np.any(np.diff(hv) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if th[-1] - th[0] >= TWO_PI or hv[-1] - hv[0] >= TWO_PI:
            raise ValueError("breakpoints must span less than one turn")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "h", hv)

    @staticmethod
    def identity() -> "CircleHomeo":
        return CircleHomeo(np.array([0.0]), np.array([0.0]))

    @staticmethod
    def rotation(alpha: float) -> "CircleHomeo":
        return CircleHomeo(np.array([0.0]), np.array([float(alpha)]))

    def _tables(self, th, hv):
        xp = np.concatenate([th - TWO_PI, th, th + TWO_PI, [th[0] + 2 * TWO_PI]])
        fp = np.concatenate([hv - TWO_PI, hv, hv + TWO_PI, [hv[0] + 2 * TWO_PI]])
        return xp, fp

    def lift(self, theta):
        """Lifted value h(theta) for any real theta (continuous, increasing)."""
        t = np.asarray(theta, dtype=float)
        t0 = self.theta[0]
        k = np.floor((t - t0) / TWO_PI)
        r = t - k * TWO_PI
        xp, fp = self._tables(self.theta, self.h)
        return np.interp(r, xp, fp) + k * TWO_PI

    def __call__(self, theta):
        return normalize_angle(self.lift(theta))

    def inverse(self) -> "CircleHomeo":
        return CircleHomeo(self.h.copy(), self.theta.copy())

    def inverse_lift(self, value):
        return self.inverse().lift(value)

    def compose(self, other: "CircleHomeo") -> "CircleHomeo":
        """self o other."""
        pts = np.concatenate([other.theta, other.inverse_lift(self.theta)])
        pts = normalize_angle(pts)
        pts = np.unique(np.round(pts, 15))
        vals = self.lift(other.lift(pts))
        # keep vals inside a single turn relative to the first breakpoint
        vals = vals - TWO_PI * np.floor((vals[0]) / TWO_PI)
        keep = np.concatenate([[True], np.diff(pts) > 1e-14])
        return CircleHomeo(pts[keep], vals[keep])

    def breakpoint_angles(self) -> np.ndarray:
        return normalize_angle(self.theta)

    def to_json(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.theta, self.h)]

    @staticmethod
    def from_json(data) -> "CircleHomeo":
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("homeomorphism entries must be [theta, h] pairs")
        return CircleHomeo(arr[:, 0], arr[:, 1])


def homeo_image(h: CircleHomeo, E: ArcSet) -> ArcSet:
    """Image h(E), computed endpoint-wise."""
    if E.full or E.empty:
        return E
    return ArcSet.from_arcs([(h.lift(lo), h.lift(hi)) for lo, hi in E.arcs])


def _segments_intersect(p1, p2, q1, q2, eps=1e-14):
    """Vectorized proper/touching intersection test of segments p1p2 and q1q2."""
    def cross(a, b):
        return a.real * b.imag - a.imag * b.real

    d1 = cross(q2 - q1, p1 - q1)
    d2 = cross(q2 - q1, p2 - q1)
    d3 = cross(p2 - p1, q1 - p1)
    d4 = cross(p2 - p1, q2 - p1)
    proper = (d1 * d2 < -eps) & (d3 * d4 < -eps)
    return proper


@dataclass(frozen=True)
class Polyline:
    vertices: np.ndarray
    closed: bool = True

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=complex).ravel()
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    def edges(self):
        v = self.vertices
        if self.closed:
            return v, np.roll(v, -1)
        return v[:-1], v[1:]

    def length(self) -> float:
        a, b = self.edges()
        return float(np.abs(b - a).sum())

    def signed_area(self) -> float:
        if not self.closed:
            raise ValueError("area needs a closed polyline")
        v = self.vertices
        w = np.roll(v, -1)
        return 0.5 * float(np.sum(v.real * w.imag - w.real * v.imag))

    def is_simple(self) -> bool:
        v = self.vertices
        if len(v) < 3 and self.closed:
            return False
        a, b = self.edges()
        if np.any(np.abs(b - a) == 0):
            return False
        m = len(a)
        # coarse bounding boxes to prune pairs
        lo_x = np.minimum(a.real, b.real)
        hi_x = np.maximum(a.real, b.real)
        lo_y = np.minimum(a.imag, b.imag)
        hi_y = np.maximum(a.imag, b.imag)
        order = np.argsort(lo_x)
        for idx in range(m):
            i = order[idx]
            # candidates whose x-range starts before this one ends
            j_pos = np.searchsorted(lo_x[order], hi_x[i], side="right")
            cand = order[idx + 1:j_pos]
            if cand.size == 0:
                continue
            cand = cand[(hi_x[cand] >= lo_x[i]) & (hi_y[cand] >= lo_y[i]) & (lo_y[cand] <= hi_y[i])]
            # neighbours share an endpoint; skip them
            adj = (np.abs(cand - i) == 1)
            if self.closed:
                adj |= (np.abs(cand - i) == m - 1)
            cand = cand[~adj]
            if cand.size == 0:
                continue
            hit = _segments_intersect(a[i], b[i], a[cand], b[cand])
            if np.any(hit):
                return False
        return True

    def ccw(self) -> "Polyline":
        if self.signed_area() < 0:
            return Polyline(self.vertices[::-1].copy(), True)
        return self

    def contains(self, z) -> np.ndarray:
        """Even-odd point-in-polygon test (closed polylines)."""
        zz = np.atleast_1d(np.asarray(z, dtype=complex))
        a, b = self.edges()
        inside = np.zeros(zz.shape, dtype=bool)
        x, y = zz.real, zz.imag
        for start in range(0, len(a), 2048):
            aa = a[start:start + 2048][:, None]
            bb = b[start:start + 2048][:, None]
            cond = (aa.imag > y) != (bb.imag > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = aa.real + (y - aa.imag) * (bb.real - aa.real) / (bb.imag - aa.imag)
            crossing = cond & (x < xint)
            inside ^= (np.sum(crossing, axis=0) % 2).astype(bool)
        return inside

    def resample(self, n: int) -> "Polyline":
        """n points equally spaced in arc length."""
        v = self.vertices
        if self.closed:
            v = np.append(v, v[0])
        s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(v)))])
        tgt = np.linspace(0.0, s[-1], n, endpoint=not self.closed)
        re = np.interp(tgt, s, v.real)
        im = np.interp(tgt, s, v.imag)
        return Polyline(re + 1j * im, self.closed)

    def to_json(self) -> list:
        return [[float(z.real), float(z.imag)] for z in self.vertices]

    @staticmethod
    def from_json(data, closed: bool = True) -> "Polyline":
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("polyline entries must be [re, im] pairs")
        return Polyline(arr[:, 0] + 1j * arr[:, 1], closed)


def polygon_area(p: Polyline) -> float:
    """Area enclosed by a closed simple polyline (shoelace)."""
    if not p.closed:
        raise ValueError("polygon_area needs a closed polyline")
    if len(p.vertices) < 3:
        raise ValueError("a polygon needs at least three vertices")
    return abs(p.signed_area())


SIDE_NAMES = ("a1", "b1", "a2", "b2")


@dataclass(frozen=True)
class MarkedQuadrilateral:
    """Closed polyline with four marked vertices in counterclockwise order.

    Side a1 runs from vertex 0 to vertex 1, then b1, a2, b2.
    """

    boundary: Polyline
    vertex_indices: tuple

    def __post_init__(self):
        if not self.boundary.closed:
            raise ValueError("quadrilateral boundary must be closed")
        vi = tuple(int(i) for i in self.vertex_indices)
        n = len(self.boundary)
        if len(vi) != 4 or any(i < 0 or i >= n for i in vi):
            raise ValueError("need four vertex indices inside the boundary")
        if not (vi[0] < vi[1] < vi[2] < vi[3]):
            raise ValueError("vertex indices must be strictly increasing")
        if self.boundary.signed_area() <= 0:
            raise ValueError("boundary must be counterclockwise")
        object.__setattr__(self, "vertex_indices", vi)

    @staticmethod
    def from_sides(a1, b1, a2, b2) -> "MarkedQuadrilateral":
        """Assemble from four open side polylines that chain end to start."""
        sides = [np.asarray(s, dtype=complex) for s in (a1, b1, a2, b2)]
        pts = []
        idx = []
        for s in sides:
            idx.append(len(pts))
            pts.extend(s[:-1])
        z = np.array(pts)
        poly = Polyline(z, True)
        if poly.signed_area() < 0:
            raise ValueError("sides must be ordered counterclockwise")
        return MarkedQuadrilateral(poly, tuple(idx))

    def corners(self) -> np.ndarray:
        return self.boundary.vertices[list(self.vertex_indices)]

    def side(self, k: int) -> np.ndarray:
        """Vertices of side k (0..3) including both endpoints."""
        v = self.boundary.vertices
        n = len(v)
        i0 = self.vertex_indices[k]
        i1 = self.vertex_indices[(k + 1) % 4]
        if i1 <= i0:
            i1 += n
        ids = np.arange(i0, i1 + 1) % n
        return v[ids]

    def side_labels(self) -> np.ndarray:
        """Label 0..3 for each boundary edge (edge j joins vertex j to j+1)."""
        n = len(self.boundary)
        lab = np.empty(n, dtype=int)
        vi = self.vertex_indices
        for k in range(4):
            i0 = vi[k]
            i1 = vi[(k + 1) % 4]
            if i1 <= i0:
                i1 += n
            lab[np.arange(i0, i1) % n] = k
        return lab

    def swapped(self) -> "MarkedQuadrilateral":
        """Same domain with a-sides and b-sides exchanged."""
        n = len(self.boundary)
        vi = self.vertex_indices
        v = np.roll(self.boundary.vertices, -vi[1])
        new = tuple((i - vi[1]) % n for i in (vi[1], vi[2], vi[3], vi[0]))
        return MarkedQuadrilateral(Polyline(v, True), new)

    def transformed(self, a: complex, b: complex) -> "MarkedQuadrilateral":
        """Image under z -> a z + b (a != 0)."""
        return MarkedQuadrilateral(Polyline(a * self.boundary.vertices + b, True), self.vertex_indices)

    def to_json(self) -> dict:
        return {"boundary": self.boundary.to_json(), "vertex_indices": list(self.vertex_indices)}

    @staticmethod
    def from_json(data) -> "MarkedQuadrilateral":
        return MarkedQuadrilateral(Polyline.from_json(data["boundary"]), tuple(data["vertex_indices"]))


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")


def rectangle_quad(width: float, height: float = 1.0, n_per_unit: int = 0) -> MarkedQuadrilateral:
    """[0,width] x [0,height] with the horizontal sides as a-sides."""
    def seg(p, q):
        if n_per_unit <= 0:
            return np.array([p, q])
        m = max(2, int(np.ceil(abs(q - p) * n_per_unit)) + 1)
        return p + (q - p) * np.linspace(0.0, 1.0, m)

    w, h = float(width), float(height)
    return MarkedQuadrilateral.from_sides(
        seg(0, w), seg(w, w + 1j * h), seg(w + 1j * h, 1j * h), seg(1j * h, 0)
    )


def circle_polyline(radius: float, n: int, center: complex = 0.0, phase: float = 0.0) -> Polyline:
    t = phase + TWO_PI * np.arange(n) / n
    return Polyline(center + radius * np.exp(1j * t), True)
