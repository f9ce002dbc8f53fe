"""Moduli of quadrilaterals and annuli by P1 finite elements.

Convention: ``quad_modulus`` is the Dirichlet energy of the potential equal
to 0 on side a1 and 1 on side a2, so the rectangle [0, M] x [0, 1] with
horizontal a-sides has modulus M.
"""
from __future__ import annotations

import io
import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl
import triangle as tr
from scipy.spatial import cKDTree

from .core_geom import MarkedQuadrilateral, Polyline, _segments_intersect

A1, B1, A2, B2, INNER, OUTER = 2, 3, 4, 5, 6, 7
_SIDE_MARK = (A1, B1, A2, B2)


# ---------------------------------------------------------------- meshes

@dataclass
class Mesh:
    points: np.ndarray
    tris: np.ndarray
    bedges: np.ndarray       # boundary edges (k, 2)
    bmarks: np.ndarray       # marker per boundary edge

    def node_marks(self, mark: int) -> np.ndarray:
        sel = np.zeros(len(self.points), dtype=bool)
        sel[self.bedges[self.bmarks == mark].ravel()] = True
        return sel

    def refined(self) -> "Mesh":
        """Split every triangle into four through edge midpoints."""
        t = self.tris
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        key = np.sort(edges, axis=1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        n = len(self.points)
        mids = 0.5 * (self.points[uniq[:, 0]] + self.points[uniq[:, 1]])
        pts = np.vstack([self.points, mids])
        m = len(t)
        e01, e12, e20 = inv[:m] + n, inv[m:2 * m] + n, inv[2 * m:] + n
        a, b, c = t[:, 0], t[:, 1], t[:, 2]
        tris = np.concatenate([np.c_[a, e01, e20], np.c_[e01, b, e12],
                               np.c_[e20, e12, c], np.c_[e01, e12, e20]])
        lookup = {tuple(k): i for i, k in enumerate(uniq)}
        bk = np.sort(self.bedges, axis=1)
        mid_idx = np.array([lookup[tuple(k)] + n for k in bk], dtype=int)
        bedges = np.concatenate([np.c_[self.bedges[:, 0], mid_idx], np.c_[mid_idx, self.bedges[:, 1]]])
        bmarks = np.concatenate([self.bmarks, self.bmarks])
        return Mesh(pts, tris, bedges, bmarks)

    def h(self) -> float:
        e = self.points[self.tris[:, [1, 2, 0]]] - self.points[self.tris]
        return float(np.sqrt((e ** 2).sum(-1)).max())


def _graded_loop(loop: np.ndarray, marks: np.ndarray, corner_idx, h: float, levels: int = 5):
    """Resample a closed loop: edges at most ``h``, geometric grading at corners."""
    pts, mk = [], []
    n = len(loop)
    corners = set(int(i) for i in corner_idx)
    for i in range(n):
        p, q = loop[i], loop[(i + 1) % n]
        length = float(np.hypot(*(q - p)))
        ts = list(np.linspace(0.0, 1.0, max(1, int(np.ceil(length / h))) + 1)[:-1])
        extra = []
        if i in corners:
            extra += [min(0.5, h * 2.0 ** -(k + 1) / length) for k in range(levels)]
        if (i + 1) % n in corners:
            extra += [max(0.5, 1.0 - h * 2.0 ** -(k + 1) / length) for k in range(levels)]
        ts = np.unique(np.round(np.array(ts + extra), 14))
        ts = ts[ts < 1.0]
        for t in ts:
            pts.append(p + t * (q - p))
            mk.append(marks[i])
    return np.array(pts), np.array(mk)


def _seg_distance(q: np.ndarray, loop: np.ndarray) -> np.ndarray:
    a = loop
    b = np.roll(loop, -1, axis=0)
    d = b - a
    t = ((q[:, None, :] - a[None]) * d[None]).sum(-1) / np.maximum((d * d).sum(-1), 1e-300)
    t = np.clip(t, 0.0, 1.0)
    foot = a[None] + t[..., None] * d[None]
    return np.sqrt(((q[:, None, :] - foot) ** 2).sum(-1)).min(1)


def _triangulate(loops, loop_marks, holes, max_area, corners=None, quality=30) -> Mesh:
    verts, segs, smarks = [], [], []
    off = 0
    h = np.sqrt(2.0 * max_area)
    for li, (loop, marks) in enumerate(zip(loops, loop_marks)):
        cidx = corners[li] if corners is not None else []
        pts, mk = _graded_loop(np.asarray(loop, dtype=float), np.asarray(marks), cidx, h)
        k = len(pts)
        verts.append(pts)
        segs.append(np.c_[np.arange(k), (np.arange(k) + 1) % k] + off)
        smarks.append(mk)
        off += k
    data = {"vertices": np.vstack(verts), "segments": np.vstack(segs),
            "segment_markers": np.concatenate(smarks).astype(np.int32)[:, None]}
    if holes:
        data["holes"] = np.asarray(holes, dtype=float)
    out = tr.triangulate(data, f"pq{quality}a{max_area:.12g}Q")
    sing = [np.asarray(l, dtype=float)[list(c)] for l, c in zip(loops, corners or []) if len(c)]
    if sing:
        # area ~ distance to the nearest quad-vertex: mixed-condition corners
        # carry r^(1/2) singularities that a uniform mesh resolves only to O(h)
        sing = np.vstack(sing)
        allv = np.vstack([np.asarray(l, dtype=float) for l in loops])
        scale = 0.5 * float(np.ptp(allv, axis=0).min())
        for _ in range(3):
            cen = out["vertices"][out["triangles"]].mean(1)
            r = np.sqrt(((cen[:, None, :] - sing[None]) ** 2).sum(-1)).min(1)
            lim = max_area * np.clip(r / scale, 1e-4, 1.0)
            out["triangle_max_area"] = lim
            out = tr.triangulate(out, f"rpq{quality}aQ")
    return Mesh(out["vertices"], out["triangles"].astype(int),
                out["segments"].astype(int), out["segment_markers"].ravel().astype(int))


# ---------------------------------------------------------------- FEM

def stiffness(points, tris):
    x = points[tris]
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(area <= 0):
        raise ValueError("mesh has inverted or degenerate triangles")
    e = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], 1)
    K = np.einsum("tik,tjk->tij", e, e) / (4.0 * area[:, None, None])
    I = np.repeat(tris, 3, axis=1).ravel()
    J = np.tile(tris, (1, 3)).ravel()
    n = len(points)
    return sp.csr_matrix((K.ravel(), (I, J)), shape=(n, n))


def gradients(points, tris, u):
    x = points[tris]
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    du1 = u[tris[:, 1]] - u[tris[:, 0]]
    du2 = u[tris[:, 2]] - u[tris[:, 0]]
    gx = (du1 * d2[:, 1] - du2 * d1[:, 1]) / det
    gy = (du2 * d1[:, 0] - du1 * d2[:, 0]) / det
    return np.c_[gx, gy], 0.5 * det


def solve_dirichlet(mesh: Mesh, zero_mask, one_mask):
    K = stiffness(mesh.points, mesh.tris)
    fixed = zero_mask | one_mask
    u = np.where(one_mask, 1.0, 0.0)
    free = ~fixed
    if free.any():
        A = K[free][:, free].tocsc()
        rhs = -(K[free][:, fixed] @ u[fixed])
        u[free] = spl.spsolve(A, rhs)
    return u, float(u @ (K @ u))


@dataclass
class HarmonicField:
    mesh: Mesh
    u: np.ndarray
    labels: np.ndarray       # 0 dirichlet0, 1 dirichlet1, 2 neumann, -1 interior
    dirichlet_energy: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["node", "x", "y", "u"])
        for i, ((x, y), v) in enumerate(zip(self.mesh.points, self.u)):
            wr.writerow([i, repr(float(x)), repr(float(y)), repr(float(v))])
        return buf.getvalue()

    def level_segments(self, level: float) -> list:
        p, t, u = self.mesh.points, self.mesh.tris, self.u
        segs = []
        for tri in t:
            vals = u[tri] - level
            cross = []
            for a, b in ((0, 1), (1, 2), (2, 0)):
                va, vb = vals[a], vals[b]
                if (va < 0) != (vb < 0):
                    s = va / (va - vb)
                    cross.append(p[tri[a]] + s * (p[tri[b]] - p[tri[a]]))
            if len(cross) == 2:
                segs.append((cross[0], cross[1]))
        return segs

    def to_svg(self, levels=tuple(np.round(np.arange(0.1, 1.0, 0.1), 1)), size: int = 480) -> str:
        p = self.mesh.points
        lo, hi = p.min(0), p.max(0)
        scale = size / max(hi - lo)
        def tf(q):
            return (q[0] - lo[0]) * scale, (hi[1] - q[1]) * scale
        w, h = (hi - lo) * scale
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1f}" height="{h:.1f}">']
        for (a, b), m in zip(self.mesh.bedges, self.mesh.bmarks):
            (x1, y1), (x2, y2) = tf(p[a]), tf(p[b])
            out.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="black"/>')
        for lev in levels:
            for a, b in self.level_segments(lev):
                (x1, y1), (x2, y2) = tf(a), tf(b)
                out.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                           f'stroke="steelblue" stroke-width="0.6"/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


@dataclass
class ModulusReport:
    modulus: float
    mesh_sizes: tuple
    extrapolated: bool
    estimated_error: float
    energies: tuple = ()
    field: HarmonicField | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {"modulus": self.modulus, "mesh_sizes": list(self.mesh_sizes),
                "extrapolated": self.extrapolated, "estimated_error": self.estimated_error}


def _richardson(e1, e2):
    ext = (4.0 * e2 - e1) / 3.0
    return ext, abs(e2 - ext)


# ---------------------------------------------------------------- quadrilaterals

def _check_quad(Q: MarkedQuadrilateral):
    poly = Q.boundary
    if not poly.is_simple():
        raise ValueError("quadrilateral boundary self-intersects")
    per = poly.length()
    for k in range(4):
        side = Q.side(k)
        if np.abs(np.diff(side)).sum() < 1e-9 * per:
            raise ValueError(f"degenerate marked side {k}")


def quad_mesh(Q: MarkedQuadrilateral, target_triangles: int = 3000) -> Mesh:
    _check_quad(Q)
    pts = np.c_[Q.boundary.vertices.real, Q.boundary.vertices.imag]
    labels = Q.side_labels()
    marks = np.array([_SIDE_MARK[k] for k in labels])
    area = abs(Q.boundary.signed_area())
    return _triangulate([pts], [marks], [], area / target_triangles,
                        corners=[list(Q.vertex_indices)])


def _quad_field(mesh: Mesh):
    zero = mesh.node_marks(A1)
    one = mesh.node_marks(A2)
    u, e = solve_dirichlet(mesh, zero, one)
    labels = np.full(len(mesh.points), -1)
    labels[mesh.node_marks(B1) | mesh.node_marks(B2)] = 2
    labels[zero] = 0
    labels[one] = 1
    return HarmonicField(mesh, u, labels, e)


def quad_modulus(Q: MarkedQuadrilateral, target_triangles: int = 3000) -> ModulusReport:
    m1 = quad_mesh(Q, target_triangles)
    m2 = m1.refined()
    f1, f2 = _quad_field(m1), _quad_field(m2)
    ext, err = _richardson(f1.dirichlet_energy, f2.dirichlet_energy)
    return ModulusReport(ext, (m1.h(), m2.h()), True, err,
                         (f1.dirichlet_energy, f2.dirichlet_energy), f2)


class TriLocator:
    """Point location in a fixed triangulation with barycentric interpolation."""

    def __init__(self, points: np.ndarray, tris: np.ndarray, k: int = 12):
        x = points[tris]
        det = np.abs((x[:, 1, 0] - x[:, 0, 0]) * (x[:, 2, 1] - x[:, 0, 1])
                     - (x[:, 1, 1] - x[:, 0, 1]) * (x[:, 2, 0] - x[:, 0, 0]))
        # collapsed triangles (e.g. exponentially thin images of dead-end pockets)
        tris = tris[det > 1e-12 * np.median(det)]
        self.points = points
        self.tris = tris
        self.cent = points[tris].mean(axis=1)
        self.tree = cKDTree(self.cent)
        self.k = min(k, len(tris))
        x = points[tris]
        self.T = np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]], axis=2)
        self.Tinv = np.linalg.inv(self.T)

    def locate(self, q: np.ndarray):
        q = np.atleast_2d(q)
        _, cand = self.tree.query(q, k=self.k)
        cand = cand.reshape(len(q), -1)
        rel = q[:, None, :] - self.points[self.tris[cand, 0]]
        lam = np.einsum("nkij,nkj->nki", self.Tinv[cand], rel)
        bary = np.concatenate([1.0 - lam.sum(-1, keepdims=True), lam], axis=-1)
        score = bary.min(-1)
        best = np.argmax(score, axis=1)
        rows = np.arange(len(q))
        tri = cand[rows, best]
        b = bary[rows, best]
        # clamp points slightly outside the mesh onto the nearest triangle
        b = np.clip(b, 0.0, None)
        b /= b.sum(-1, keepdims=True)
        return tri, b, score[rows, best]

    def interpolate(self, q: np.ndarray, values: np.ndarray):
        tri, b, score = self.locate(q)
        return np.einsum("ni,ni...->n...", b, values[self.tris[tri]]), score


@dataclass
class MapTable:
    """Conformal coordinates of a quadrilateral: domain nodes and rectangle images."""
    domain: np.ndarray        # complex node positions
    image: np.ndarray         # complex rectangle coordinates x + i y, x in [0, M]
    tris: np.ndarray
    modulus: float
    residual: float
    corner_images: np.ndarray
    _fwd: TriLocator | None = field(default=None, repr=False)
    _inv: TriLocator | None = field(default=None, repr=False)

    def forward(self, z):
        if self._fwd is None:
            self._fwd = TriLocator(np.c_[self.domain.real, self.domain.imag], self.tris)
        zz = np.atleast_1d(np.asarray(z, dtype=complex))
        val, _ = self._fwd.interpolate(np.c_[zz.real, zz.imag], self.image)
        return val

    def inverse(self, w):
        if self._inv is None:
            self._inv = TriLocator(np.c_[self.image.real, self.image.imag], self.tris)
        ww = np.atleast_1d(np.asarray(w, dtype=complex))
        val, _ = self._inv.interpolate(np.c_[ww.real, ww.imag], self.domain)
        return val


def conjugate(points, tris, u, anchor: int):
    """Harmonic conjugate by least-squares integration of the rotated gradient.

    Each mesh edge gets the increment of the rotated gradient (averaged over
    its triangles); node values solve the edge least-squares problem with
    the anchor held at 0.  Returns values and the max edge residual
    relative to the mean edge increment.
    """
    g, _ = gradients(points, tris, u)
    rot = np.c_[g[:, 1], -g[:, 0]]
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    owner = np.tile(np.arange(len(tris)), 3)
    key = np.sort(edges, axis=1)
    flip = edges[:, 0] != key[:, 0]
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    d = points[key[:, 1]] - points[key[:, 0]]
    inc = (rot[owner] * d).sum(1)
    inc_sum = np.bincount(inv, weights=inc, minlength=len(uniq))
    cnt = np.bincount(inv, minlength=len(uniq))
    target = inc_sum / cnt
    n = len(points)
    m = len(uniq)
    D = sp.csr_matrix((np.r_[-np.ones(m), np.ones(m)],
                       (np.r_[np.arange(m), np.arange(m)], np.r_[uniq[:, 0], uniq[:, 1]])),
                      shape=(m, n))
    keep = np.ones(n, dtype=bool)
    keep[anchor] = False
    Dk = D[:, keep]
    v = np.zeros(n)
    v[keep] = spl.spsolve((Dk.T @ Dk).tocsc(), Dk.T @ target)
    res = np.abs(D @ v - target)
    return v, float(res.max() / max(np.abs(target).mean(), 1e-300))


def quad_uniformize(Q: MarkedQuadrilateral, samples: int = 4000) -> MapTable:
    """Conformal coordinates: node positions and their images in [0, M] x [0, 1].

    The imaginary part is the potential joining the a-sides; the real part
    is the potential of the dual problem (b2 at 0, b1 at 1).
    The reported residual compares M with the reciprocal dual energy.
    """
    rep = quad_modulus(Q, max(200, samples // 4))
    fld = rep.field
    mesh = fld.mesh
    dual, e_dual = solve_dirichlet(mesh, mesh.node_marks(B2), mesh.node_marks(B1))
    # the discrete dual modulus 1/e_dual carries the corner pollution; scaling
    # by it keeps the far-from-b1 part exact, and a smoothstep near b1 takes
    # up the remaining gap to the extrapolated modulus
    t = np.clip(5.0 * dual - 4.0, 0.0, 1.0)
    x = dual / e_dual + (rep.modulus - 1.0 / e_dual) * t * t * (3.0 - 2.0 * t)
    image = x + 1j * fld.u
    domain = mesh.points[:, 0] + 1j * mesh.points[:, 1]
    corner_nodes = [int(np.argmin(np.abs(domain - c))) for c in Q.corners()]
    res = abs(rep.modulus * e_dual - 1.0)
    return MapTable(domain, image, mesh.tris, rep.modulus, res, image[corner_nodes])


# ---------------------------------------------------------------- annuli

def _inside_point(poly: Polyline) -> np.ndarray:
    v = poly.vertices
    scale = poly.length() / max(len(v), 1)
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        mid = 0.5 * (a + b)
        nrm = 1j * (b - a) / max(abs(b - a), 1e-300)
        if not poly.ccw():
            nrm = -nrm
        for eps in (1e-3, 1e-6):
            cand = mid + nrm * eps * scale
            if poly.contains(cand)[0]:
                return np.array([cand.real, cand.imag])
    raise ValueError("could not find a point inside the inner curve")


def annulus_modulus(inner: Polyline, outer: Polyline, target_triangles: int = 4000) -> ModulusReport:
    """Modulus of the curve family separating the two boundary components."""
    for c in (inner, outer):
        if not c.closed or not c.is_simple():
            raise ValueError("annulus boundaries must be simple closed curves")
    if not np.all(outer.contains(inner.vertices)):
        raise ValueError("inner curve is not inside the outer curve")
    if not _loops_disjoint(inner, outer):
        raise ValueError("annulus boundaries intersect")
    area = polygon_abs_area(outer) - polygon_abs_area(inner)
    if area <= 0:
        raise ValueError("degenerate annulus")
    loops = [np.c_[c.vertices.real, c.vertices.imag] for c in (inner, outer)]
    mk = [np.full(len(inner.vertices), INNER), np.full(len(outer.vertices), OUTER)]
    m1 = _triangulate(loops, mk, [_inside_point(inner)], area / target_triangles)
    m2 = m1.refined()
    energies = []
    fld = None
    for m in (m1, m2):
        u, e = solve_dirichlet(m, m.node_marks(INNER), m.node_marks(OUTER))
        energies.append(e)
        labels = np.where(m.node_marks(INNER), 0, np.where(m.node_marks(OUTER), 1, -1))
        fld = HarmonicField(m, u, labels, e)
    ext, _ = _richardson(*energies)
    mod = 1.0 / ext
    err = abs(1.0 / energies[1] - mod)
    return ModulusReport(mod, (m1.h(), m2.h()), True, err, tuple(energies), fld)


def polygon_abs_area(p: Polyline) -> float:
    return abs(p.signed_area())


def _loops_disjoint(a: Polyline, b: Polyline) -> bool:
    a1, a2 = a.edges()
    b1, b2 = b.edges()
    for i in range(len(a1)):
        if np.any(_segments_intersect(a1[i], a2[i], b1, b2)):
            return False
    return True


# ---------------------------------------------------------------- rectangle harmonic measure

def _crisscross(L: float, n: int):
    nx = int(round(2 * L * n))
    ny = 2 * n
    xs = np.linspace(-L, L, nx + 1)
    ys = np.linspace(-1.0, 1.0, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    corners = np.c_[X.ravel(), Y.ravel()]
    CX, CY = np.meshgrid(0.5 * (xs[:-1] + xs[1:]), 0.5 * (ys[:-1] + ys[1:]), indexing="ij")
    c0 = len(corners)
    pts = np.vstack([corners, np.c_[CX.ravel(), CY.ravel()]])
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    I, J = I.ravel(), J.ravel()
    a = I * (ny + 1) + J
    b = (I + 1) * (ny + 1) + J
    c = (I + 1) * (ny + 1) + J + 1
    d = I * (ny + 1) + J + 1
    m = c0 + I * ny + J
    tris = np.concatenate([np.c_[a, b, m], np.c_[b, c, m], np.c_[c, d, m], np.c_[d, a, m]])
    return pts, tris


def _hm_value(L: float, n: int, side: str) -> float:
    pts, tris = _crisscross(L, n)
    x, y = pts[:, 0], pts[:, 1]
    tol = 1e-12
    vert = np.abs(np.abs(x) - L) < tol
    horiz = np.abs(np.abs(y) - 1.0) < tol
    bnd = vert | horiz
    ends = vert & ~horiz
    if side == "left":
        ends &= x < 0
    elif side == "right":
        ends &= x > 0
    K = stiffness(pts, tris)
    u = np.where(ends, 1.0, 0.0)
    free = ~bnd
    u[free] = spl.spsolve(K[free][:, free].tocsc(), -(K[free][:, bnd] @ u[bnd]))
    return float(u[np.argmin(np.abs(x) + np.abs(y))])


def rect_harmonic_measure(L: float, n: int = 16, side: str = "both") -> float:
    """Harmonic measure at 0 of the vertical ends of [-L, L] x [-1, 1]."""
    if L <= 0:
        raise ValueError("L must be positive")
    if side not in ("both", "left", "right"):
        raise ValueError("side must be both, left or right")
    v1 = _hm_value(L, n, side)
    v2 = _hm_value(L, 2 * n, side)
    return (4.0 * v2 - v1) / 3.0


# ---------------------------------------------------------------- modulus rules

def _region_between(left, right, bottom=0.0, top=1.0, n_side=1) -> MarkedQuadrilateral:
    """Quad bounded by two x-graphs over [bottom, top]; a-sides vertical."""
    lx = np.asarray(left, dtype=complex)
    rx = np.asarray(right, dtype=complex)
    # a1: left curve (top to bottom), b1: bottom, a2: right curve (bottom to top), b2: top
    a1 = lx[::-1]
    b1 = np.array([lx[0], rx[0]])
    a2 = rx
    b2 = np.array([rx[-1], lx[-1]])
    return MarkedQuadrilateral.from_sides(a1, b1, a2, b2)


def _vertical(x, bottom, top, k=64, amp=0.0, waves=0):
    y = np.linspace(bottom, top, k + 1)
    return x + amp * np.sin(waves * np.pi * (y - bottom) / (top - bottom)) + 1j * y


def modulus_rules_check(seed: int = 0, target_triangles: int = 2500) -> dict:
    """Serial and parallel rules on randomized rectangles."""
    rng = np.random.default_rng(seed)
    m = float(rng.uniform(2.0, 3.5))
    m1 = float(rng.uniform(0.35, 0.65) * m)
    amp = float(rng.uniform(0.1, 0.25))

    def lam(left, right):
        rep = quad_modulus(_region_between(left, right), target_triangles)
        return 1.0 / rep.modulus

    edge_l = _vertical(0.0, 0.0, 1.0, 4)
    edge_r = _vertical(m, 0.0, 1.0, 4)
    whole = lam(edge_l, edge_r)
    straight = _vertical(m1, 0.0, 1.0, 4)
    straight_sum = lam(edge_l, straight) + lam(straight, edge_r)
    wiggle = _vertical(m1, 0.0, 1.0, 64, amp, 3)
    wiggle_sum = lam(edge_l, wiggle) + lam(wiggle, edge_r)

    # parallel rule: square split into stacked halves, family joining left and right
    split = float(rng.uniform(0.3, 0.7))
    def mod_lr(bottom, top):
        q = _region_between(_vertical(0.0, bottom, top, 4), _vertical(1.0, bottom, top, 4))
        return quad_modulus(q, target_triangles).modulus
    M = mod_lr(0.0, 1.0)
    M1 = mod_lr(0.0, split)
    M2 = mod_lr(split, 1.0)
    return {
        "seed": seed, "length": m, "split": m1, "amplitude": amp,
        "lambda": whole, "lambda_sum_straight": straight_sum, "lambda_sum_wiggly": wiggle_sum,
        "serial_equality_rel": abs(straight_sum - whole) / whole,
        "serial_strict_gap": whole - wiggle_sum,
        "serial_ok": straight_sum <= whole * 1.01 and wiggle_sum <= whole * 1.01,
        "M": M, "M1": M1, "M2": M2,
        "parallel_ok": M1 + M2 <= M * 1.01,
    }


def report_json(rep) -> str:
    return json.dumps(rep.to_json() if hasattr(rep, "to_json") else rep, indent=2, sort_keys=True)
