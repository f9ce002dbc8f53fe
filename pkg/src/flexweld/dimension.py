"""s-additive square layouts, Mattila trees, natural measures, box counting and
thin corridors joining squares into a shape."""
from __future__ import annotations

import io
import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from shapely.geometry import Polygon, box
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

from .core_geom import Disk, MarkedQuadrilateral, Polyline

ANCHOR_SIDE = 0.2
ANCHORS = np.array([0.2 + 0.2j, 0.6 + 0.2j, 0.2 + 0.6j, 0.6 + 0.6j])   # lower-left corners
MAX_LEAVES = 4_000_000
MAX_SQUARES = 200_000
MIN_WIDTH = 1e-12          # corridors thinner than this are not resolved in double precision


def side_for(s: float, n: int) -> float:
    """Square side x solving 4 n (sqrt2 x)^s = 1."""
    return float((4.0 * n * 2.0 ** (s / 2.0)) ** (-1.0 / s))


def _grid_cells(n: int, k: int) -> np.ndarray:
    """n of the k*k cells of a grid, spread evenly in row-major order."""
    idx = np.unique(np.round(np.linspace(0, k * k - 1, n)).astype(int))
    return np.c_[idx % k, idx // k]


@dataclass
class SAdditiveLayout:
    s: float
    n: int
    x: float
    anchors: np.ndarray                 # lower-left corners of the four R^m
    placements: np.ndarray              # lower-left corners of the squares (complex)
    owner: np.ndarray                   # anchor index of each square
    density: float
    pitch: float
    seed: int = 0

    @property
    def identity_error(self) -> float:
        return abs(4.0 * self.n * (np.sqrt(2.0) * self.x) ** self.s - 1.0)

    @property
    def centers(self) -> np.ndarray:
        return self.placements + 0.5 * self.x * (1 + 1j)

    def nearest_neighbor(self) -> np.ndarray:
        c = self.centers
        out = np.empty(c.size)
        for m in range(4):
            sel = np.flatnonzero(self.owner == m)
            pts = np.c_[c[sel].real, c[sel].imag]
            dist, _ = cKDTree(pts).query(pts, k=2)
            out[sel] = dist[:, 1]
        return out

    def checks(self) -> dict:
        nn = self.nearest_neighbor()
        band = self.x ** (self.s / 2.0)
        ll = self.placements
        inside = bool(np.all(
            (ll.real >= self.anchors[self.owner].real - 1e-15)
            & (ll.imag >= self.anchors[self.owner].imag - 1e-15)
            & (ll.real + self.x <= self.anchors[self.owner].real + ANCHOR_SIDE + 1e-15)
            & (ll.imag + self.x <= self.anchors[self.owner].imag + ANCHOR_SIDE + 1e-15)))
        return {
            "identity_error": self.identity_error,
            "feasible": bool(self.n * self.x ** 2 <= 1.0 / 25.0),
            "inside_anchors": inside,
            "disjoint": bool(_disjoint_squares(ll, self.x)),
            "nn_min_over_band": float(nn.min() / band),
            "nn_max_over_band": float(nn.max() / band),
            "nn_in_band": bool(nn.min() >= band / 4.0 and nn.max() <= 4.0 * band),
        }

    def count_test(self, trials: int = 200, seed: int = 0) -> dict:
        """Squares with centers in random disks against ``P(s) pi r^2 / x^2``."""
        rng = np.random.default_rng(seed)
        c = self.centers
        ratios = []
        for _ in range(trials):
            m = rng.integers(4)
            r = rng.uniform(2.0 * self.pitch, 0.5 * ANCHOR_SIDE)
            lo = self.anchors[m] + r
            span = ANCHOR_SIDE - 2 * r
            z = lo + span * (rng.uniform() + 1j * rng.uniform())
            count = int(np.count_nonzero(np.abs(c - z) <= r))
            ratios.append(count / (self.density * np.pi * r * r / self.x ** 2))
        ratios = np.array(ratios)
        return {"mean": float(ratios.mean()), "min": float(ratios.min()), "max": float(ratios.max())}

    def to_json(self) -> dict:
        return {"s": self.s, "n": self.n, "x": self.x, "density": self.density, "pitch": self.pitch,
                "seed": self.seed,
                "squares": [[float(z.real), float(z.imag)] for z in self.placements]}

    def to_svg(self, size: int = 600) -> str:
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
               f'<rect x="0" y="0" width="{size}" height="{size}" fill="none" stroke="black"/>']
        for a in self.anchors:
            out.append(_svg_square(a, ANCHOR_SIDE, size, 'fill="none" stroke="gray"'))
        for z in self.placements:
            out.append(_svg_square(z, self.x, size, 'fill="black"'))
        out.append("</svg>")
        return "\n".join(out)


def _svg_square(ll: complex, side: float, size: int, style: str) -> str:
    return (f'<rect x="{ll.real * size:.3f}" y="{(1 - ll.imag - side) * size:.3f}" '
            f'width="{side * size:.3f}" height="{side * size:.3f}" {style}/>')


def _disjoint_squares(ll: np.ndarray, side) -> bool:
    side = np.broadcast_to(np.asarray(side, dtype=float), ll.shape)
    order = np.argsort(ll.real)
    x0, y0, w = ll.real[order], ll.imag[order], side[order]
    for i in range(len(x0)):
        j = i + 1
        while j < len(x0) and x0[j] < x0[i] + w[i]:
            if y0[j] < y0[i] + w[i] and y0[i] < y0[j] + w[j]:
                return False
            j += 1
    return True


def s_additive_squares(s: float, n_min: int = 32, seed: int = 0) -> SAdditiveLayout:
    """Least ``n >= n_min`` with ``n x^2 <= 1/25`` that also fits a grid in each
    anchor square; squares sit in a jittered grid of pitch ``1/(5k)``."""
    if not 1.0 < s < 2.0:
        raise ValueError("s must lie in (1, 2)")
    n = max(1, int(n_min))
    while True:
        x = side_for(s, n)
        k = int(np.ceil(np.sqrt(n)))
        if n * x * x <= 1.0 / 25.0 and x < ANCHOR_SIDE / k:
            break
        n += 1
        if n > MAX_SQUARES:
            # n x^2 decays like n^(1 - 2/s); near s = 2 no packable n exists
            raise ValueError(f"no s-additive packing with at most {MAX_SQUARES} squares for s={s}")
    pitch = ANCHOR_SIDE / k
    slack = pitch - x
    rng = np.random.default_rng(seed)
    cells = _grid_cells(n, k)
    ll, owner = [], []
    for m, a in enumerate(ANCHORS):
        jit = rng.uniform(-0.25, 0.25, size=(len(cells), 2)) * slack * 0.5
        base = a + (cells[:, 0] * pitch + 0.5 * slack + jit[:, 0]) + 1j * (cells[:, 1] * pitch + 0.5 * slack + jit[:, 1])
        ll.append(base)
        owner.append(np.full(len(cells), m))
    ll = np.concatenate(ll)
    density = 25.0 * len(cells) * x * x
    return SAdditiveLayout(float(s), len(cells), x, ANCHORS.copy(), ll, np.concatenate(owner),
                           float(density), float(pitch), seed)


# ---------------------------------------------------------------- separation

def covering_sum(layout: SAdditiveLayout, z: complex, r: float) -> float:
    """Sum of d(Q)^s over layout squares meeting the disk D(z, r)."""
    ll = layout.placements
    x = layout.x
    dx = np.clip(z.real, ll.real, ll.real + x) - z.real
    dy = np.clip(z.imag, ll.imag, ll.imag + x) - z.imag
    hit = dx * dx + dy * dy <= r * r
    return float(np.count_nonzero(hit) * (np.sqrt(2.0) * x) ** layout.s)


def separation_check(layout: SAdditiveLayout, trials: int = 1000, seed: int = 0) -> dict:
    """Random disks: centers uniform in the unit square, radius log-uniform in
    [x, 1].  The per-bin maximum of ``sum / r^s`` must not grow with r."""
    rng = np.random.default_rng(seed)
    s, x = layout.s, layout.x
    rs = np.exp(rng.uniform(np.log(x), 0.0, trials))
    zs = rng.uniform(0, 1, trials) + 1j * rng.uniform(0, 1, trials)
    sums = np.array([covering_sum(layout, z, r) for z, r in zip(zs, rs)])
    ratio = sums / rs ** s
    keep = sums > 0
    slope_sum = float(np.polyfit(np.log(rs[keep]), np.log(sums[keep]), 1)[0])
    edges = np.linspace(np.log(x), 0.0, 7)
    lr = np.log(rs)
    mids, maxes = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = keep & (lr >= lo) & (lr < hi)
        if np.any(sel):
            mids.append(0.5 * (lo + hi))
            maxes.append(ratio[sel].max())
    slope_max = float(np.polyfit(mids, np.log(maxes), 1)[0]) if len(mids) >= 2 else 0.0
    const = float(ratio.max())
    c0 = layout.centers[0]
    hits = int(round(covering_sum(layout, c0, x) / (np.sqrt(2.0) * x) ** s))
    return {"trials": trials, "seed": seed, "hits": int(keep.sum()), "max_ratio": const,
            "fitted_constant": const, "slope_log_sum": slope_sum, "slope_log_max_ratio": slope_max,
            "passes": bool(slope_max <= 0.05),
            "whole_sum": covering_sum(layout, 0.5 + 0.5j, np.sqrt(0.5)),
            "whole_ratio": covering_sum(layout, 0.5 + 0.5j, np.sqrt(0.5)) / np.sqrt(0.5) ** s,
            "single_disk": {"r": x, "squares_hit": hits,
                            "ratio": covering_sum(layout, c0, x) / x ** s}}


# ---------------------------------------------------------------- Mattila trees

@dataclass
class SquareTree:
    s: float
    n: int
    ratio: float
    levels: list        # per level: lower-left corners (complex)
    sides: list         # per level: side lengths
    parents: list       # per level: parent index into the previous level
    seed: int = 0

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def diameters(self, k: int) -> np.ndarray:
        return np.sqrt(2.0) * self.sides[k]

    def leaves(self):
        return self.levels[-1], self.sides[-1]

    def checks(self) -> dict:
        s = self.s
        contained = True
        sums_err = 0.0
        min_sep = np.inf
        for k in range(1, len(self.levels)):
            ll, side = self.levels[k], self.sides[k]
            par = self.parents[k]
            pll, pside = self.levels[k - 1][par], self.sides[k - 1][par]
            contained &= bool(np.all((ll.real >= pll.real) & (ll.imag >= pll.imag)
                                     & (ll.real + side <= pll.real + pside)
                                     & (ll.imag + side <= pll.imag + pside)))
            tot = np.bincount(par, weights=self.diameters(k) ** s, minlength=len(self.levels[k - 1]))
            want = self.diameters(k - 1) ** s
            sums_err = max(sums_err, float(np.abs(tot / want - 1.0).max()))
            for p in np.unique(par)[:64]:
                sel = np.flatnonzero(par == p)
                gap = _min_gap(ll[sel], side[sel]) / (np.sqrt(2.0) * self.sides[k - 1][p])
                min_sep = min(min_sep, gap)
        dmax = [float(self.diameters(k).max()) for k in range(len(self.levels))]
        decreasing = all(b < a for a, b in zip(dmax, dmax[1:]))
        return {"contained": bool(contained), "diameters_decreasing": bool(decreasing),
                "level_max_diameter": dmax, "additivity_error": sums_err,
                "separation_ratio": float(min_sep) if np.isfinite(min_sep) else None}

    def to_json(self) -> dict:
        return {"s": self.s, "n": self.n, "ratio": self.ratio, "seed": self.seed,
                "levels": [[[float(z.real), float(z.imag), float(w)] for z, w in zip(l, sd)]
                           for l, sd in zip(self.levels[:3], self.sides[:3])],
                "depth": self.depth, "leaf_count": int(len(self.levels[-1]))}

    def to_svg(self, size: int = 600, max_level: int | None = None) -> str:
        k = self.depth if max_level is None else min(max_level, self.depth)
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
        for z, sd in zip(self.levels[k], self.sides[k]):
            out.append(_svg_square(z, sd, size, 'fill="black"'))
        out.append("</svg>")
        return "\n".join(out)


def _min_gap(ll: np.ndarray, side: np.ndarray) -> float:
    if len(ll) < 2:
        return np.inf
    a0, a1 = ll[:, None], ll[None, :]
    s0, s1 = side[:, None], side[None, :]
    gx = np.maximum(a1.real - (a0.real + s0), a0.real - (a1.real + s1))
    gy = np.maximum(a1.imag - (a0.imag + s0), a0.imag - (a1.imag + s1))
    g = np.maximum(gx, gy)
    np.fill_diagonal(g, np.inf)
    return float(g.min())


def tree_children(s: float, n_min: int = 1):
    """Children count per quadrant and the side ratio ``sqrt2 x(s, n)``.

    The sums ``4 n (sqrt2 x)^s = 1`` are read relative to the parent's
    diameter, so a child's side is ``sqrt2 x`` times the parent's side; the
    children fill the four quadrants of the parent on a ``k x k`` grid.
    """
    n = max(1, int(n_min))
    while True:
        rho = np.sqrt(2.0) * side_for(s, n)
        k = int(np.ceil(np.sqrt(n)))
        if rho < 0.5 / k:
            return n, float(rho), k
        n += 1


def mattila_build(s: float, depth: int, n_min: int = 1, seed: int = 0) -> SquareTree:
    if not 1.0 < s < 2.0:
        raise ValueError("s must lie in (1, 2)")
    if depth < 0 or depth > 5:
        raise ValueError("depth must lie in 0..5")
    n, rho, k = tree_children(s, n_min)
    if (4 * n) ** depth > MAX_LEAVES:
        raise MemoryError(f"{(4 * n) ** depth} leaves exceed the guard {MAX_LEAVES}")
    rng = np.random.default_rng(seed)
    cells = _grid_cells(n, k)
    pitch = 0.5 / k
    slack = pitch - rho
    quads = np.array([0, 0.5, 0.5j, 0.5 + 0.5j])
    offs = (quads[:, None] + cells[None, :, 0] * pitch + 1j * cells[None, :, 1] * pitch).ravel() \
        + 0.5 * slack * (1 + 1j)
    levels, sides, parents = [np.array([0j])], [np.array([1.0])], [np.array([], dtype=int)]
    for _ in range(depth):
        pll, pside = levels[-1], sides[-1]
        m = len(offs)
        jit = rng.uniform(-0.25, 0.25, size=(len(pll), m, 2)) * slack * 0.5
        ll = pll[:, None] + pside[:, None] * (offs[None, :] + jit[..., 0] + 1j * jit[..., 1])
        levels.append(ll.ravel())
        sides.append(np.repeat(pside * rho, m))
        parents.append(np.repeat(np.arange(len(pll)), m))
    return SquareTree(float(s), n, rho, levels, sides, parents, seed)


@dataclass
class TreeMeasure:
    s: float
    masses: list        # per level

    def leaf_masses(self) -> np.ndarray:
        return self.masses[-1]


def natural_measure(tree: SquareTree) -> TreeMeasure:
    masses = [np.array([1.0])]
    for k in range(1, len(tree.levels)):
        par = tree.parents[k]
        w = tree.diameters(k) ** tree.s
        tot = np.bincount(par, weights=w, minlength=len(tree.levels[k - 1]))
        masses.append(masses[-1][par] * w / tot[par])
    return TreeMeasure(tree.s, masses)


def conservation_error(tree: SquareTree, meas: TreeMeasure) -> float:
    err = 0.0
    for k in range(1, len(tree.levels)):
        tot = np.bincount(tree.parents[k], weights=meas.masses[k], minlength=len(tree.levels[k - 1]))
        err = max(err, float(np.abs(tot - meas.masses[k - 1]).max()))
    return err


def frostman_check(tree: SquareTree, meas: TreeMeasure, trials: int = 400, seed: int = 0) -> dict:
    """``mu(D) / r^s`` over random disks at dyadic radii down to the leaf size.

    mu(D) is bounded above by the mass of the leaves the disk meets.
    """
    rng = np.random.default_rng(seed)
    ll, side = tree.leaves()
    mass = meas.leaf_masses()
    c = ll + 0.5 * side * (1 + 1j)
    leaf_d = float(np.sqrt(2.0) * side.max())
    scales = []
    r = 0.5
    while r >= leaf_d:
        scales.append(r)
        r *= 0.5
    sups = []
    for r in scales:
        best = 0.0
        for _ in range(trials // max(1, len(scales)) + 1):
            z = c[rng.integers(len(c))] + r * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
            dx = np.clip(z.real, ll.real, ll.real + side) - z.real
            dy = np.clip(z.imag, ll.imag, ll.imag + side) - z.imag
            m = mass[dx * dx + dy * dy <= r * r].sum()
            best = max(best, m / r ** tree.s)
        sups.append(best)
    sups = np.array(sups)
    ratios = sups[1:] / sups[:-1] if len(sups) > 1 else np.array([1.0])
    return {"scales": scales, "sup_ratio": sups.tolist(), "constant": float(sups.max()),
            "consecutive": ratios.tolist(),
            "stable": bool(np.all((ratios >= 0.5) & (ratios <= 2.0)))}


# ---------------------------------------------------------------- box counting

@dataclass
class BoxDimReport:
    estimate: float
    fit_r2: float
    scales: list
    counts: list

    @property
    def flagged(self) -> bool:
        return self.fit_r2 < 0.98

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "count"])
        for d, n in zip(self.scales, self.counts):
            w.writerow([repr(float(d)), int(n)])
        return buf.getvalue()


def _rect_boxes(x0, y0, x1, y1, delta):
    i0 = np.floor(x0 / delta).astype(np.int64)
    i1 = np.floor(np.nextafter(x1, -np.inf) / delta).astype(np.int64)
    j0 = np.floor(y0 / delta).astype(np.int64)
    j1 = np.floor(np.nextafter(y1, -np.inf) / delta).astype(np.int64)
    keys = []
    for a, b, c, d in zip(i0, i1, j0, j1):
        ii, jj = np.meshgrid(np.arange(a, b + 1), np.arange(c, d + 1), indexing="ij")
        keys.append((ii.ravel() << 32) + (jj.ravel() & 0xFFFFFFFF))
    return np.unique(np.concatenate(keys)).size if keys else 0


def box_count(obj, delta: float) -> int:
    if isinstance(obj, dict):            # axis-aligned rectangles x0, y0, x1, y1
        return int(_rect_boxes(obj["x0"], obj["y0"], obj["x1"], obj["y1"], delta))
    pts = np.asarray(obj)
    if np.iscomplexobj(pts):
        pts = np.c_[pts.real, pts.imag]
    ij = np.floor(pts / delta).astype(np.int64)
    return int(np.unique((ij[:, 0] << 32) + (ij[:, 1] & 0xFFFFFFFF)).size)


def squares_as_rects(ll: np.ndarray, side) -> dict:
    side = np.broadcast_to(np.asarray(side, dtype=float), ll.shape)
    return {"x0": ll.real, "y0": ll.imag, "x1": ll.real + side, "y1": ll.imag + side}


def merge_rects(*rects) -> dict:
    return {k: np.concatenate([np.asarray(r[k], dtype=float) for r in rects]) for k in ("x0", "y0", "x1", "y1")}


def box_dim(obj, scales=None) -> BoxDimReport:
    """Least-squares slope of log N(delta) against log(1/delta).

    ``obj`` is a point array (complex or (N,2)) or a dict of axis-aligned
    rectangles; with no scales given, 6 dyadic scales from 1/4 down.
    """
    if scales is None:
        scales = [2.0 ** -k for k in range(2, 8)]
    scales = [float(d) for d in scales]
    counts = [box_count(obj, d) for d in scales]
    good = [(d, c) for d, c in zip(scales, counts) if c > 0]
    if len(good) < 2:
        raise ValueError("need at least two nonempty scales")
    X = np.log([1.0 / d for d, _ in good])
    Y = np.log([c for _, c in good])
    slope, icpt = np.polyfit(X, Y, 1)
    res = Y - (slope * X + icpt)
    ss = ((Y - Y.mean()) ** 2).sum()
    r2 = 1.0 - (res ** 2).sum() / ss if ss > 0 else 1.0
    return BoxDimReport(float(slope), float(r2), scales, counts)


def tree_scales(tree: SquareTree, count: int = 8) -> list:
    """Geometric scales from the first-generation side down to the leaf side.

    Coarser boxes see the whole tree at once and only flatten the fit.
    """
    if tree.depth < 2:
        raise ValueError("need depth at least 2 for a scale range")
    hi = float(tree.sides[1].max())
    lo = float(tree.sides[-1].max())
    return list(np.geomspace(hi, lo, count))


# ---------------------------------------------------------------- corridors

def covering_cost(disks, s: float) -> float:
    if not s > 0:
        raise ValueError("s must be positive")
    disks = list(disks)
    if not disks:
        raise ValueError("empty disk list")
    return float(sum(d.radius ** s for d in disks))


@dataclass
class Corridors:
    corridors: list          # MarkedQuadrilateral per corridor rectangle piece
    pieces: list             # per corridor: list of (x0, y0, x1, y1)
    touches: list            # per corridor: number of squares met
    covering: list           # per piece: (piece, disk count, radius)
    cost: float
    width: float
    s: float
    gamma1: Polyline
    gamma2: Polyline
    T: float
    region: Polygon = field(repr=False)

    def disks(self, limit: int = 1_000_000):
        """The covering as Disk objects (refuses absurdly fine coverings)."""
        total = sum(m for _, m, _ in self.covering)
        if total > limit:
            raise ValueError(f"covering has {total} disks; raise the limit to expand it")
        return [d for p, m, _ in self.covering for d in _disk_cover(p, self.width)]

    def disk_count(self) -> int:
        return int(sum(m for _, m, _ in self.covering))

    def rects(self) -> dict:
        rs = [p for c in self.pieces for p in c]
        a = np.array(rs) if rs else np.zeros((0, 4))
        return {"x0": a[:, 0], "y0": a[:, 1], "x1": a[:, 2], "y1": a[:, 3]}

    def to_json(self) -> dict:
        return {"width": self.width, "s": self.s, "cost": self.cost, "T": self.T,
                "corridors": [[list(map(float, p)) for p in c] for c in self.pieces],
                "covering": [[list(map(float, p)), int(m), float(r)] for p, m, r in self.covering]}


def _seg_rect(p: complex, q: complex, w: float):
    """Axis-aligned rectangle of width w around the segment p-q (p, q share x or y)."""
    h = 0.5 * w
    x0, x1 = sorted((p.real, q.real))
    y0, y1 = sorted((p.imag, q.imag))
    return (x0 - h, y0 - h, x1 + h, y1 + h)


def _route(a_ll, a_side, b_ll, b_side, w):
    """Manhattan route with at most two bends from square a to square b."""
    ac = a_ll + 0.5 * a_side * (1 + 1j)
    bc = b_ll + 0.5 * b_side * (1 + 1j)
    if b_ll.real >= a_ll.real + a_side:           # b to the right: horizontal-vertical-horizontal
        p = complex(a_ll.real + a_side, ac.imag)
        q = complex(b_ll.real, bc.imag)
        xm = 0.5 * (p.real + q.real)
        pts = [p, complex(xm, p.imag), complex(xm, q.imag), q]
    else:                                          # stacked: vertical-horizontal-vertical
        up = b_ll.imag >= a_ll.imag + a_side
        p = complex(ac.real, a_ll.imag + a_side) if up else complex(ac.real, a_ll.imag)
        q = complex(bc.real, b_ll.imag) if up else complex(bc.real, b_ll.imag + b_side)
        ym = 0.5 * (p.imag + q.imag)
        pts = [p, complex(p.real, ym), complex(q.real, ym), q]
    pieces = []
    for u, v in zip(pts[:-1], pts[1:]):
        if abs(u - v) > 1e-15:
            pieces.append(_seg_rect(u, v, w))
    return pieces


def _cover_params(piece, w):
    """Disk count and radius covering a corridor piece: centers every ``<= w``
    along the long axis, each disk covering its cell."""
    x0, y0, x1, y1 = piece
    L = max(x1 - x0, y1 - y0)
    short = min(x1 - x0, y1 - y0)
    m = max(1, int(np.ceil(L / w - 1e-12)))
    return m, float(0.5 * np.hypot(L / m, short))


def _disk_cover(piece, w):
    x0, y0, x1, y1 = piece
    m, r = _cover_params(piece, w)
    t = (np.arange(m) + 0.5) / m
    if x1 - x0 >= y1 - y0:
        cs = x0 + t * (x1 - x0) + 1j * 0.5 * (y0 + y1)
    else:
        cs = 0.5 * (x0 + x1) + 1j * (y0 + t * (y1 - y0))
    return [Disk(complex(c), r) for c in cs]


def _serpentine(ll: np.ndarray, side: np.ndarray, col_tol: float):
    cx = ll.real + 0.5 * side
    order = np.argsort(cx, kind="stable")
    cols, cur = [], [order[0]]
    for i in order[1:]:
        if cx[i] - cx[cur[0]] <= col_tol:
            cur.append(i)
        else:
            cols.append(cur)
            cur = [i]
    cols.append(cur)
    out = []
    for j, col in enumerate(cols):
        col = sorted(col, key=lambda i: ll[i].imag, reverse=bool(j % 2))
        out.extend(col)
    return out


def connect_squares(A: MarkedQuadrilateral, ll, side, delta: float, s: float,
                    width: float | None = None, max_halvings: int = 40) -> Corridors:
    """Join squares inside the rectangle ``A = [0,T] x [0,1]`` by thin corridors.

    A left strip ``[0, w] x [0, 1]`` feeds a corridor into the first square;
    squares are visited column by column (serpentine) and the last one exits
    through the right edge, whose corridor ends are the quad-vertices.
    The corridor width starts at ``x/8`` and is halved until the disk
    covering of the corridors costs at most ``delta`` in exponent ``s``.
    """
    v = A.boundary.vertices
    T = float(v.real.max())
    if abs(v.real.min()) > 1e-12 or abs(v.imag.min()) > 1e-12 or abs(v.imag.max() - 1.0) > 1e-12:
        raise ValueError("A must be the rectangle [0,T] x [0,1]")
    ll = np.asarray(ll, dtype=complex)
    side = np.broadcast_to(np.asarray(side, dtype=float), ll.shape).copy()
    if np.any(ll.real <= 0) or np.any(ll.imag <= 0) or np.any(ll.real + side >= T) or np.any(ll.imag + side >= 1):
        raise ValueError("squares must lie strictly inside A")
    w = float(side.min()) / 8.0 if width is None else float(width)
    order = _serpentine(ll, side, 0.5 * float(side.max()))
    w_min = MIN_WIDTH * max(T, 1.0)
    out = _build_corridors(ll, side, order, w, T, s)
    for _ in range(max_halvings):
        if out.cost <= delta or 0.5 * w < w_min:
            break
        try:
            out = _build_corridors(ll, side, order, 0.5 * w, T, s)
        except ValueError:          # corridor quads no longer resolved
            break
        w *= 0.5
    if out.cost <= delta:
        return out
    # the cost behaves like length * w^(s-1); near s = 1 delta may need w below w_min
    raise ValueError(f"covering cost {out.cost:.3g} still above delta={delta} at width {w:.3g}")


def _build_corridors(ll, side, order, w, T, s) -> Corridors:
    strip_w = w
    first = order[0]
    c_first = ll[first].imag + 0.5 * side[first]
    pieces = [[_seg_rect(complex(strip_w, c_first), complex(ll[first].real, c_first), w)]]
    for a, b in zip(order[:-1], order[1:]):
        pieces.append(_route(ll[a], side[a], ll[b], side[b], w))
    last = order[-1]
    c_last = ll[last].imag + 0.5 * side[last]
    pieces.append([(ll[last].real + side[last], c_last - 0.5 * w, T, c_last + 0.5 * w)])
    # corridors may meet only their own endpoints' squares
    sq = [box(z.real, z.imag, z.real + d, z.imag + d) for z, d in zip(ll, side)]
    touches = []
    chain = [None] + list(order)
    for idx, cor in enumerate(pieces):
        geo = unary_union([box(*p) for p in cor])
        allowed = {chain[idx]} if idx < len(chain) else set()
        if idx + 1 < len(chain):
            allowed.add(chain[idx + 1])
        if idx == len(pieces) - 1:
            allowed = {order[-1]}
        met_touch = [j for j, q in enumerate(sq) if geo.intersects(q)]
        if any(j not in allowed for j in met_touch):
            raise ValueError("unroutable corridor: congestion with another square")
        touches.append(len(set(met_touch)))
    strip = box(0.0, 0.0, strip_w, 1.0)
    region = unary_union([strip] + sq + [box(*p) for c in pieces for p in c])
    if region.geom_type != "Polygon" or len(region.interiors) > 0:
        raise ValueError("corridors do not produce a simply connected region")
    region = orient(region, 1.0)
    ring = np.array(region.exterior.coords)[:-1]
    z = ring[:, 0] + 1j * ring[:, 1]
    p1 = complex(T, c_last - 0.5 * w)
    p2 = complex(T, c_last + 0.5 * w)

    def at(q):
        k = int(np.argmin(np.abs(z - q)))
        if abs(z[k] - q) > 1e-9:
            raise ValueError("region boundary misses a quad-vertex")
        return k

    i0, i1, i2, i3 = at(0j), at(p1), at(p2), at(1j)
    roll = np.roll(z, -i0)
    k1 = (i1 - i0) % len(z)
    k2 = (i2 - i0) % len(z)
    k3 = (i3 - i0) % len(z)
    g1 = roll[:k1 + 1]
    g2 = roll[k2:k3 + 1][::-1]
    g1[0], g1[-1], g2[0], g2[-1] = 0j, p1, 1j, p2
    cover = [(p,) + _cover_params(p, w) for c in pieces for p in c]
    cost = float(sum(m * r ** s for _, m, r in cover))
    corridors = []
    for c in pieces:
        for (x0, y0, x1, y1) in c:
            corridors.append(MarkedQuadrilateral.from_sides(
                np.array([x0 + 1j * y0, x1 + 1j * y0]), np.array([x1 + 1j * y0, x1 + 1j * y1]),
                np.array([x1 + 1j * y1, x0 + 1j * y1]), np.array([x0 + 1j * y1, x0 + 1j * y0])))
    return Corridors(corridors, pieces, touches, cover, cost, w, s,
                     Polyline(g1, closed=False), Polyline(g2, closed=False), T, region)


def layout_in_rectangle(layout: SAdditiveLayout, T: float, margin: float = 0.05):
    """Affine copy of a layout's squares inside ``[0,T] x [0,1]`` (aspect kept)."""
    scale = min(1.0, T) * (1.0 - 2 * margin)
    off = complex(0.5 * (T - scale), 0.5 * (1.0 - scale))
    return off + scale * layout.placements, scale * layout.x


def report_json(obj) -> str:
    return json.dumps(obj.to_json(), indent=2, sort_keys=True)
