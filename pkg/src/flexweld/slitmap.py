"""Conformal map of the disk onto a radially slit near-disk.

The map is ``exp(U + i U~) / (1 + delta)`` where ``U = 2G`` on the circle and
``G`` is the potential of a measure with mass ``1/N`` per arc of ``E``, each
arc carrying its own equilibrium measure.  Arcs of ``E`` go to the outer
boundary, every gap goes to a radial slit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .core_geom import (TWO_PI, ArcSet, MarkedQuadrilateral, Polyline,
                        normalize_angle)
from .logcap import (DiscreteMeasure, LogSingularCertificate, PanelGeometry,
                     _GW, arcset_pieces, capacity, circle_potential,
                     energy_matrix, minimize_energy)
from .modulus import quad_modulus


@dataclass(frozen=True)
class SlitMapConfig:
    N: int
    A: float
    M: int
    delta: float
    samples: int = 4096

    def __post_init__(self):
        if self.N < 8:
            raise ValueError("N must be at least 8")
        if not self.A > self.N:
            raise ValueError("A must exceed N")
        if self.M < 2:
            raise ValueError("M must be at least 2")
        if not 0.0 < self.delta < 0.1:
            raise ValueError("delta must lie in (0, 0.1)")
        if self.samples < 16 * self.N:
            raise ValueError("need at least 16 samples per arc")


def robin_target(N: int, A: float) -> float:
    """Robin constant of E whose arcs each have Robin constant ``A``."""
    return (A - np.log(N)) / N


# ---------------------------------------------------------------- the set E

def _cert_windows(N: int, cert: LogSingularCertificate | None):
    """Per-I_k window (center, max width) inside the certificate set."""
    centers = TWO_PI * (np.arange(N) + 0.5) / N
    room = np.full(N, 0.9 * TWO_PI / N)
    aligned = np.zeros(N, dtype=bool)
    if cert is None or cert.E_n.empty:
        return centers, room, aligned
    Ec = cert.E_n
    for k in range(N):
        a, b = TWO_PI * k / N, TWO_PI * (k + 1) / N
        best = None
        for (lo, hi), c, w in zip(Ec.intervals(), Ec.centers(), Ec.lengths()):
            for shift in (-TWO_PI, 0.0, TWO_PI):
                l2, h2 = c - w / 2 + shift, c + w / 2 + shift
                lo2, hi2 = max(l2, a), min(h2, b)
                if hi2 > lo2 and (best is None or hi2 - lo2 > best[1]):
                    best = (0.5 * (lo2 + hi2), hi2 - lo2)
        if best is not None:
            centers[k], room[k] = best
            margin = min(centers[k] - a, b - centers[k])
            room[k] = min(room[k], 2.0 * margin)
            aligned[k] = True
    return centers, room, aligned


def build_E(N: int, A_target: float, h_cert: LogSingularCertificate | None = None,
            panels: int = 8, rtol: float = 1e-3) -> ArcSet:
    """One arc per ``I_k = [2 pi k/N, 2 pi (k+1)/N]`` with ``cap(E) ~ exp(-robin_target)``.

    With a certificate, each arc is centred in the largest piece of
    ``E_n & I_k`` and never wider than that piece.
    """
    if N < 8:
        raise ValueError("N must be at least 8")
    gamma = robin_target(N, A_target)
    if gamma <= 0:
        raise ValueError(f"A_target={A_target} infeasible for N={N}: E would need capacity >= 1")
    centers, room, _ = _cert_windows(N, h_cert)

    def logcap(log_w):
        w = np.minimum(np.exp(log_w), room)
        return np.log(capacity(ArcSet.from_centers(centers, w), panels).capacity)

    target = -gamma
    guess = np.log(4.0 / N * np.arcsin(min(1.0, np.exp(-N * gamma))))
    top = float(np.log(room.max()))
    if logcap(top) < target - np.log(1.05):
        raise ValueError(f"A_target={A_target} infeasible for N={N}: widest allowed arcs are too small")
    lo, hi = guess - 3.0, min(guess + 3.0, top)
    while logcap(lo) > target:
        lo -= 3.0
    while hi < top and logcap(hi) < target:
        hi = min(hi + 3.0, top)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        v = logcap(mid)
        if abs(v - target) < rtol:
            lo = hi = mid
            break
        if v < target:
            lo = mid
        else:
            hi = mid
    w = np.minimum(np.exp(0.5 * (lo + hi)), room)
    E = ArcSet.from_centers(centers, w)
    got = capacity(E, panels).capacity
    if abs(got / np.exp(target) - 1.0) > 0.05:
        raise ValueError(f"A_target={A_target} infeasible for N={N}: capacity {got:.4g} "
                         f"vs target {np.exp(target):.4g}")
    return E


def arcs_in_intervals(edges, A: float, cert_set: ArcSet | None = None) -> ArcSet:
    """One arc of Robin constant ``A`` inside each ``[edges[k], edges[k+1]]``.

    Arcs sit in the largest piece of ``cert_set`` meeting the interval when
    there is one (never wider than that piece), else at the midpoint.
    ``edges`` is increasing with ``edges[-1] - edges[0] = 2 pi``.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 3 or np.any(np.diff(edges) <= 0):
        raise ValueError("interval edges must increase")
    if abs(edges[-1] - edges[0] - TWO_PI) > 1e-9:
        raise ValueError("interval edges must span one turn")
    width = 4.0 * np.arcsin(min(1.0, np.exp(-A)))
    centers, widths = [], []
    pieces = []
    if cert_set is not None and not cert_set.empty:
        pieces = list(zip(cert_set.centers(), cert_set.lengths()))
    for a, b in zip(edges[:-1], edges[1:]):
        c, room = 0.5 * (a + b), 0.9 * (b - a)
        best = None
        for cc, w in pieces:
            for shift in (-2 * TWO_PI, -TWO_PI, 0.0, TWO_PI, 2 * TWO_PI):
                lo, hi = max(cc - w / 2 + shift, a), min(cc + w / 2 + shift, b)
                if hi > lo and (best is None or hi - lo > best[1]):
                    best = (0.5 * (lo + hi), hi - lo)
        if best is not None:
            c = best[0]
            room = min(best[1], 2.0 * min(c - a, b - c))
        centers.append(c)
        widths.append(min(width, room))
    return ArcSet.from_centers(np.array(centers), np.array(widths))


# ---------------------------------------------------------------- measure

@dataclass
class ArcMeasures:
    """Sum of per-arc equilibrium measures, each of mass ``1/N``."""
    measure: DiscreteMeasure
    arc_robin: np.ndarray
    centers: np.ndarray
    halves: np.ndarray


def arc_measures(E: ArcSet, panels_per_arc: int = 16, weights=None) -> ArcMeasures:
    """``weights`` (one per arc, summing to 1) replaces the uniform ``1/N``."""
    if E.empty or E.full:
        raise ValueError("E must be a proper nonempty arc set")
    n = len(E)
    if weights is None:
        weights = np.full(n, 1.0 / n)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,) or np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("arc weights must be positive, one per arc, summing to 1")
    pieces = arcset_pieces(E)
    geom = PanelGeometry.build(pieces, panels_per_arc)
    masses = np.zeros(len(geom))
    robin = np.zeros(n)
    cache = {}
    for k, pc in enumerate(pieces):
        key = float(pc.half)
        if key not in cache:
            g1 = PanelGeometry.build([pc], panels_per_arc)
            K = energy_matrix(g1)
            w, _, _ = minimize_energy(K, 1.0)
            cache[key] = (w, float(w @ K @ w))
        w, e = cache[key]
        masses[geom.comp == k] = w * weights[k]
        robin[k] = e
    mu = DiscreteMeasure(geom, masses, 1.0, E)
    return ArcMeasures(mu, robin, np.array([p.mid for p in pieces]),
                       np.array([p.half for p in pieces]))


def _cumulative(geom: PanelGeometry, masses, k):
    sel = geom.comp == k
    edges = np.append(geom.s0[sel], geom.s1[sel][-1])
    cum = np.concatenate([[0.0], np.cumsum(masses[sel])])
    return edges, cum


# ---------------------------------------------------------------- slit domain

@dataclass
class SlitDomain:
    outer_boundary: Polyline
    slits: list
    tips: list
    marked_tips: list
    boundary_map: dict
    inner_radius: float
    outer_radius: float
    config: SlitMapConfig
    arcs: ArcMeasures
    slit_angles: np.ndarray
    tip_angles: np.ndarray
    arc_end_radii: np.ndarray
    mean_angle: float
    marked: list = field(default_factory=list)
    tip_distances: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    # interior map from the complex logarithm of the measure
    def interior(self, z) -> np.ndarray:
        """``phi`` inside the disk by ``z exp(-2 int log(1 - conj(x) z) dmu)``."""
        zz = np.atleast_1d(np.asarray(z, dtype=complex))
        if np.any(np.abs(zz) > 1.0 + 1e-12):
            raise ValueError("interior map needs |z| <= 1")
        geom = self.arcs.measure.geometry
        x = (geom.origin[geom.comp][:, None] + geom.gauss_local())
        wq = (self.arcs.measure.masses[:, None] * _GW[None, :]).ravel()
        xc = np.conj(x.ravel())
        out = np.empty(zz.shape, dtype=complex)
        flat = zz.ravel()
        res = out.ravel()
        for i in range(0, flat.size, 256):
            blk = flat[i:i + 256]
            s = np.log(1.0 - xc[None, :] * blk[:, None]) @ wq
            res[i:i + 256] = blk * np.exp(-2.0 * s)
        c0 = np.pi - self.mean_angle
        return (np.exp(1j * c0) * res / (1.0 + self.config.delta)).reshape(zz.shape)

    def to_json(self) -> dict:
        bm = self.boundary_map
        return {
            "config": {"N": self.config.N, "A": self.config.A, "M": self.config.M,
                       "delta": self.config.delta, "samples": self.config.samples},
            "inner_radius": self.inner_radius, "outer_radius": self.outer_radius,
            "tips": [[z.real, z.imag] for z in self.tips],
            "marked": list(self.marked),
            "tip_distances": list(self.tip_distances),
            "boundary_map": [[float(t), float(w.real), float(w.imag)]
                             for t, w in zip(bm["angle"], bm["value"])],
            "checks": self.checks,
        }

    def to_svg(self, size: int = 480) -> str:
        R = self.outer_radius * 1.05
        sc = size / (2 * R)

        def pt(z):
            return f"{(z.real + R) * sc:.2f},{(R - z.imag) * sc:.2f}"

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
        pts = " ".join(pt(z) for z in self.outer_boundary.vertices)
        out.append(f'<polygon points="{pts}" fill="none" stroke="black" stroke-width="1"/>')
        for s in self.slits:
            a, b = s.vertices[0], s.vertices[-1]
            out.append(f'<polyline points="{pt(a)} {pt(b)}" stroke="steelblue" stroke-width="1"/>')
        out.append(f'<circle cx="{R * sc:.2f}" cy="{R * sc:.2f}" r="{sc:.2f}" fill="none" '
                   'stroke="gray" stroke-dasharray="3,3"/>')
        for z in self.marked_tips:
            x, y = pt(z).split(",")
            out.append(f'<circle cx="{x}" cy="{y}" r="3" fill="crimson"/>')
        out.append("</svg>")
        return "\n".join(out)


def _gap_offsets(gap: float, length: float, n: int) -> np.ndarray:
    """Distances from an arc end into a gap, graded toward the end."""
    lo = max(1e-3 * length, 1e-300)
    return np.geomspace(lo, 0.5 * gap, n)


def slit_map(E: ArcSet, cfg: SlitMapConfig, panels_per_arc: int = 16,
             weights=None) -> SlitDomain:
    """``weights`` gives arc ``k`` (in angular order) mass ``weights[k]``;
    slit ``j`` then sits at argument ``2 pi (weights[0] + ... + weights[j])``."""
    if len(E) != cfg.N:
        raise ValueError(f"E has {len(E)} arcs, config expects N={cfg.N}")
    am = arc_measures(E, panels_per_arc, weights)
    mu = am.measure
    geom = mu.geometry
    n = cfg.N
    order = np.argsort(normalize_angle(am.centers))
    c = normalize_angle(am.centers)[order]
    half = am.halves[order]
    if np.any(c - half < 0) or np.any(c + half >= TWO_PI):
        raise ValueError("an arc of E straddles angle 0")
    per_arc = max(16, cfg.samples // (2 * n))
    per_gap = max(16, cfg.samples // (2 * n))
    scale = 1.0 / (1.0 + cfg.delta)

    t_mean = 0.0
    gx = geom.gauss_local()
    for k in range(n):
        sel = geom.comp == k
        t = (am.centers[k] + np.angle(1.0 + gx[sel] * np.exp(-1j * am.centers[k])))
        t_mean += float(np.sum(mu.masses[sel][:, None] * _GW[None, :] *
                               normalize_angle(t)))

    angles, values, kinds, owner, args = [], [], [], [], []
    arc_ends = np.zeros((n, 2))
    slit_angles = np.zeros(n)
    tip_angles = np.zeros(n)
    tips = []
    before = 0.0
    for j, k in enumerate(order):
        edges, cum = _cumulative(geom, mu.masses, k)
        q = np.linspace(0.0, cum[-1], per_arc + 1)
        s = np.interp(q, cum, edges)
        U = 2.0 * circle_potential(mu, piece=np.full(s.size, k), offset=s)
        arg = TWO_PI * (before + q)
        r = np.exp(U) * scale
        angles.extend(c[j] + s)
        values.extend(r * np.exp(1j * arg))
        args.extend(arg)
        kinds.extend(["arc"] * s.size)
        owner.extend([j] * s.size)
        arc_ends[j] = r[0], r[-1]
        before += float(cum[-1])
        # gap after arc j
        jn = (j + 1) % n
        kn = order[jn]
        gap = (c[jn] - half[jn] - (c[j] + half[j])) % TWO_PI
        alpha = TWO_PI * before
        d1 = _gap_offsets(gap, 2 * half[j], per_gap // 2)
        d2 = _gap_offsets(gap, 2 * half[jn], per_gap // 2)[::-1]
        U1 = 2.0 * circle_potential(mu, piece=np.full(d1.size, k), offset=half[j] + d1)
        U2 = 2.0 * circle_potential(mu, piece=np.full(d2.size, kn), offset=-half[jn] - d2)
        start = c[j] + half[j]

        def Uat(x):
            return 2.0 * float(circle_potential(mu, theta=np.array([start + x]))[0])

        res = minimize_scalar(Uat, bounds=(0.25 * gap, 0.75 * gap), method="bounded",
                              options={"xatol": 1e-10 * gap})
        xt, Ut = float(res.x), float(res.fun)
        gpos = np.concatenate([d1, [xt], gap - d2])
        gU = np.concatenate([U1, [Ut], U2])
        keep = np.argsort(gpos)
        gpos, gU = gpos[keep], gU[keep]
        it = int(np.argmin(gU))
        if gpos[it] != xt:
            xt, Ut = float(gpos[it]), float(gU[it])
        angles.extend(start + gpos)
        values.extend(np.exp(gU) * scale * np.exp(1j * alpha))
        args.extend(np.full(gpos.size, alpha))
        kinds.extend(["gap"] * gpos.size)
        owner.extend([j] * gpos.size)
        slit_angles[j] = alpha
        tip_angles[j] = normalize_angle(start + xt)
        tips.append(complex(np.exp(Ut) * scale * np.exp(1j * alpha)))

    angles = np.array(angles)
    values = np.array(values)
    kinds = np.array(kinds)
    owner = np.array(owner)
    arg = np.array(args)
    if np.any(np.diff(arg) < 0):
        raise ValueError("construction failure: accumulated argument is not monotone")

    # outer boundary: arc images chained; consecutive arcs meet along radial joins
    ob = values[kinds == "arc"]
    slits = []
    for j in range(n):
        r_in = abs(tips[j])
        r_out = min(arc_ends[j, 1], arc_ends[(j + 1) % n, 0])
        e = np.exp(1j * slit_angles[j])
        slits.append(Polyline(np.array([r_in * e, r_out * e]), closed=False))
    arc_vals = values[kinds == "arc"]
    sd = SlitDomain(
        outer_boundary=Polyline(ob, closed=True),
        slits=slits,
        tips=tips,
        marked_tips=[],
        boundary_map={"angle": angles, "value": values, "kind": kinds, "owner": owner,
                      "arg": arg},
        inner_radius=float(np.abs(arc_vals).min()),
        outer_radius=float(np.abs(arc_vals).max()),
        config=cfg,
        arcs=am,
        slit_angles=slit_angles,
        tip_angles=tip_angles,
        arc_end_radii=arc_ends,
        mean_angle=t_mean,
    )
    sd.checks = slit_checks(sd)
    if weights is None:
        marked_tips(sd, cfg.M, cfg.delta)
    else:
        sd.marked = list(range(n))
        sd.marked_tips = list(tips)
    return sd


# ---------------------------------------------------------------- checks

def slit_checks(sd: SlitDomain) -> dict:
    """Calibration, gap-argument and monotonicity measurements."""
    n = sd.config.N
    bm = sd.boundary_map
    arg = bm["arg"]
    total = float(arg[-1] - arg[0])
    # calibration: the accumulated argument at 2 pi j/N
    cal = []
    cen = normalize_angle(sd.arcs.centers)
    mass = np.array([sd.arcs.measure.mass_on(k) for k in range(n)])
    for j in range(n):
        th = TWO_PI * j / n
        before = mass[cen < th].sum()
        cal.append(abs(np.exp(1j * TWO_PI * before) - np.exp(1j * th)))
    # analytic argument at gap points away from the arcs
    gap = bm["kind"] == "gap"
    ang = bm["angle"][gap]
    val = bm["value"][gap]
    dist = np.min(np.abs(normalize_angle(ang[:, None] - sd.arcs.centers[None, :] + np.pi) - np.pi)
                  - sd.arcs.halves[None, :], axis=1)
    far = dist > 1e-3 * (TWO_PI / n)
    z = np.exp(1j * ang[far])
    ana = sd.interior(z)
    dev = np.abs(ana / np.abs(ana) - val[far] / np.abs(val[far]))
    cal_ana = np.abs(np.angle(sd.interior(np.exp(1j * TWO_PI * np.arange(n) / n))
                              * np.exp(-1j * TWO_PI * np.arange(n) / n)))
    rad = np.abs(np.abs(ana) - np.abs(val[far])) / np.abs(val[far])
    return {
        "argument_total": total,
        "argument_monotone": bool(np.all(np.diff(arg) >= 0)),
        "calibration_max": float(max(cal)),
        "calibration_analytic_max": float(cal_ana.max()),
        "gap_argument_deviation": float(dev.max()) if dev.size else 0.0,
        "gap_radius_rel_deviation": float(rad.max()) if rad.size else 0.0,
    }


def disk_sandwich(sd: SlitDomain) -> dict:
    """Spread of ``G = log((1+delta)|phi|)/2`` on E around ``A/N``.

    Returns the smallest ``c`` with ``|G - A/N| <= c log(N)/N``.
    """
    n, A = sd.config.N, sd.config.A
    vals = sd.boundary_map["value"][sd.boundary_map["kind"] == "arc"]
    G = 0.5 * np.log((1.0 + sd.config.delta) * np.abs(vals))
    c = float(np.max(np.abs(G - A / n)) / (np.log(n) / n))
    return {"G_min": float(G.min()), "G_max": float(G.max()), "A_over_N": A / n, "c_needed": c}


def sandwich_holds(sd: SlitDomain, c: float) -> bool:
    return disk_sandwich(sd)["c_needed"] <= c


def interior_deviation(sd: SlitDomain, radius: float = 0.5, nr: int = 8, nt: int = 64) -> float:
    r = radius * np.arange(1, nr + 1) / nr
    t = TWO_PI * np.arange(nt) / nt
    z = (r[:, None] * np.exp(1j * t[None, :])).ravel()
    return float(np.max(np.abs(sd.interior(z) - z)))


def potential_jump(sd: SlitDomain, eps: float = 1e-4, count: int = 64) -> float:
    """Largest gap in ``U`` between ``(1-eps) x`` and ``(1+eps)^-1 x`` samples.

    ``U(z) = G(z) + G(1/conj z)`` is symmetric, so inside and outside
    values must meet at the circle; the reported number is the difference
    between the on-circle value and the average of the two off-circle ones.
    """
    from .logcap import potential_U
    mu = sd.arcs.measure
    th = TWO_PI * (np.arange(count) + 0.37) / count
    z = np.exp(1j * th)
    on = 2.0 * circle_potential(mu, theta=th)
    ins = potential_U(mu, (1 - eps) * z)
    out = potential_U(mu, z / (1 - eps))
    return float(np.max(np.abs(0.5 * (ins + out) - on)))


def marked_tips(sd: SlitDomain, M: int, delta: float) -> list:
    """Tips nearest to the M-th roots of unity, measured by direction.

    The radial offset of each tip from the circle is stored separately in
    ``sd.checks['tip_radial_offset']``.
    """
    m = len(sd.tips)
    if M > m:
        raise ValueError(f"M={M} exceeds the number of slits ({m})")
    dirs = np.exp(1j * sd.slit_angles)
    chosen, dists = [], []
    for k in range(M):
        root = np.exp(TWO_PI * 1j * k / M)
        d = np.abs(dirs - root)
        if chosen:
            d[chosen] = np.inf
        j = int(np.argmin(d))
        if d[j] > delta:
            raise ValueError(f"tip {k} misses root of unity by {d[j]:.3g} > delta={delta}")
        chosen.append(j)
        dists.append(float(d[j]))
    sd.marked = chosen
    sd.marked_tips = [sd.tips[j] for j in chosen]
    sd.tip_distances = dists
    sd.checks["tip_radial_offset"] = float(max(abs(1.0 - abs(sd.tips[j])) for j in chosen))
    return sd.marked_tips


# ---------------------------------------------------------------- sectors

@dataclass
class SectorQuad:
    quad: MarkedQuadrilateral
    modulus: float
    spread: float
    predicted: float
    first_slit: int
    second_slit: int

    @property
    def ratio(self) -> float:
        return self.modulus / self.predicted

    @property
    def length(self) -> float:
        """Length of the conformal rectangle with the slits as long sides."""
        return 1.0 / self.modulus


def _radial(angle, r0, r1, n=12):
    return np.geomspace(r0, r1, n) * np.exp(1j * angle)


def sector_quad(sd: SlitDomain, i: int, target_triangles: int = 3000, arc_points: int = 24,
                inner_radius: float = 1.0) -> SectorQuad:
    """``W`` between marked slits ``i`` and ``i+1`` (cyclic), outside ``|z| = inner_radius``."""
    if not sd.marked:
        raise ValueError("marked tips not computed")
    n = sd.config.N
    j0 = sd.marked[i]
    j1 = sd.marked[(i + 1) % len(sd.marked)]
    a0 = sd.slit_angles[j0]
    a1 = sd.slit_angles[j1]
    if a1 <= a0:
        a1 += TWO_PI
    bm = sd.boundary_map
    # arcs strictly between the two slits, in order
    arcs = []
    j = (j0 + 1) % n
    while True:
        arcs.append(j)
        if j == j1:
            break
        j = (j + 1) % n
    outer = []
    for j in arcs:
        sel = (bm["kind"] == "arc") & (bm["owner"] == j)
        v = bm["value"][sel]
        ang = bm["arg"][sel]
        ang = ang + TWO_PI * np.floor((a0 - ang[0]) / TWO_PI + 0.5)
        if ang[0] < a0 - 1e-9:
            ang = ang + TWO_PI
        outer.append(np.abs(v) * np.exp(1j * ang))
    outer = np.concatenate(outer)
    r_start = abs(outer[0])
    r_end = abs(outer[-1])
    rho = float(inner_radius)
    if not (rho < r_start and rho < r_end and rho < np.abs(outer).min()):
        raise ValueError(f"sector {i}: outer boundary dips below radius {rho:.6g}")
    t = np.linspace(a1, a0, arc_points)
    a1_side = rho * np.exp(1j * t)
    b1 = _radial(a0, rho, r_start)
    b2 = _radial(a1, r_end, rho)
    outer[0] = b1[-1]
    outer[-1] = b2[0]
    a1_side[-1] = b1[0]
    b2[-1] = a1_side[0]
    Q = MarkedQuadrilateral.from_sides(a1_side, b1, outer, b2)
    if not Q.boundary.is_simple():
        raise ValueError(f"sector {i} boundary is not simple")
    rep = quad_modulus(Q, target_triangles)
    spread = (a1 - a0) / TWO_PI
    predicted = np.pi * n * spread / sd.config.A
    return SectorQuad(Q, rep.modulus, spread, predicted, j0, j1)


def sector_quads(sd: SlitDomain, target_triangles: int = 3000) -> list:
    return [sector_quad(sd, i, target_triangles) for i in range(len(sd.marked))]


def report_json(sd: SlitDomain) -> str:
    return json.dumps(sd.to_json(), indent=2, sort_keys=True)
