"""Acceptance criteria 1-12, one PASS/FAIL line each.

Run under pytest (lines are collected into the terminal summary) or as a
script: ``python tests/test_acceptance.py``.
"""
import json
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from conftest import ACCEPTANCE_LINES
from flexweld.cli import load_defaults
from flexweld.core_geom import TWO_PI, ArcSet, CircleHomeo, MarkedQuadrilateral, circle_polyline, rectangle_quad
from flexweld.logcap import (arcset_pieces, capacity, capacity_segment, far_set_capacity,
                             koebe_boundary_samples, make_log_singular_homeo, planar_capacity)
from flexweld.modulus import annulus_modulus, modulus_rules_check, quad_modulus, rect_harmonic_measure

# tolerances and budgets, fixed by the acceptance criteria
CAP_REL = 0.01
CAP_SECONDS = 5.0
LAW_FAMILIES = 100
LAW_SCALE_REL = 0.01
LAW_SLACK = 1e-6
LAW_SECONDS = 60.0
MOD_REL = 0.005
RECIP_REL = 0.01
SERIAL_REL = 0.01
MOD_SECONDS = 120.0
HM_LENGTHS = (2.0, 3.0, 4.0)
HM_SECONDS = 60.0
SLIT_N = (16, 32)
SLIT_CAL = 1e-6
SLIT_RATIO_BAND = (0.5, 2.0)
SLIT_SECONDS = 300.0
SHAPE_M = (3, 4, 5, 6, 7, 8)
SHAPE_DECAY = float(np.exp(-np.pi / 2))
SHAPE_DECAY_REL = 0.25
SHAPE_LEAK = 1e-9
SHAPE_IDENTITY = 1e-3
SHAPE_SECONDS = 180.0
LEFT_A = (0.25, 0.5, 0.9)
LEFT_EPS = 0.05
LEFT_TOL = 1e-3
LEFT_SECONDS = 120.0
WELD_STEPS = 3
WELD_N = 16
WELD_RATIO = 0.75
WELD_EXTENSION = 1e-3
WELD_K_SLACK = 1.01
WELD_SECONDS = 900.0
AREA_REL = 0.05
AREA_FINAL = 0.9
DIM_S = (1.2, 1.5, 1.8)
DIM_IDENTITY = 1e-12
DIM_MATTILA = 1e-9
DIM_BOX = 0.1
DIM_DEPTH = 4
DIM_DELTA = 1e-3
DIM_SECONDS = 300.0
FAR_R = (4.0, 16.0, 64.0)
FAR_SLOPE = -0.45
FAR_SECONDS = 120.0

QUICK_WELD = {"h": {"kind": "rotation", "angle": 0.1}, "N_schedule": [8], "outer_radius": 400.0,
              "samples": 256, "steps": 1, "eps": 0.5}


def record(num, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:2d}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def fmt(x):
    return f"{x:.4g}"


# 1 ---------------------------------------------------------------------------

def test_capacity_oracles():
    t = time.perf_counter()
    seg = capacity_segment(0, 1)
    t_seg = time.perf_counter() - t
    t = time.perf_counter()
    circ = capacity(ArcSet.full_circle()).capacity
    t_circ = time.perf_counter() - t
    ok = (abs(seg / 0.25 - 1) <= CAP_REL and abs(circ - 1) <= CAP_REL
          and t_seg < CAP_SECONDS and t_circ < CAP_SECONDS)
    record(1, ok, f"cap[0,1]={seg:.6f} (0.25 +-1%), cap(S1)={circ:.6f} (1 +-1%), "
                  f"times {t_seg:.2f}s/{t_circ:.2f}s (<5s each)")


# 2 ---------------------------------------------------------------------------

def _family(rng):
    k = int(rng.integers(2, 5))
    cuts = np.sort(rng.uniform(0, TWO_PI, 2 * k))
    radius = rng.uniform(0.1, 0.5)            # diameter at most 1
    center = complex(*rng.uniform(-1, 1, 2))
    return [(a, b) for a, b in zip(cuts[::2], cuts[1::2])], radius, center


def _planar_cap(arcs, radius, center, panels=8):
    return planar_capacity(arcset_pieces(ArcSet.from_arcs(arcs), radius, center), panels)


def test_capacity_laws():
    rng = np.random.default_rng(2024)
    t = time.perf_counter()
    mono = scale = sub = 0
    worst_scale, worst_sub = 0.0, -np.inf
    for _ in range(LAW_FAMILIES):
        arcs, radius, center = _family(rng)
        whole = _planar_cap(arcs, radius, center)
        part = _planar_cap(arcs[:-1], radius, center)
        mono += part.capacity <= whole.capacity * (1 + 1e-9)
        lam = rng.uniform(0.2, 1.0)
        scaled = _planar_cap(arcs, lam * radius, lam * center).capacity
        rel = abs(scaled / (lam * whole.capacity) - 1)
        worst_scale = max(worst_scale, rel)
        scale += rel <= LAW_SCALE_REL
        pieces = [_planar_cap([a], radius, center).robin for a in arcs]
        gap = 1.0 / whole.robin - sum(1.0 / g for g in pieces)
        worst_sub = max(worst_sub, gap)
        sub += gap <= LAW_SLACK
    dt = time.perf_counter() - t
    ok = mono == scale == sub == LAW_FAMILIES and dt < LAW_SECONDS
    record(2, ok, f"{LAW_FAMILIES} families: monotone {mono}, scaling {scale} (worst {fmt(worst_scale)}), "
                  f"subadditive {sub} (worst gap {fmt(worst_sub)}, slack 1e-6), {dt:.1f}s (<60s)")


# 3 ---------------------------------------------------------------------------

def test_modulus():
    t = time.perf_counter()
    rect = quad_modulus(rectangle_quad(3.0)).modulus
    ann = {}
    for ratio in (2.0, np.e, 10.0):
        m = annulus_modulus(circle_polyline(1.0, 256), circle_polyline(ratio, 256)).modulus
        ann[ratio] = m / (np.log(ratio) / TWO_PI) - 1
    L = MarkedQuadrilateral.from_sides([0, 2], [2, 2 + 1j], [2 + 1j, 1 + 1j, 1 + 2j], [1 + 2j, 2j, 0])
    recip = quad_modulus(L).modulus * quad_modulus(L.swapped()).modulus - 1
    rules = modulus_rules_check(seed=1)
    dt = time.perf_counter() - t
    ok = (abs(rect / 3 - 1) <= MOD_REL and all(abs(v) <= MOD_REL for v in ann.values())
          and abs(recip) <= RECIP_REL and rules["serial_equality_rel"] <= SERIAL_REL
          and dt < MOD_SECONDS)
    worst = max(abs(v) for v in ann.values())
    record(3, ok, f"rect 3x1 -> {rect:.6f} (+-0.5%), annulus worst rel {fmt(worst)} (+-0.5%), "
                  f"reciprocity {fmt(recip)} (+-1%), serial {fmt(rules['serial_equality_rel'])} (+-1%), "
                  f"{dt:.1f}s (<120s)")


# 4 ---------------------------------------------------------------------------

def test_harmonic_measure():
    t = time.perf_counter()
    vals = [rect_harmonic_measure(L) for L in HM_LENGTHS]
    dt = time.perf_counter() - t
    inside = [bool(np.exp(-np.pi * L / 2) <= v <= 8 / np.pi * np.exp(-np.pi * L / 2))
              for L, v in zip(HM_LENGTHS, vals)]
    monotone = all(b < a for a, b in zip(vals, vals[1:]))
    ok = all(inside) and monotone and dt < HM_SECONDS
    record(4, ok, f"omega(L=2,3,4) = {', '.join(fmt(v) for v in vals)}; in band {inside}, "
                  f"decreasing {monotone}, {dt:.1f}s (<60s)")


# 5 ---------------------------------------------------------------------------

def test_slit_map():
    from flexweld.slitmap import (SlitMapConfig, build_E, interior_deviation, sandwich_holds,
                                  sector_quads, slit_map)
    c = load_defaults()["fitted_constants"]["slit_sandwich_c"]
    t = time.perf_counter()
    parts, devs, ratios = [], [], []
    for N in SLIT_N:
        A = N + 4.0
        sd = slit_map(build_E(N, A), SlitMapConfig(N, A, N, 0.5 / N))
        r = [q.ratio for q in sector_quads(sd)]
        ratios += r
        devs.append(interior_deviation(sd))
        parts.append(sd.checks["argument_monotone"] and sd.checks["calibration_max"] <= SLIT_CAL
                     and sandwich_holds(sd, c)
                     and all(SLIT_RATIO_BAND[0] <= x <= SLIT_RATIO_BAND[1] for x in r))
    dt = time.perf_counter() - t
    ok = all(parts) and devs[1] < devs[0] and dt < SLIT_SECONDS
    record(5, ok, f"N=16,32 checks {parts}, sector ratios in [{min(ratios):.3f}, {max(ratios):.3f}] "
                  f"(band [1/2, 2]), sandwich c={c:.4f}, interior deviation {fmt(devs[0])} -> "
                  f"{fmt(devs[1])}, {dt:.1f}s (<300s)")


# 6 ---------------------------------------------------------------------------

def test_shape_dilatation_decay():
    from flexweld.shapes import admissibility, comb_shape
    t = time.perf_counter()
    mus, leak, ident = [], 0.0, 0.0
    for M in SHAPE_M:
        rep, _ = admissibility(comb_shape(2.0 * M + 8.0, 2.0 * M, 0.5), float(M))
        mus.append(rep.measured_sup_dilatation)
        leak = max(leak, rep.leakage)
        ident = max(ident, rep.identity_error)
    dt = time.perf_counter() - t
    slope = np.polyfit(np.array(SHAPE_M, float), np.log(np.maximum(mus, 1e-300)), 1)[0]
    ratio = float(np.exp(slope))
    ok = (abs(ratio / SHAPE_DECAY - 1) <= SHAPE_DECAY_REL and leak <= SHAPE_LEAK
          and ident <= SHAPE_IDENTITY and dt < SHAPE_SECONDS)
    record(6, ok, f"decay ratio per unit M {fmt(ratio)} vs e^(-pi/2)={SHAPE_DECAY:.4f} (+-25%), "
                  f"sup mu {', '.join(fmt(m) for m in mus)}, leakage {fmt(leak)} (<=1e-9), "
                  f"identity {fmt(ident)} (<=1e-3), {dt:.1f}s (<180s)")


# 7 ---------------------------------------------------------------------------

def test_leftover_control():
    from flexweld.shapes import leftover_percentage, minimal_T, shape_with_leftover
    t = time.perf_counter()
    hits, errs = [], []
    for a in LEFT_A:
        Tmin = minimal_T(LEFT_EPS, a)
        s = shape_with_leftover(LEFT_EPS, a, Tmin + 1.0)
        hits.append(abs(leftover_percentage(s) - a) <= LEFT_TOL)
        try:
            shape_with_leftover(LEFT_EPS, a, Tmin - 1.0, compute_R=False)
            errs.append(False)
        except ValueError as exc:
            errs.append("minimal feasible T" in str(exc) and f"{Tmin:.6g}" in str(exc))
    dt = time.perf_counter() - t
    ok = all(hits) and all(errs) and dt < LEFT_SECONDS
    record(7, ok, f"a=0.25,0.5,0.9 hit within 1e-3 {hits}, infeasible T reports minimal T {errs}, "
                  f"{dt:.1f}s (<120s)")


# 8 ---------------------------------------------------------------------------

def _weld_lines(trace, budget):
    ratios, ext, inside, K = [], [], [], []
    for s in trace.steps[1:]:
        ratios.append(s["shrink_ratio"])
        ext.append(s["extension_error_chart"])
        inside.append(all(s["containment"][k]["points_outside"] == 0 for k in ("f", "g")))
        K.append(s["ledger"]["K"] <= s["ledger"]["budget"] * WELD_K_SLACK)
    return ratios, ext, inside, K


def test_weld_plain():
    from flexweld.weld_iter import concentric_config, run
    t = time.perf_counter()
    h, cert = make_log_singular_homeo(3, seed=0)
    cfg = concentric_config(h, 1.0, 40.0, steps=WELD_STEPS, samples=512, certificate=cert,
                            N_schedule=(WELD_N,))
    trace = run(cfg)
    dt = time.perf_counter() - t
    ratios, ext, inside, K = _weld_lines(trace, cfg.budget())
    done = len(trace.steps) - 1
    ok = (trace.failure is None and done == WELD_STEPS and all(r <= WELD_RATIO for r in ratios)
          and all(e <= WELD_EXTENSION for e in ext) and all(inside) and all(K) and dt < WELD_SECONDS)
    why = "" if trace.failure is None else f"; stopped at step {trace.failure['step']} " \
                                            f"({trace.failure['stage']}): {trace.failure['reason']}"
    record(8, ok, f"log-singular level 3, N=16: {done}/{WELD_STEPS} steps, ratios {[fmt(r) for r in ratios]} "
                  f"(<=0.75), extension {[fmt(e) for e in ext]} (<=1e-3), containment {inside}, "
                  f"K within budget*1.01 {K}, {dt:.1f}s (<900s){why}")


# 9 ---------------------------------------------------------------------------

def test_weld_positive_area():
    from flexweld.weld_iter import concentric_config, run
    a_seq = tuple(1.0 - 4.0 ** -n for n in range(1, WELD_STEPS + 1))
    t = time.perf_counter()
    cfg = concentric_config(CircleHomeo.rotation(0.1), 1.0, 40.0, steps=WELD_STEPS, samples=512,
                            mode="positive_area", a_seq=a_seq, N_schedule=(WELD_N,))
    trace = run(cfg)
    dt = time.perf_counter() - t
    got = [s["area_ratio"] for s in trace.steps[1:]]
    per = [abs(g / a - 1) <= AREA_REL for g, a in zip(got, a_seq)]
    area0 = trace.steps[0]["area"]
    final = trace.steps[-1]["area"]
    done = len(got)
    ok = (trace.failure is None and done == WELD_STEPS and all(per)
          and final >= AREA_FINAL * area0 * float(np.prod(a_seq)) and dt < WELD_SECONDS)
    why = "" if trace.failure is None else f"; stopped at step {trace.failure['step']} " \
                                            f"({trace.failure['stage']}): {trace.failure['reason']}"
    record(9, ok, f"a_n=1-4^-n: {done}/{WELD_STEPS} steps, area ratios {[fmt(g) for g in got]} (+-5%), "
                  f"final/initial {fmt(final / area0)} vs 0.9*prod a_n={AREA_FINAL * np.prod(a_seq):.4f}, "
                  f"{dt:.1f}s (<900s){why}")


# 10 --------------------------------------------------------------------------

def test_dimension_suite():
    from flexweld.dimension import (box_dim, connect_squares, layout_in_rectangle, mattila_build,
                                    s_additive_squares, separation_check, squares_as_rects,
                                    tree_scales)
    t = time.perf_counter()
    rows = []
    ok = True
    for s in DIM_S:
        L = s_additive_squares(s)
        ch = L.checks()
        tree = mattila_build(s, DIM_DEPTH)
        tc = tree.checks()
        ll, side = tree.leaves()
        est = box_dim(squares_as_rects(ll, side), tree_scales(tree)).estimate
        sep = separation_check(L)
        lay, x = layout_in_rectangle(s_additive_squares(s, 4), 1.5)
        try:
            cost = connect_squares(rectangle_quad(1.5), lay[:6], x, DIM_DELTA, s).cost
        except ValueError as exc:
            cost = float(str(exc).split()[2])
        good = (ch["identity_error"] <= DIM_IDENTITY and ch["feasible"]
                and tc["additivity_error"] <= DIM_MATTILA and abs(est - s) <= DIM_BOX
                and sep["passes"] and cost <= DIM_DELTA)
        ok &= good
        rows.append(f"s={s}: identity {fmt(ch['identity_error'])}, mattila {fmt(tc['additivity_error'])}, "
                    f"box {est:.3f}, separation slope {fmt(sep['slope_log_max_ratio'])}, cost {fmt(cost)}")
    dt = time.perf_counter() - t
    ok &= dt < DIM_SECONDS
    record(10, ok, "; ".join(rows) + f"; {dt:.1f}s (<300s)")


# 11 --------------------------------------------------------------------------

def test_far_set_capacity():
    t = time.perf_counter()
    samples = koebe_boundary_samples()
    caps = [far_set_capacity(samples, 1.0, R)[1] for R in FAR_R]
    slope = float(np.polyfit(np.log(FAR_R), np.log(caps), 1)[0])
    dt = time.perf_counter() - t
    ok = slope <= FAR_SLOPE and dt < FAR_SECONDS
    record(11, ok, f"cap(E_R) for R=4,16,64 = {', '.join(fmt(c) for c in caps)}; slope {slope:.4f} "
                   f"(<=-0.45), {dt:.1f}s (<120s)")


# 12 --------------------------------------------------------------------------

def _cli(args, cwd):
    env = dict(os.environ)
    return subprocess.run([sys.executable, "-m", "flexweld", *args], cwd=cwd, env=env,
                          capture_output=True, text=True).returncode


def _same_tree(a: Path, b: Path):
    names = sorted(p.name for p in a.iterdir())
    if names != sorted(p.name for p in b.iterdir()):
        return False, names
    return all((a / n).read_bytes() == (b / n).read_bytes() for n in names), names


def test_determinism():
    t = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        (root / "weld.json").write_text(json.dumps(QUICK_WELD))
        (root / "arcs.json").write_text("[[0.0, 0.5], [2.0, 2.2]]")
        runs = {
            "weld": ["weld", "weld.json", "--seed", "7"],
            "dim": ["dim", "--s", "1.5", "--depth", "3", "--estimate", "--seed", "7"],
            "capacity": ["capacity", "arcs.json", "--seed", "7"],
        }
        results = []
        for name, args in runs.items():
            codes = [_cli(args + ["--out", f"{name}_{k}"], root) for k in (1, 2)]
            same, files = _same_tree(root / f"{name}_1", root / f"{name}_2")
            results.append(f"{name} exit {codes} identical {same} ({len(files)} files)")
            if not (same and codes == [0, 0]):
                results[-1] += " MISMATCH"
    dt = time.perf_counter() - t
    ok = all("MISMATCH" not in r for r in results)
    record(12, ok, "; ".join(results) + f"; {dt:.1f}s")


if __name__ == "__main__":
    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
