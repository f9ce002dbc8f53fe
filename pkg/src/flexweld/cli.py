"""``flexweld`` command line: capacity, weld, dim and calibrate subcommands.

Every command writes its artifacts atomically into ``--out`` together with
``manifest.json``.  Exit codes: 0 success, 1 a run step failed (recorded in
the outputs), 2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from importlib import metadata
from importlib.resources import files

import numpy as np

from .core_geom import ArcSet, CircleHomeo, Polyline, circle_polyline

DEFAULTS_FILE = "defaults.json"


class InputError(ValueError):
    """Invalid user input; maps to exit code 2."""


def load_defaults() -> dict:
    return json.loads(files("flexweld").joinpath(DEFAULTS_FILE).read_text())


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=1, sort_keys=True) + "\n"


def write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str
    fitted_constants: dict
    tolerances: dict
    outputs: list = field(default_factory=list)
    wall_time: float | None = None
    status: str = "ok"

    def to_json(self) -> dict:
        return {"command": self.command, "config": self.config, "seed": self.seed,
                "version": self.version, "fitted_constants": self.fitted_constants,
                "tolerances": self.tolerances, "outputs": sorted(self.outputs),
                "wall_time": self.wall_time, "status": self.status}


class Outputs:
    def __init__(self, out_dir: str):
        self.dir = out_dir
        self.names: list = []

    def write(self, name: str, text: str):
        write_atomic(os.path.join(self.dir, name), text)
        if name not in self.names:
            self.names.append(name)


def _read_json(path: str):
    try:
        text = sys.stdin.read() if path == "-" else open(path).read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


# ---------------------------------------------------------------- capacity

def cmd_capacity(args, out: Outputs, defaults: dict) -> tuple:
    from .logcap import capacity
    data = _read_json(args.input)
    try:
        E = ArcSet.full_circle() if data == "full" else ArcSet.from_json(data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{args.input}: not an arc list ({exc})") from None
    if E.empty:
        raise InputError("capacity of an empty set")
    panels = args.panels or defaults["capacity"]["panels"]
    if any(p < 4 for p in panels):
        raise InputError("--panels values must be at least 4")
    runs = []
    for p in panels:
        rep = capacity(E, p)
        runs.append({"panels": p, "robin": rep.robin, "capacity": rep.capacity,
                     "panel_count": rep.panel_count})
    result = {"arcs": E.to_json(), "runs": runs}
    if len(runs) >= 2:
        a, b = runs[-2], runs[-1]
        ratio = b["panels"] / a["panels"]
        # each run is already Richardson-extrapolated (second order); combine the last two at fourth order
        w = ratio ** 4
        robin = (w * b["robin"] - a["robin"]) / (w - 1.0)
        result["extrapolated"] = {"robin": robin, "capacity": float(np.exp(-robin))}
    else:
        result["extrapolated"] = {"robin": runs[0]["robin"], "capacity": runs[0]["capacity"]}
    out.write("capacity.json", dumps(result))
    return {"input": data, "panels": panels}, 0


# ---------------------------------------------------------------- weld

def _homeo_from(spec, seed: int):
    from .logcap import make_log_singular_homeo
    kind = spec.get("kind", "log_singular")
    if kind == "log_singular":
        level = int(spec.get("level", 3))
        return make_log_singular_homeo(level, int(spec.get("seed", seed)))
    if kind == "rotation":
        return CircleHomeo.rotation(float(spec.get("angle", 0.0))), None
    if kind == "identity":
        return CircleHomeo.identity(), None
    if kind == "table":
        return CircleHomeo.from_json(spec["data"]), None
    raise InputError(f"unknown homeomorphism kind {kind!r}")


def _curve_from(spec, default_radius: float, vertices: int) -> Polyline:
    if spec is None:
        return circle_polyline(default_radius, vertices)
    if isinstance(spec, (int, float)):
        return circle_polyline(float(spec), vertices)
    return Polyline.from_json(spec, closed=True)


def weld_config(raw: dict, args, defaults: dict):
    from .weld_iter import IterationConfig
    d = dict(defaults["weld"])
    d.update(raw)
    if args.mode:
        d["mode"] = args.mode
    if args.steps:
        d["steps"] = args.steps
    if args.mesh:
        d["samples"] = args.mesh
    if args.s is not None:
        d["s"] = args.s
    mode = d.get("mode", "plain")
    steps = int(d["steps"])
    if mode == "positive_area" and "a_seq" not in d:
        d["a_seq"] = [1.0 - 4.0 ** -(n + 1) for n in range(steps)]
    eps = d.get("eps_seq", d.get("eps", 0.5))
    eps_seq = [float(eps)] * steps if np.isscalar(eps) else [float(e) for e in eps]
    h, cert = _homeo_from(d.get("h", {}), args.seed)
    inner = _curve_from(d.get("inner"), float(d.get("inner_radius", 1.0)), int(d.get("vertices", 256)))
    outer = _curve_from(d.get("outer"), float(d.get("outer_radius", 40.0)), int(d.get("vertices", 256)))
    d["eps_seq"] = eps_seq
    try:
        cfg = IterationConfig(h=h, inner=inner, outer=outer, eps_seq=tuple(eps_seq), certificate=cert,
                              mode=mode, steps=steps, N_schedule=tuple(int(n) for n in d["N_schedule"]),
                              a_seq=tuple(d["a_seq"]) if d.get("a_seq") is not None else None,
                              s=d.get("s"), A=d.get("A"), samples=int(d["samples"]), grid=int(d["grid"]),
                              seed=args.seed)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid weld configuration: {exc}") from None
    return cfg, d


def cmd_weld(args, out: Outputs, defaults: dict) -> tuple:
    from .weld_iter import run
    raw = _read_json(args.config) if args.config else {}
    if not isinstance(raw, dict):
        raise InputError("weld configuration must be a JSON object")
    cfg, snapshot = weld_config(raw, args, defaults)
    trace = run(cfg)
    out.write("trace.json", trace.dumps() + "\n")
    out.write("mismatch.csv", trace.mismatch_csv())
    for k in range(len(trace.annuli)):
        out.write(f"step_{k}.svg", trace.to_svg(k))
    snapshot = {k: v for k, v in snapshot.items() if k not in ("inner", "outer")}
    snapshot["h_table_size"] = len(cfg.h.theta)
    return snapshot, (0 if trace.failure is None else 1)


# ---------------------------------------------------------------- dim

def cmd_dim(args, out: Outputs, defaults: dict) -> tuple:
    from .dimension import box_dim, mattila_build, squares_as_rects, tree_scales
    if args.s is None or not 1.0 < args.s < 2.0:
        raise InputError("--s must lie in (1, 2)")
    depth = defaults["dim"]["depth"] if args.depth is None else args.depth
    try:
        tree = mattila_build(args.s, depth, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out.write("tree.svg", tree.to_svg())
    result = {"s": args.s, "depth": tree.depth, "leaves": int(len(tree.leaves()[0])),
              "checks": tree.checks()}
    if args.estimate:
        if tree.depth < 2:
            raise InputError("--estimate needs depth at least 2")
        ll, side = tree.leaves()
        rep = box_dim(squares_as_rects(ll, side), tree_scales(tree))
        out.write("box_dim.csv", rep.to_csv())
        tol = defaults["dim"]["tolerance"]
        result["estimate"] = rep.estimate
        result["fit_r2"] = rep.fit_r2
        result["pass"] = bool(abs(rep.estimate - args.s) <= tol)
    out.write("dim.json", dumps(result))
    return {"s": args.s, "depth": depth, "estimate": bool(args.estimate)}, 0


# ---------------------------------------------------------------- calibrate

def calibrate(seed: int = 0) -> dict:
    """Fit the constants that the estimates leave free."""
    from .logcap import far_set_capacity, koebe_boundary_samples
    from .shapes import admissibility, comb_shape
    from .slitmap import SlitMapConfig, build_E, disk_sandwich, slit_map
    out = {}
    c = []
    for N in (16, 32):
        A = N + 4.0
        sd = slit_map(build_E(N, A), SlitMapConfig(N, A, N, 0.5 / N))
        c.append(disk_sandwich(sd)["c_needed"])
    out["slit_sandwich_c"] = float(max(c))
    samples = koebe_boundary_samples()
    Rs = [4.0, 16.0, 64.0]
    caps = [far_set_capacity(samples, 1.0, R)[1] for R in Rs]
    slope = float(np.polyfit(np.log(Rs), np.log(caps), 1)[0])
    out["far_set_slope"] = slope
    out["far_set_C"] = float(max(cp * np.sqrt(R) for cp, R in zip(caps, Rs)))
    ratios = []
    for M in (3.0, 4.0):
        spec = comb_shape(2 * M + 8.0, 2 * M, 0.5)
        rep, _ = admissibility(spec, M, grid=96)
        bound = 2.0 * np.exp(-np.pi * (M - 1) / 2) / (M - 1)
        ratios.append(rep.measured_sup_dilatation / bound)
    out["admissible_proof_C"] = float(max(ratios))
    out["seed"] = seed
    return out


def cmd_calibrate(args, out: Outputs, defaults: dict) -> tuple:
    consts = calibrate(args.seed)
    out.write("calibration.json", dumps(consts))
    if args.write_defaults:
        path = str(files("flexweld").joinpath(DEFAULTS_FILE))
        new = dict(defaults)
        new["fitted_constants"] = consts
        write_atomic(path, dumps(new))
    return {"write_defaults": bool(args.write_defaults)}, 0


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexweld", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="flexweld-out")
    common.add_argument("--record-time", action="store_true",
                        help="store wall time in the manifest (breaks byte-identical reruns)")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("capacity", parents=[common], help="logarithmic capacity of an arc set")
    c.add_argument("input", help='JSON list of [lo, hi] arcs, "full", or - for stdin')
    c.add_argument("--panels", type=int, nargs="+")
    w = sub.add_parser("weld", parents=[common], help="iterative welding run")
    w.add_argument("config", nargs="?", help="JSON configuration (defaults when omitted)")
    w.add_argument("--mode", choices=["plain", "positive_area", "dim_s", "dim_1"])
    w.add_argument("--steps", type=int)
    w.add_argument("--mesh", type=int, help="boundary samples per curve")
    w.add_argument("--s", type=float)
    d = sub.add_parser("dim", parents=[common], help="square tree of prescribed dimension")
    d.add_argument("--s", type=float)
    d.add_argument("--depth", type=int)
    d.add_argument("--estimate", action="store_true")
    k = sub.add_parser("calibrate", parents=[common], help="refit the unspecified constants")
    k.add_argument("--write-defaults", action="store_true")
    return p


COMMANDS = {"capacity": cmd_capacity, "weld": cmd_weld, "dim": cmd_dim, "calibrate": cmd_calibrate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    defaults = load_defaults()
    out = Outputs(args.out)
    t0 = time.perf_counter()
    try:
        snapshot, code = COMMANDS[args.command](args, out, defaults)
    except InputError as exc:
        print(f"flexweld {args.command}: {exc}", file=sys.stderr)
        return 2
    manifest = RunManifest(args.command, snapshot, args.seed, tool_version(),
                           defaults.get("fitted_constants", {}), defaults.get("tolerances", {}),
                           list(out.names), status="ok" if code == 0 else "failed")
    if args.record_time:
        manifest.wall_time = time.perf_counter() - t0
    out.write("manifest.json", dumps(manifest.to_json()))
    return code


if __name__ == "__main__":
    sys.exit(main())
