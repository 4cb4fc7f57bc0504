"""Command line runner: ``hermheat {build,solve,scan,residual-heat,info}``.

A run is described by one JSON config; flags override single keys and the
merged config is echoed into every output directory::

    OUT/config.json           effective config
    OUT/coefficients/*.json   coefficient files
    OUT/report.json           results and verdicts
    OUT/timings.json          wall-clock timings
    OUT/*.csv                 tables, one header row

Exit status is 0 when every verdict passes and 1 otherwise; failures are
listed under ``failures`` in the report.
"""
from __future__ import annotations

import argparse
import csv
import json
import re
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from itertools import combinations
from pathlib import Path

import numpy as np

from . import __version__
from .hermite_basis import MAX_NODES, basis_size, default_nodes
from .sobolev import HermiteCoeffs, delta_coeffs, gaussian_coeffs, sobolev_norm
from .stochastic import ito_convergence, mc_expectation, monotonicity_scan
from .translation_heat import (
    convolution_reference,
    envelope_radius,
    heat_apply,
    heat_residual_study,
    norm_bound_scan,
    strong_continuity_scan,
)

METHODS = ("spectral", "mc", "conv-reference")
SCAN_KINDS = ("translation-bound", "continuity", "monotonicity", "ito")

DEFAULT_THRESHOLDS = {
    "spectral_vs_conv": 1e-6,
    "mc_se_multiple": 3.0,
    "bound_slack": 0.5,
    "continuity_slope_tol": 0.1,
    "monotonicity_stability": 0.10,
    "ito_order_min": 0.3,
    "ito_order_max": 0.7,
    "heat_order_tol": 0.2,
}


@dataclass
class RunConfig:
    d: int = 1
    N: int = 32
    Q: int | None = None
    p: float = 0.0
    t: list = field(default_factory=lambda: [0.5])
    M: int = 100_000
    seed: int | None = None
    input: str = "hermite@0"
    method: str = "spectral"
    out: str | None = None
    workers: int = 1
    compare: bool = False
    kind: str | None = None
    points: int = 64
    levels: int = 4
    ps: list | None = None
    ensemble: int = 50
    Ns: list | None = None
    halvings: int = 8
    paths: int = 16
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(raw) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.thresholds = {**DEFAULT_THRESHOLDS, **(cfg.thresholds or {})}
        if not isinstance(cfg.t, list):
            cfg.t = [cfg.t]
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.d < 1 or self.N < 0:
            raise ValueError("need d >= 1 and N >= 0")
        if self.Q is not None and not 1 <= self.Q <= MAX_NODES:
            raise ValueError(f"Q must lie in [1, {MAX_NODES}]")
        if any(float(t) < 0 for t in self.t):
            raise ValueError("times must be non-negative")
        if self.M < 1 or self.workers < 1:
            raise ValueError("M and workers must be positive")


def parse_input(spec: str, d: int, N: int, Q: int | None = None) -> HermiteCoeffs:
    """Build coefficients from ``delta@x``, ``hermite@k``, ``gaussian@(mean,var)`` or a file."""
    m = re.fullmatch(r"(\w+)@\(?([^()]*)\)?", spec.strip())
    if m is None:
        path = Path(spec[5:] if spec.startswith("file:") else spec)
        if path.suffix == ".json" and path.exists():
            phi = HermiteCoeffs.load(path)
            if (phi.d, phi.N) != (d, N):
                raise ValueError(f"file holds d={phi.d}, N={phi.N}; config asks d={d}, N={N}")
            return phi
        raise ValueError(f"unknown distribution spec {spec!r}")
    kind, args = m.group(1), [float(v) for v in m.group(2).split(",") if v.strip()]
    if kind == "delta":
        x = np.broadcast_to(np.array(args or [0.0]), (d,)) if len(args) <= 1 else np.array(args)
        return delta_coeffs(x, d, N)
    if kind == "hermite":
        k = tuple(int(v) for v in args) if len(args) == d else None
        if k is None:
            raise ValueError(f"hermite@ needs {d} indices")
        return HermiteCoeffs.basis(k, N)
    if kind == "gaussian":
        if len(args) < 2:
            raise ValueError("gaussian@(mean, var) needs a mean and a variance")
        mean, var = args[:-1], args[-1]
        mean = np.broadcast_to(np.array(mean), (d,)) if len(mean) == 1 else np.array(mean)
        return gaussian_coeffs(mean, var, d, N, Q)
    raise ValueError(f"unknown distribution kind {kind!r}")


# ---------------------------------------------------------------------------
# run directory
# ---------------------------------------------------------------------------

class Run:
    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out) if cfg.out else None
        self.timings: dict[str, float] = {}
        self.failures: list[dict] = []
        if self.out:
            (self.out / "coefficients").mkdir(parents=True, exist_ok=True)
            (self.out / "config.json").write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True))

    def timed(self, label, fn, *args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        self.timings[label] = time.perf_counter() - t0
        return res

    def coeffs(self, name: str, phi: HermiteCoeffs) -> str | None:
        if not self.out:
            return None
        path = self.out / "coefficients" / f"{name}.json"
        phi.save(path)
        return str(path.relative_to(self.out))

    def table(self, name: str, rows: list[dict]) -> None:
        if not self.out or not rows:
            return
        with open(self.out / f"{name}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)

    def check(self, name: str, ok: bool, **detail) -> bool:
        if not ok:
            self.failures.append({"check": name, **detail})
        return ok

    def finish(self, results: dict) -> dict:
        report = {
            "command": self.command,
            "version": __version__,
            "config": asdict(self.cfg),
            "results": results,
            "passed": not self.failures,
            "failures": self.failures,
        }
        if self.out:
            (self.out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
            (self.out / "timings.json").write_text(json.dumps(self.timings, indent=2, sort_keys=True))
        return report


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_build(cfg: RunConfig) -> dict:
    run = Run(cfg, "build")
    phi = run.timed("build", parse_input, cfg.input, cfg.d, cfg.N, cfg.Q)
    path = run.coeffs("input", phi)
    return run.finish({
        "file": path,
        "size": len(phi),
        "norms": {str(p): sobolev_norm(phi, p) for p in (-1, 0, 1)},
        "coeffs": phi.to_json(),
    })


def _solve_one(method: str, phi: HermiteCoeffs, t: float, cfg: RunConfig):
    if method == "spectral":
        return heat_apply(phi, t, cfg.Q), None
    if method == "conv-reference":
        return (phi.replace(phi.coeffs.copy()) if t == 0 else convolution_reference(phi, t, cfg.Q)), None
    if method == "mc":
        if cfg.seed is None:
            raise ValueError("the mc method needs a seed")
        est = mc_expectation(phi, t, cfg.M, cfg.seed, workers=cfg.workers)
        return est.mean, est
    raise ValueError(f"invalid method {method!r}; choose from {METHODS}")


def cmd_solve(cfg: RunConfig) -> dict:
    if cfg.method not in METHODS:
        raise ValueError(f"invalid method {cfg.method!r}; choose from {METHODS}")
    run = Run(cfg, "solve")
    phi = parse_input(cfg.input, cfg.d, cfg.N, cfg.Q)
    run.coeffs("input", phi)
    methods = list(METHODS) if cfg.compare else [cfg.method]
    if cfg.compare and cfg.seed is None:
        methods.remove("mc")
    results, rows = [], []
    for t in map(float, cfg.t):
        sols = {}
        entry = {"t": t, "solutions": {}}
        for method in methods:
            sol, est = run.timed(f"{method}@{t}", _solve_one, method, phi, t, cfg)
            sols[method] = (sol, est)
            info = {"file": run.coeffs(f"{method}_t{t:g}", sol), "norm_p": sobolev_norm(sol, cfg.p)}
            if est is not None:
                info["se"] = est.se.tolist()
                info["aggregate_se"] = est.aggregate_se(cfg.p)
            entry["solutions"][method] = info
        if cfg.compare:
            entry["distances"] = {}
            for a, b in combinations(methods, 2):
                dist = sobolev_norm(sols[a][0] - sols[b][0], cfg.p)
                key = f"{a}|{b}"
                entry["distances"][key] = dist
                est = sols[a][1] or sols[b][1]
                if est is not None:
                    limit = cfg.thresholds["mc_se_multiple"] * est.aggregate_se(cfg.p)
                else:
                    limit = cfg.thresholds["spectral_vs_conv"]
                run.check(f"distance {key} at t={t:g}", dist <= limit, distance=dist, limit=limit)
                rows.append({"t": t, "pair": key, "distance": dist, "limit": limit})
        results.append(entry)
    run.table("distances", rows)
    return run.finish({"times": results})


def cmd_scan(cfg: RunConfig) -> dict:
    kind = cfg.kind
    if kind not in SCAN_KINDS:
        raise ValueError(f"invalid scan kind {kind!r}; choose from {SCAN_KINDS}")
    run = Run(cfg, f"scan {kind}")
    th = cfg.thresholds
    phi = parse_input(cfg.input, cfg.d, cfg.N, cfg.Q)
    out: dict = {"kind": kind}
    if kind == "translation-bound":
        reports = []
        for p in (cfg.ps if cfg.ps is not None else [cfg.p]):
            rep = run.timed(f"p={p}", norm_bound_scan, phi, p, seed=cfg.seed or 0, slack=th["bound_slack"])
            run.check(f"translation bound p={p}", rep.passed, slope=rep.slope, degree=rep.degree)
            reports.append(rep.to_json())
            run.table(f"translation_p{p:g}", [{"radius": r, "ratio": v} for r, v in zip(rep.radii, rep.ratios)])
        out["reports"] = reports
    elif kind == "continuity":
        reports = []
        for p in (cfg.ps if cfg.ps is not None else [cfg.p]):
            rep = run.timed(f"p={p}", strong_continuity_scan, phi, p, Q=cfg.Q,
                            tolerance=th["continuity_slope_tol"])
            run.check(f"continuity p={p}", rep.passed, slope=rep.slope)
            reports.append(rep.to_json())
            run.table(f"continuity_p{p:g}", [{"t": t, "distance": v} for t, v in zip(rep.times, rep.distances)])
        out["reports"] = reports
    elif kind == "monotonicity":
        if cfg.seed is None:
            raise ValueError("monotonicity scan needs a seed")
        Ns = cfg.Ns or [cfg.N]
        reps = [run.timed(f"N={n}", monotonicity_scan, cfg.p, cfg.ensemble, cfg.d, n, cfg.seed) for n in Ns]
        consts = [r.constant for r in reps]
        spread = (max(consts) - min(consts)) / abs(consts[0]) if consts[0] else float("inf")
        run.check("monotonicity bounded", bool(np.all(np.isfinite(consts))), constants=consts)
        run.check("monotonicity stable", spread <= th["monotonicity_stability"], spread=spread)
        out.update(constants=dict(zip(map(str, Ns), consts)), spread=spread,
                   reports=[r.to_json() for r in reps])
        run.table("monotonicity", [{"N": n, "constant": c} for n, c in zip(Ns, consts)])
    else:  # ito
        if cfg.seed is None:
            raise ValueError("ito scan needs a seed")
        T = float(cfg.t[0]) if cfg.t else 1.0
        rep = run.timed("ito", ito_convergence, phi, T=T, halvings=cfg.halvings, paths=cfg.paths,
                        seed=cfg.seed, p=cfg.p, workers=cfg.workers,
                        order_range=(th["ito_order_min"], th["ito_order_max"]))
        run.check("ito order", rep.passed, order=rep.order)
        out["report"] = rep.to_json()
        out["table"] = rep.table()
        run.table("ito", rep.table())
    return run.finish(out)


def cmd_residual_heat(cfg: RunConfig) -> dict:
    run = Run(cfg, "residual-heat")
    phi = parse_input(cfg.input, cfg.d, cfg.N, cfg.Q)
    method = cfg.method if cfg.method != "mc" else "spectral"
    results = []
    for T in map(float, cfg.t):
        if T == 0:
            results.append({"T": 0.0, "terminal": [0.0]})
            continue
        rep = run.timed(f"T={T}", heat_residual_study, phi, T, cfg.points, cfg.levels, cfg.p, method, cfg.Q,
                        cfg.thresholds["heat_order_tol"])
        run.check(f"heat residual order T={T:g}", rep.passed, orders=rep.orders)
        results.append(rep.to_json())
        run.table(f"residual_T{T:g}", [{"points": n, "terminal": r} for n, r in zip(rep.points, rep.terminal)])
    return run.finish({"reports": results})


def cmd_info(cfg: RunConfig) -> dict:
    return {
        "version": __version__,
        "d": cfg.d,
        "N": cfg.N,
        "basis_size": basis_size(cfg.d, cfg.N),
        "default_Q": default_nodes(cfg.N),
        "max_Q": MAX_NODES,
        "translation_envelope": envelope_radius(cfg.N),
        "methods": list(METHODS),
        "scan_kinds": list(SCAN_KINDS),
    }


COMMANDS = {
    "build": cmd_build,
    "solve": cmd_solve,
    "scan": cmd_scan,
    "residual-heat": cmd_residual_heat,
    "info": cmd_info,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hermheat", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--compare", action="store_true", default=None)
    common.add_argument("--json", action="store_true", help="print the report to stdout")
    common.add_argument("-d", type=int, dest="d")
    common.add_argument("-N", type=int, dest="N")
    common.add_argument("-Q", type=int, dest="Q")
    common.add_argument("-p", type=float, dest="p")
    common.add_argument("-t", type=_floats, dest="t", help="time or comma-separated times")
    common.add_argument("-M", type=int, dest="M")
    common.add_argument("--input", help="delta@x | hermite@k | gaussian@(mean,var) | FILE.json")
    common.add_argument("--method", choices=METHODS)
    common.add_argument("--workers", type=int)
    common.add_argument("--ps", type=_floats, help="Sobolev orders for scans")
    common.add_argument("--Ns", type=_ints, help="truncations for the monotonicity scan")
    common.add_argument("--points", type=int)
    common.add_argument("--levels", type=int)
    common.add_argument("--halvings", type=int)
    common.add_argument("--paths", type=int)
    common.add_argument("--ensemble", type=int)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="write a coefficient file")
    sub.add_parser("solve", parents=[common], help="heat equation solution at given times")
    scan = sub.add_parser("scan", parents=[common], help="run a verification scan")
    scan.add_argument("kind", choices=SCAN_KINDS)
    sub.add_parser("residual-heat", parents=[common], help="integrated heat equation residual")
    sub.add_parser("info", parents=[common], help="describe a truncation")
    return parser


OVERRIDABLE = {f.name for f in fields(RunConfig)} - {"thresholds"}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    raw = json.loads(args.config.read_text()) if args.config else {}
    for key, value in vars(args).items():
        if key in OVERRIDABLE and value is not None:
            raw[key] = value
    return RunConfig.from_dict(raw)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = COMMANDS[args.command](cfg)
    except ValueError as exc:
        err = {"passed": False, "failures": [{"check": "input", "error": str(exc)}]}
        print(json.dumps(err), file=sys.stdout if args.json else sys.stderr)
        return 2
    if args.json or args.command == "info":
        print(json.dumps(report, indent=2, sort_keys=True))
    elif not report.get("passed", True):
        print(json.dumps(report["failures"], indent=2), file=sys.stderr)
    return 0 if report.get("passed", True) else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
