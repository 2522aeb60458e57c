"""Command-line front end.

    riemkob metric   --spec builtin:euclidean:2 --point 0,0 --direction 1,0 --cap 20
    riemkob distance --spec builtin:unit_disk_flat --p 0,0 --q 0.3,0
    riemkob coincide --spec builtin:unit_disk_flat --pair "0,0:0.3,0"
    riemkob scan     --spec builtin:unit_disk_flat --region ball:0,0:0.5 --samples 8
    riemkob probe    --spec builtin:unit_disk_flat --point 0,0 --direction 1,0
    riemkob solve    --spec my_spec.yaml --circle 0.5
    riemkob oracle

Settings come from defaults, then ``--config FILE`` (YAML or JSON), then flags.
Results go to ``--out`` (stdout by default) as ``--format json`` or ``csv``.
Failures write an error record and exit nonzero (2: bad input, 3: solver).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .disk.curve import BoundaryCurve
from .disk.grid import DiskGrid
from .disk.harmonic import HarmonicSolveError
from .disk.maps import dump_disk
from .disk.plateau import PlateauError, plateau_solve
from .disk.seed import SeedError
from .expr import ExprError
from .kobayashi import reports
from .kobayashi.distance import chain_distance, coincidence_report, integrated_distance
from .kobayashi.experiments import Region, equicontinuity_probe, hyperbolicity_scan, semicontinuity_probe
from .kobayashi.royden import SearchBudget, royden_estimate
from .manifold import ChartDomainError, ManifoldSpecError, NoAdmissiblePath, resolve_spec

COMMANDS = ("solve", "metric", "distance", "coincide", "scan", "probe", "oracle")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    spec: str | None = None
    grid: int = 64
    modes: int = 8
    cap: float = math.inf
    restarts: int = 5
    samples: int = 8
    tol: float = 1e-6
    seed: int = 0
    out: str | None = None
    format: str = "json"
    # command inputs
    point: tuple | None = None
    direction: tuple | None = None
    p: tuple | None = None
    q: tuple | None = None
    pairs: tuple = ()
    region: str | None = None
    curve: str | None = None
    circle: float | None = None
    deltas: tuple = (1e-2, 1e-3)
    plot: str | None = None
    dump: str | None = None

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be 'json' or 'csv'")
        for name in ("grid", "modes", "samples", "tol", "cap"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.restarts < 0 or self.seed < 0:
            raise ConfigError("restarts and seed must be nonnegative")
        if self.grid < 8 or self.grid % 2:
            raise ConfigError("grid must be an even integer >= 8")
        if self.command != "oracle" and not self.spec:
            raise ConfigError(f"command {self.command!r} needs --spec")
        return self

    def budget(self) -> SearchBudget:
        return SearchBudget(modes=self.modes, restarts=self.restarts, scale_cap=self.cap, grid_m=self.grid,
                            search_m=min(16, self.grid), tol=self.tol, seed=self.seed)

    def hash(self) -> str:
        d = asdict(self)
        d.pop("out")
        return reports.config_hash(d)


def _vector(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    try:
        return tuple(float(v) for v in str(text).split(","))
    except ValueError as err:
        raise ConfigError(f"cannot read a vector from {text!r}") from err


def _pair(text) -> tuple:
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return (_vector(text[0]), _vector(text[1]))
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ConfigError(f"pair {text!r} must read 'x1,x2:y1,y2'")
    return (_vector(parts[0]), _vector(parts[1]))


def _region(text: str, dim: int) -> Region:
    parts = str(text).split(":")
    if parts[0] == "ball" and len(parts) == 3:
        return Region.ball(_vector(parts[1]), float(parts[2]))
    if parts[0] == "box" and len(parts) == 3:
        return Region.box(_vector(parts[1]), _vector(parts[2]))
    raise ConfigError(f"region {text!r} must read 'ball:c1,c2:r' or 'box:lo1,lo2:hi1,hi2'")


_CONVERT = {"point": _vector, "direction": _vector, "p": _vector, "q": _vector, "deltas": _vector,
            "pairs": lambda v: tuple(_pair(x) for x in v)}


def _coerce(key, val):
    if val is None:
        return None
    if key in _CONVERT:
        return _CONVERT[key](val)
    kind = {f.name: f.type for f in fields(RunConfig)}[key]
    if kind == "int":
        return int(val)
    if kind in ("float", "float | None"):
        return float(val)
    return val


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riemkob", description="Conformal harmonic disks and Kobayashi-Royden estimates")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML or JSON file with RunConfig fields")
    ap.add_argument("--spec", help="manifold spec file or builtin:NAME[:DIM]")
    ap.add_argument("--grid", type=int, help="disk grid resolution m (default 64)")
    ap.add_argument("--modes", type=int, help="boundary-curve mode count K (default 8)")
    ap.add_argument("--cap", type=float, help="disk scale cap (default: none)")
    ap.add_argument("--restarts", type=int, help="simplex restarts (default 5)")
    ap.add_argument("--samples", type=int, help="samples for scans and probes (default 8)")
    ap.add_argument("--tol", type=float, help="solver tolerance (default 1e-6)")
    ap.add_argument("--seed", type=int, help="random seed (default 0)")
    ap.add_argument("--out", help="output file (default stdout)")
    ap.add_argument("--format", choices=("json", "csv"))
    ap.add_argument("--point")
    ap.add_argument("--direction")
    ap.add_argument("--p")
    ap.add_argument("--q")
    ap.add_argument("--pair", action="append", dest="pairs", help="'x1,x2:y1,y2'; repeatable")
    ap.add_argument("--region", help="'ball:c1,c2:r' or 'box:lo1,lo2:hi1,hi2'")
    ap.add_argument("--curve", help="JSON/YAML file with 'coeffs' for solve")
    ap.add_argument("--circle", type=float, help="solve: circle of this radius around the chart centre")
    ap.add_argument("--plot", help="scan: also write (x, y, value) plot data here")
    ap.add_argument("--dump", help="solve: also write the disk dump here")
    return ap


def _read_mapping(path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        doc = json.loads(text)
    else:
        import yaml

        doc = yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must hold a mapping")
    return doc


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    merged: dict = {"command": args.command}
    names = {f.name for f in fields(RunConfig)}
    if args.config:
        doc = _read_mapping(args.config)
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        merged.update({k: _coerce(k, v) for k, v in doc.items() if k != "command"})
    for k, v in vars(args).items():
        if k in names and k != "command" and v is not None:
            merged[k] = _coerce(k, v)
    return RunConfig(**merged).validate()


# ------------------------------------------------------------ commands


def _need(cfg, *names):
    for n in names:
        if getattr(cfg, n) in (None, ()):
            raise ConfigError(f"command {cfg.command!r} needs --{n.rstrip('s')}")


def _run_metric(cfg, spec):
    _need(cfg, "point", "direction")
    est = royden_estimate(spec, (np.array(cfg.point), np.array(cfg.direction)), cfg.budget())
    return "metric", [reports.metric_record(est)]


def _run_distance(cfg, spec):
    _need(cfg, "p", "q")
    pool: list = []
    b = cfg.budget()
    cval, chain = chain_distance(spec, cfg.p, cfg.q, b, pool)
    ival, path = integrated_distance(spec, cfg.p, cfg.q, b, pool, chain)
    return "distance", [{"p": list(cfg.p), "q": list(cfg.q), "chain": cval, "integrated": ival,
                         "links": len(chain.links), "matching_error": chain.matching_error() if chain.links else 0.0,
                         "path": path.vertices.tolist()}]


def _run_coincide(cfg, spec, sink):
    _need(cfg, "pairs")
    pool: list = []
    for idx, pr in enumerate(cfg.pairs):
        row = coincidence_report(spec, [pr], cfg.budget(), pool)[0]
        row["pair"] = idx
        sink.append(row)
    return "coincide", sink


def _run_scan(cfg, spec):
    _need(cfg, "region")
    region = _region(cfg.region, spec.dim)
    c_min, ests = hyperbolicity_scan(spec, region, cfg.samples, cfg.budget())
    rows = [reports.metric_record(e, i) for i, e in enumerate(ests)]
    for r in rows:
        r["c_min"] = c_min
    if cfg.plot:
        reports.write_plot_data(cfg.plot, rows)
    return "scan", rows


def _run_probe(cfg, spec):
    _need(cfg, "point", "direction")
    b = cfg.budget()
    base, eps = semicontinuity_probe(spec, cfg.point, cfg.direction, cfg.deltas, cfg.samples, b)
    rows = [{"probe": "semicontinuity", "delta": d, "epsilon": e, "base_value": base.value} for d, e in eps.items()]
    if base.certificate is not None:
        table, viol = equicontinuity_probe(spec, [base.certificate], budget=b, seed=cfg.seed)
        rows += [{"probe": "equicontinuity", "radius": s, "modulus": m, "violations": len(viol)} for s, m in table.items()]
    return "probe", rows


def _run_solve(cfg, spec):
    grid = DiskGrid(cfg.grid)
    if cfg.curve:
        doc = _read_mapping(cfg.curve)
        curve = BoundaryCurve(np.asarray(doc["coeffs"], dtype=float))
    elif cfg.circle:
        ch = spec.chart
        c = np.asarray(ch.center) if ch.kind == "ball" else 0.5 * (np.asarray(ch.lower) + np.asarray(ch.upper))
        e = np.eye(spec.dim)
        curve = BoundaryCurve.circle(c, e[0], e[1], cfg.circle)
    else:
        raise ConfigError("solve needs --curve or --circle")
    if curve.n != spec.dim:
        raise ConfigError(f"curve has {curve.n} coordinates, manifold dimension is {spec.dim}")
    disk = plateau_solve(spec, curve, grid, cfg.tol, modes=min(cfg.modes * 4, grid.N // 8) if cfg.curve else None)
    if cfg.dump:
        dump_disk(disk.map, cfg.dump, disk.residuals())
    u0, e1, e2 = disk.center_jet
    row = dict(disk.residuals())
    row.update({"immersion": disk.immersion, "immersion_ratio": disk.immersion_ratio,
                "center": u0.tolist(), "du0_e1": e1.tolist(), "du0_e2": e2.tolist(), "grid": cfg.grid})
    return "solve", [row]


def _run_oracle(cfg):
    from .oracles.records import load_records, rederive

    rows = []
    for rec in load_records():
        res = rederive(rec)
        rows.append({"name": rec.name, "oracle": rec.oracle, "frozen": res["frozen"], "exact": res["exact"]})
    if not all(r["exact"] for r in rows):
        raise RuntimeError("oracle drift: " + ", ".join(r["name"] for r in rows if not r["exact"]))
    return "oracle", rows


def execute(cfg: RunConfig, sink: list | None = None):
    """Run ``cfg``; returns ``(kind, records)``.  ``sink`` collects partial rows."""
    sink = [] if sink is None else sink
    if cfg.command == "oracle":
        return _run_oracle(cfg)
    spec = resolve_spec(cfg.spec)
    if cfg.command == "metric":
        return _run_metric(cfg, spec)
    if cfg.command == "distance":
        return _run_distance(cfg, spec)
    if cfg.command == "coincide":
        return _run_coincide(cfg, spec, sink)
    if cfg.command == "scan":
        return _run_scan(cfg, spec)
    if cfg.command == "probe":
        return _run_probe(cfg, spec)
    return _run_solve(cfg, spec)


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


INPUT_ERRORS = (ConfigError, ManifoldSpecError, ExprError, ChartDomainError, FileNotFoundError, KeyError)
SOLVER_ERRORS = (PlateauError, HarmonicSolveError, SeedError, NoAdmissiblePath, RuntimeError, ValueError,
                 np.linalg.LinAlgError)


def run(cfg: RunConfig) -> int:
    h = cfg.hash()
    sink: list = []
    try:
        kind, rows = execute(cfg, sink)
    except INPUT_ERRORS as err:
        _emit(reports.render(sink, cfg.format, cfg.command, h, cfg.seed, status="error",
                             error={"type": type(err).__name__, "message": str(err)}), cfg.out)
        return 2
    except SOLVER_ERRORS as err:
        status = "partial" if sink else "error"
        _emit(reports.render(sink, cfg.format, cfg.command, h, cfg.seed, status=status,
                             error={"type": type(err).__name__, "message": str(err)}), cfg.out)
        return 3
    _emit(reports.render(rows, cfg.format, kind, h, cfg.seed), cfg.out)
    return 0


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except (ConfigError, ValueError, OSError) as err:
        sys.stdout.write(reports.render([], "json", "config", "", 0, status="error",
                                        error={"type": type(err).__name__, "message": str(err)}))
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
