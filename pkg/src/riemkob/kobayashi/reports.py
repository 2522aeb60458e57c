"""CSV / JSON report writers with a fixed schema.

Every record carries the run's ``config_hash`` and ``seed``.  Output is a pure
function of the records (sorted keys, ``repr`` floats, no timestamps), so equal
runs give byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

SCHEMA = "riemkob-report/v1"
METRIC_COLUMNS = ("sample_id", "point", "direction", "value", "r", "family", "residuals", "budget",
                  "seed", "config_hash")


def config_hash(config: dict) -> str:
    blob = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _plain(x):
    """JSON-ready copy: arrays to lists, complex to pairs, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [_plain(float(x.real)), _plain(float(x.imag))]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def metric_record(est, sample_id: int = 0) -> dict:
    """Flatten a :class:`MetricEstimate` into a report row (without hash and seed)."""
    cert = est.certificate
    res = {}
    if cert is not None:
        res = dict(cert.disk.residuals())
        res["center_misfit"] = cert.center_misfit
        res["angle_error"] = cert.angle_error
        res["immersion_ratio"] = cert.disk.immersion_ratio
    return {
        "sample_id": sample_id,
        "point": np.asarray(est.p).tolist(),
        "direction": np.asarray(est.xi).tolist(),
        "value": est.value,
        "r": est.r,
        "family": est.family,
        "residuals": res,
        "budget": est.budget.to_dict(),
    }


def stamp(records, config_hash: str, seed: int) -> list[dict]:
    return [dict(r, seed=seed, config_hash=config_hash) for r in records]


def render(records, fmt: str, kind: str, config_hash: str, seed: int, status: str = "ok",
           error: dict | None = None) -> str:
    """The report text for ``records`` in ``fmt`` (``json`` or ``csv``)."""
    rows = [_plain(r) for r in stamp(records, config_hash, seed)]
    if fmt == "json":
        doc = {"schema": SCHEMA, "kind": kind, "status": status, "config_hash": config_hash, "seed": seed,
               "records": rows}
        if error is not None:
            doc["error"] = _plain(error)
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        cols = list(METRIC_COLUMNS) if kind == "metric" else _columns(rows)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in cols])
        if status != "ok":
            w.writerow(["# status", status, json.dumps(_plain(error or {}), sort_keys=True)])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def _columns(rows):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    front = [c for c in ("sample_id", "pair", "sample") if c in cols]
    tail = [c for c in ("seed", "config_hash") if c in cols]
    return front + sorted(c for c in cols if c not in front and c not in tail) + tail


def _cell(v):
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    if isinstance(v, float):
        return repr(v)
    return v


def write_report(path, records, fmt: str, kind: str, config_hash: str, seed: int, **kw) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(records, fmt, kind, config_hash, seed, **kw))
    return path


def plot_data(records) -> list[tuple[float, float, float]]:
    """``(x, y, value)`` triples from the first two coordinates of each record's point."""
    out = []
    for r in records:
        p = r["point"]
        out.append((float(p[0]), float(p[1]) if len(p) > 1 else 0.0, float(r["value"])))
    return out


def write_plot_data(path, records) -> Path:
    path = Path(path)
    lines = ["x,y,value"] + [f"{x!r},{y!r},{v!r}" for x, y, v in plot_data(records)]
    path.write_text("\n".join(lines) + "\n")
    return path
