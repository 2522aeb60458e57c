"""Frozen oracle records: definitions, freezing and re-derivation.

A record is a JSON file ``records/v1/<name>.json``::

    {"schema": "riemkob-oracle/v1", "name": ..., "oracle": ..., "inputs": {...},
     "parameters": {...}, "value": ..., "timestamp": "<UTC ISO time of freezing>"}

``oracle`` names a function in :data:`ORACLES`; it is called as
``fn(**inputs, **parameters)``.  Re-deriving must reproduce ``value`` exactly
(after a JSON round trip).
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .closed_forms import (
    disk_classical_oracle,
    fd_gradient,
    flat_disk_oracle,
    linear_conformality,
    scaled_identity_disk,
)
from .geodesic import brute_geodesic
from .mesh import scherk_mesh_area
from .symbolic import christoffel, metric_value

SCHEMA = "riemkob-oracle/v1"
RECORDS_DIR = Path(__file__).parent / "records" / "v1"

POINCARE_2 = ["1 1 4/((1 - x1^2 - x2^2)^2)", "2 2 4/((1 - x1^2 - x2^2)^2)"]
EUCLIDEAN_3 = ["1 1 1", "2 2 1", "3 3 1"]

ORACLES = {
    "brute_geodesic": brute_geodesic,
    "christoffel": christoffel,
    "disk_classical": disk_classical_oracle,
    "fd_gradient": fd_gradient,
    "flat_disk": flat_disk_oracle,
    "linear_conformality": linear_conformality,
    "metric_value": metric_value,
    "scaled_identity_disk": scaled_identity_disk,
    "scherk_mesh_area": scherk_mesh_area,
}

# name -> (oracle, inputs, parameters)
DEFINITIONS = {
    "fd_gradient_poincare_factor": ("fd_gradient", {"source": "4/((1-x1^2-x2^2)^2)", "dim": 2, "point": [0.5, 0.0],
                                                    "component": 1}, {"step": 1e-5}),
    "poincare_metric_half": ("metric_value", {"metric": POINCARE_2, "dim": 2, "point": [0.5, 0.0]}, {}),
    "poincare_christoffel_origin": ("christoffel", {"metric": POINCARE_2, "dim": 2, "point": [0.0, 0.0]}, {}),
    "poincare_christoffel_sample": ("christoffel", {"metric": POINCARE_2, "dim": 2, "point": [0.3, -0.2]}, {}),
    "brute_geodesic_poincare": ("brute_geodesic", {"metric": POINCARE_2, "dim": 2, "p": [0.0, 0.0], "q": [0.5, 0.0]},
                                {"segments": 512}),
    "brute_geodesic_euclidean": ("brute_geodesic", {"metric": EUCLIDEAN_3, "dim": 3, "p": [0.0, 0.0, 0.0],
                                                    "q": [1.0, 2.0, 2.0]}, {"segments": 64}),
    "scherk_mesh_area": ("scherk_mesh_area", {"radius": 0.5}, {"rings": 256}),
    "linear_conformality_2x_y": ("linear_conformality", {"a11": 2.0, "a12": 0.0, "a21": 0.0, "a22": 1.0}, {}),
    "flat_metric_cap20": ("flat_disk", {"p": [0.0, 0.0], "cap": 20.0, "xi": [1.0, 0.0]}, {}),
    "flat_chain_cap20": ("flat_disk", {"p": [0.0, 0.0], "cap": 20.0, "q": [1.0, 0.0]}, {}),
    "disk_metric_origin": ("disk_classical", {"z": [0.0, 0.0], "v": [1.0, 0.0]}, {}),
    "disk_metric_half": ("disk_classical", {"z": [0.5, 0.0], "v": [1.0, 0.0]}, {}),
    "disk_distance_03": ("disk_classical", {"z": [0.0, 0.0], "w": [0.3, 0.0]}, {}),
    "disk_distance_05": ("disk_classical", {"z": [0.0, 0.0], "w": [0.5, 0.0]}, {}),
    "disk_distance_pair3": ("disk_classical", {"z": [0.2, 0.0], "w": [-0.2, 0.1]}, {}),
    "poincare_circle_harmonic": ("scaled_identity_disk", {"scale": 0.3, "factor_at_zero": 4.0}, {}),
    "poincare_seed_radius": ("scaled_identity_disk", {"scale": 0.1, "factor_at_zero": 4.0}, {}),
}


@dataclass
class OracleRecord:
    name: str
    oracle: str
    inputs: dict
    parameters: dict
    value: object
    timestamp: str
    schema: str = SCHEMA

    def compute(self):
        return _jsonable(ORACLES[self.oracle](**self.inputs, **self.parameters))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _roundtrip(v):
    return json.loads(json.dumps(v))


def load_records(directory: Path | None = None) -> list[OracleRecord]:
    directory = Path(directory or RECORDS_DIR)
    out = []
    for path in sorted(directory.glob("*.json")):
        doc = json.loads(path.read_text())
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"{path}: unknown oracle schema {doc.get('schema')!r}")
        out.append(OracleRecord(**doc))
    return out


def record(name: str, directory: Path | None = None) -> OracleRecord:
    path = Path(directory or RECORDS_DIR) / f"{name}.json"
    return OracleRecord(**json.loads(path.read_text()))


def value(name: str):
    """Frozen value of the record ``name``."""
    return record(name).value


def rederive(rec: OracleRecord) -> dict:
    fresh = _roundtrip(rec.compute())
    return {"name": rec.name, "frozen": rec.value, "rederived": fresh, "exact": fresh == rec.value}


def freeze(names=None, directory: Path | None = None) -> list[OracleRecord]:
    """Compute and write records; an unchanged value keeps its original timestamp."""
    directory = Path(directory or RECORDS_DIR)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name in names or sorted(DEFINITIONS):
        oracle, inputs, params = DEFINITIONS[name]
        rec = OracleRecord(name, oracle, inputs, params, None, "")
        rec.value = _roundtrip(rec.compute())
        path = directory / f"{name}.json"
        old = json.loads(path.read_text()) if path.exists() else None
        if old and old.get("value") == rec.value and old.get("inputs") == _roundtrip(inputs):
            rec.timestamp = old["timestamp"]
        else:
            rec.timestamp = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
        path.write_text(rec.to_json())
        out.append(rec)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m riemkob.oracles.records")
    ap.add_argument("--freeze", action="store_true", help="recompute and write all records")
    ap.add_argument("names", nargs="*")
    args = ap.parse_args(argv)
    if args.freeze:
        for rec in freeze(args.names or None):
            print(f"{rec.name}: {json.dumps(rec.value)}")
        return 0
    bad = 0
    for rec in load_records():
        if args.names and rec.name not in args.names:
            continue
        res = rederive(rec)
        bad += not res["exact"]
        print(f"{'ok   ' if res['exact'] else 'DRIFT'} {rec.name}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
