from __future__ import annotations

import json
import subprocess
import sys

import pytest

from riemkob.cli import ConfigError, config_from_args, main
from riemkob.disk.maps import load_disk

BAD_ENTRY = 'dim: 2\nchart: {kind: ball, radius: 1}\nmetric:\n  - "1 1 1 + * x1"\n  - "2 2 1"\n'
INDEFINITE = 'dim: 2\nchart: {kind: ball, radius: 1}\nmetric:\n  - "1 1 1"\n  - "2 1 2"\n  - "2 2 1"\n'


def run_json(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


def test_metric_cap20(capsys):
    code, doc = run_json(capsys, ["metric", "--spec", "builtin:euclidean:2", "--point", "0,0", "--direction", "1,0",
                                  "--cap", "20"])
    assert code == 0
    (rec,) = doc["records"]
    assert rec["value"] == 0.05
    assert rec["seed"] == 0 and rec["config_hash"] == doc["config_hash"] != ""


@pytest.mark.parametrize("text, needle", [(BAD_ENTRY, "metric entry 1 1"), (INDEFINITE, "positive definite")])
def test_malformed_spec_exits_2(tmp_path, capsys, text, needle):
    path = tmp_path / "spec.yaml"
    path.write_text(text)
    code, doc = run_json(capsys, ["metric", "--spec", str(path), "--point", "0,0", "--direction", "1,0"])
    assert code == 2
    assert doc["status"] == "error" and doc["error"]["type"] == "ManifoldSpecError"
    assert needle in doc["error"]["message"]


def test_bad_flags_exit_2(capsys):
    code, doc = run_json(capsys, ["metric", "--spec", "builtin:euclidean:2", "--cap", "0"])
    assert code == 2 and "cap" in doc["error"]["message"]
    code, doc = run_json(capsys, ["metric", "--spec", "builtin:euclidean:2"])
    assert code == 2 and "--point" in doc["error"]["message"]
    code, doc = run_json(capsys, ["metric", "--spec", "builtin:unit_disk_flat", "--point", "2,0", "--direction", "1,0"])
    assert code == 2 and doc["error"]["type"] == "ChartDomainError"


def test_solver_failure_exits_3(tmp_path, capsys):
    curve = tmp_path / "curve.json"
    curve.write_text(json.dumps({"coeffs": [[0.0, 0.0], [0.5, 0.0], [0.0, 0.3], [0.0, 0.0], [0.0, 0.08]]}))
    code, doc = run_json(capsys, ["solve", "--spec", "builtin:unit_disk_flat", "--curve", str(curve), "--grid", "16",
                                  "--tol", "1e-14"])
    assert code == 3 and doc["error"]["type"] == "PlateauError"


def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("spec: builtin:unit_disk_flat\nrestarts: 2\nseed: 4\n")
    rc = config_from_args(["metric", "--config", str(cfg), "--seed", "9", "--point", "0,0", "--direction", "1,0"])
    assert rc.restarts == 2 and rc.seed == 9 and rc.spec == "builtin:unit_disk_flat"
    cfg.write_text("bogus: 1\n")
    with pytest.raises(ConfigError):
        config_from_args(["metric", "--config", str(cfg)])


def test_solve_circle_with_dump(tmp_path, capsys):
    dump = tmp_path / "disk.txt"
    code, doc = run_json(capsys, ["solve", "--spec", "builtin:unit_disk_flat", "--circle", "0.5", "--grid", "16",
                                  "--dump", str(dump)])
    assert code == 0
    assert doc["records"][0]["conformality_residual"] <= 1e-6
    disk, header = load_disk(dump)
    assert disk.grid.m == 16


def test_coincide_gap(tmp_path, capsys):
    code, doc = run_json(capsys, ["coincide", "--spec", "builtin:euclidean:2", "--cap", "20", "--pair", "0,0:1,0"])
    assert code == 0
    (row,) = doc["records"]
    assert row["gap"] <= 0.10 and row["one_sided"]


def test_scan_writes_plot(tmp_path, capsys):
    plot = tmp_path / "plot.csv"
    code, doc = run_json(capsys, ["scan", "--spec", "builtin:euclidean:2", "--cap", "20", "--region", "ball:0,0:1",
                                  "--samples", "4", "--plot", str(plot)])
    assert code == 0 and len(doc["records"]) == 4
    assert len(plot.read_text().splitlines()) == 5


def test_oracle_command(capsys):
    code, doc = run_json(capsys, ["oracle"])
    assert code == 0 and all(r["exact"] for r in doc["records"])


def test_determinism_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        subprocess.run([sys.executable, "-m", "riemkob", "coincide", "--spec", "builtin:unit_disk_flat",
                        "--pair", "0,0:0.2,0.1", "--restarts", "1", "--format", "csv", "--out", str(out)],
                       check=True)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
