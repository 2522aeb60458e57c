from __future__ import annotations

import json
import math

import numpy as np
import pytest

from riemkob.oracles import records
from riemkob.oracles.closed_forms import disk_classical_oracle, flat_disk_oracle, linear_conformality
from riemkob.oracles.geodesic import brute_geodesic
from riemkob.oracles.mesh import scherk_mesh_area
from riemkob.oracles.symbolic import christoffel, metric_value


@pytest.mark.parametrize("rec", records.load_records(), ids=lambda r: r.name)
def test_record_rederives_exactly(rec):
    res = records.rederive(rec)
    assert res["exact"], f"{rec.name}: frozen {res['frozen']!r} vs {res['rederived']!r}"


def test_every_definition_is_frozen():
    assert {r.name for r in records.load_records()} == set(records.DEFINITIONS)


def test_record_files_follow_schema():
    for path in sorted(records.RECORDS_DIR.glob("*.json")):
        doc = json.loads(path.read_text())
        assert set(doc) == {"schema", "name", "oracle", "inputs", "parameters", "value", "timestamp"}
        assert doc["schema"] == records.SCHEMA and doc["name"] == path.stem
        assert doc["oracle"] in records.ORACLES


def test_freeze_keeps_timestamp_of_unchanged_value(tmp_path):
    first = records.freeze(["disk_metric_half"], tmp_path)[0]
    again = records.freeze(["disk_metric_half"], tmp_path)[0]
    assert again.timestamp == first.timestamp and again.value == first.value == 4 / 3


def test_records_cli_reports_no_drift(capsys):
    assert records.main([]) == 0
    assert "DRIFT" not in capsys.readouterr().out


def test_classical_disk_values():
    assert disk_classical_oracle([0.0, 0.0], v=[1.0, 0.0]) == 1.0
    assert math.isclose(disk_classical_oracle([0.0, 0.0], w=[0.5, 0.0]), 0.5 * math.log(3), rel_tol=1e-15)
    with pytest.raises(ValueError):
        disk_classical_oracle([1.0, 0.0], v=[1.0, 0.0])


def test_flat_disk_values():
    assert flat_disk_oracle([0, 0], 20.0, xi=[3.0, 4.0]) == 0.25
    assert math.isclose(flat_disk_oracle([0, 0], 20.0, q=[1.0, 0.0]), math.atanh(0.05), rel_tol=1e-14)
    with pytest.raises(ValueError):
        flat_disk_oracle([0, 0], 1.0, q=[2.0, 0.0])


def test_linear_conformality():
    assert linear_conformality(1, 0, 0, 1) == 0.0
    assert linear_conformality(2, 0, 0, 1) == 0.6


def test_symbolic_metric_and_christoffel():
    poincare = records.POINCARE_2
    G = metric_value(poincare, 2, [0.0, 0.0])
    assert np.array_equal(G, [[4.0, 0.0], [0.0, 4.0]])
    assert not np.any(christoffel(poincare, 2, [0.0, 0.0]))


def test_brute_geodesic_flat_is_straight():
    assert abs(brute_geodesic(records.EUCLIDEAN_3, 3, [0, 0, 0], [1, 2, 2], segments=16) - 3.0) <= 1e-12


def test_mesh_area_converges():
    coarse = scherk_mesh_area(0.5, 64)
    fine = scherk_mesh_area(0.5, 128)
    ref = records.value("scherk_mesh_area")
    assert abs(fine - ref) < abs(coarse - ref)
