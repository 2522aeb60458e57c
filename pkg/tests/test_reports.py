from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from riemkob.kobayashi import reports
from riemkob.kobayashi.royden import SearchBudget, royden_estimate
from riemkob.manifold import euclidean


@pytest.fixture(scope="module")
def record():
    est = royden_estimate(euclidean(2), ([0.0, 0.0], [1.0, 0.0]), SearchBudget(scale_cap=20.0))
    return reports.metric_record(est)


def test_config_hash_is_order_independent():
    a = reports.config_hash({"x": 1, "y": [1.0, np.inf]})
    b = reports.config_hash({"y": [1.0, float("inf")], "x": 1})
    assert a == b and len(a) == 16
    assert reports.config_hash({"x": 2}) != reports.config_hash({"x": 1})


def test_metric_record_fields(record):
    assert record["value"] == 0.05 and record["family"] == "affine"
    assert record["budget"]["scale_cap"] == 20.0
    assert "conformality_residual" in record["residuals"]


def test_json_report_carries_hash_and_seed(record):
    doc = json.loads(reports.render([record, dict(record, sample_id=1)], "json", "metric", "abc", 7))
    assert doc["schema"] == reports.SCHEMA and doc["status"] == "ok"
    assert all(r["config_hash"] == "abc" and r["seed"] == 7 for r in doc["records"])


def test_csv_report_has_fixed_columns(record):
    text = reports.render([record], "csv", "metric", "abc", 3)
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == reports.METRIC_COLUMNS
    row = dict(zip(rows[0], rows[1]))
    assert float(row["value"]) == 0.05 and row["seed"] == "3" and row["config_hash"] == "abc"


def test_nonfinite_values_serialised_as_strings():
    doc = json.loads(reports.render([{"value": np.inf, "z": 1 + 2j}], "json", "x", "h", 0))
    assert doc["records"][0]["value"] == "inf" and doc["records"][0]["z"] == [1.0, 2.0]


def test_error_status_in_both_formats():
    err = {"type": "PlateauError", "message": "stalled"}
    doc = json.loads(reports.render([], "json", "solve", "h", 0, status="error", error=err))
    assert doc["status"] == "error" and doc["error"] == err
    text = reports.render([], "csv", "solve", "h", 0, status="partial", error=err)
    assert text.splitlines()[-1].startswith("# status,partial")
    with pytest.raises(ValueError):
        reports.render([], "xml", "solve", "h", 0)


def test_render_is_deterministic(record):
    assert reports.render([record], "json", "metric", "h", 0) == reports.render([record], "json", "metric", "h", 0)


def test_plot_data(tmp_path, record):
    assert reports.plot_data([record]) == [(0.0, 0.0, 0.05)]
    path = reports.write_plot_data(tmp_path / "plot.csv", [record])
    assert path.read_text().splitlines() == ["x,y,value", "0.0,0.0,0.05"]
