from __future__ import annotations

import numpy as np
import pytest

from riemkob.kobayashi.experiments import (
    Region,
    disk_upper_bound_check,
    equicontinuity_probe,
    hyperbolicity_scan,
    isometry_check,
    lipschitz_experiment,
    semicontinuity_probe,
)
from riemkob.kobayashi.royden import SearchBudget, royden_estimate
from riemkob.manifold import ManifoldSpecError, euclidean, poincare_ball, unit_disk_flat

QUICK = SearchBudget(restarts=1)
FLAT = SearchBudget(scale_cap=20.0)
# real form of z -> (z - 0.3) / (1 - 0.3 z)
_DEN = "((1-0.3*x1)^2+0.09*x2^2)"
AUTOMORPHISM = [f"((x1-0.3)*(1-0.3*x1)-0.3*x2^2)/{_DEN}", f"0.91*x2/{_DEN}"]


def test_region_sampling_is_deterministic_and_inside():
    reg = Region.ball([0.1, -0.2], 0.3)
    a = reg.sample(20, 7)
    assert np.array_equal(a, reg.sample(20, 7))
    assert np.all(reg.contains(a))
    box = Region.box([0, 0, 0], [1, 2, 3])
    assert np.all(box.contains(box.sample(10, 0)))


def test_scan_flat_plane_is_cap_limited():
    c_min, ests = hyperbolicity_scan(euclidean(2), Region.ball([0, 0], 1.0), 6, FLAT)
    assert abs(c_min - 1 / 20) <= 1e-12
    assert len(ests) == 6 and all(e.family == "affine" for e in ests)


def test_scan_poincare_disk_is_bounded_below():
    # unit vectors of the metric 4|dx|^2/(1-|x|^2)^2 have Kobayashi length 1/2
    c_min, _ = hyperbolicity_scan(poincare_ball(2), Region.ball([0, 0], 0.3), 4, QUICK)
    assert 0.5 - 1e-6 <= c_min <= 0.52


def test_scan_rejects_region_outside_chart():
    with pytest.raises(ValueError):
        hyperbolicity_scan(unit_disk_flat(), Region.ball([0.9, 0.0], 0.3), 8, QUICK)


def test_rotation_is_an_isometry():
    rep = isometry_check(unit_disk_flat(), unit_disk_flat(), ["0.6*x1-0.8*x2", "0.8*x1+0.6*x2"], 5, QUICK,
                         relation="equality", tol=0.02)
    assert rep.passed and rep.pullback_error <= 1e-12


def test_inclusion_decreases_the_metric():
    rep = isometry_check(unit_disk_flat(0.5), unit_disk_flat(), ["x1", "x2"], 5, QUICK, relation="inequality")
    assert rep.passed
    assert all(r["F_B"] < r["F_A"] for r in rep.rows)


def test_disk_automorphism_preserves_the_metric():
    rep = isometry_check(poincare_ball(2), poincare_ball(2), AUTOMORPHISM, 4, QUICK, relation="equality", tol=1e-2)
    assert rep.passed


def test_non_isometry_rejected():
    with pytest.raises(ManifoldSpecError):
        isometry_check(unit_disk_flat(), unit_disk_flat(), ["0.5*x1", "x2"], 2, QUICK)
    with pytest.raises(ValueError):
        isometry_check(unit_disk_flat(), unit_disk_flat(), ["x1", "x2"], 2, QUICK, relation="nearly")


def test_certificate_disk_bounds_metric_by_poincare():
    est = royden_estimate(unit_disk_flat(), ([0.3, 0.2], [1.0, 0.0]), QUICK)
    rows = disk_upper_bound_check(unit_disk_flat(), est.certificate, samples=8, budget=QUICK)
    assert all(r["ok"] for r in rows)


def test_equicontinuity_of_affine_disk():
    cert = royden_estimate(euclidean(2), ([0.0, 0.0], [1.0, 0.0]), FLAT).certificate
    table, violations = equicontinuity_probe(euclidean(2), [cert], radii=(0.1, 0.5), budget=FLAT)
    assert table[0.1] == pytest.approx(2.0, rel=1e-12) and table[0.5] == pytest.approx(10.0, rel=1e-12)
    assert violations == []
    with pytest.raises(ValueError):
        equicontinuity_probe(euclidean(2), [])


def test_semicontinuity_excess_shrinks():
    base, eps = semicontinuity_probe(unit_disk_flat(), [0.2, 0.1], [1.0, 0.0], count=5, budget=QUICK)
    assert base.finite
    assert eps[0.001] <= eps[0.01] <= 0.05


def test_lipschitz_bound_holds_on_small_sample():
    res = lipschitz_experiment(poincare_ball(2), [0.0, 0.0], 0.3, pairs=2, budget=QUICK, metric_samples=6)
    assert 0.5 - 1e-6 <= res["C_K"] <= 0.55
    assert res["violations"] == 0 and len(res["rows"]) == 2
