from __future__ import annotations

import numpy as np
import pytest

from riemkob.disk.curve import BoundaryCurve
from riemkob.disk.grid import DiskGrid
from riemkob.disk.harmonic import (
    HarmonicSolveError,
    harmonic_extension,
    harmonic_residual,
    normal_residual,
    poisson_solve,
)
from riemkob.manifold import ChartDomainError, euclidean, poincare_ball, unit_disk_flat
from riemkob.oracles.records import value as frozen


def test_flat_identity_disk():
    g = DiskGrid(64)
    curve = BoundaryCurve.circle([0, 0, 0], [1, 0, 0], [0, 1, 0])
    res = harmonic_extension(euclidean(3), curve, g)
    expected = np.column_stack([g.xy, np.zeros(g.size)])
    assert res.residual <= 1e-10
    assert np.max(np.abs(res.map.values - expected)) <= 1e-3


def test_flat_extension_decouples_into_poisson_solves():
    g = DiskGrid(32)
    curve = BoundaryCurve(np.array([[0.1, 0, 0], [1, 0.2, 0], [0, 1, 0.3], [0.1, 0, 0.2], [0, -0.1, 0]]))
    u = harmonic_extension(euclidean(3), curve, g).map.values
    bnd = curve(g.angles)
    for i in range(3):
        ref = poisson_solve(g, np.zeros(g.size), bnd[:, i])
        assert np.max(np.abs(u[:, i] - ref)) <= 1e-12


@pytest.mark.parametrize("spec", [euclidean(3), poincare_ball(2)], ids=lambda s: s.name)
def test_constant_curve_gives_constant_map(spec):
    g = DiskGrid(16)
    p = np.full(spec.dim, 0.2)
    res = harmonic_extension(spec, np.tile(p, (g.N, 1)), g)
    assert np.max(np.abs(res.map.values - p)) <= 1e-12


def test_poincare_circle_residual_and_refinement():
    """The scaled identity is harmonic for the conformal Poincare metric; the
    solver should find it to grid accuracy and reproduce the closed-form
    center derivative."""
    spec = poincare_ball(2)
    ref = frozen("poincare_circle_harmonic")
    curve = BoundaryCurve.circle([0, 0], [1, 0], [0, 1], ref["scale"])
    sols = {}
    for m in (32, 64):
        g = DiskGrid(m)
        res = harmonic_extension(spec, curve, g, tol=1e-6)
        assert res.residual <= 1e-6
        sols[m] = res.map
    err64 = np.max(np.abs(sols[64].values - ref["scale"] * DiskGrid(64).xy))
    half = np.max(np.abs(sols[32].values - sols[64](DiskGrid(32).z)))
    assert err64 <= 1e-8
    assert half <= max(4 * err64, 1e-9)
    u0, ux, uy = sols[64].center_jet()
    alpha = np.sqrt(4.0) * np.linalg.norm(ux)
    assert abs(alpha - ref["alpha"]) <= 1e-8


def test_nonlinear_solve_off_center_curve():
    spec = poincare_ball(2)
    g = DiskGrid(32)
    curve = BoundaryCurve(np.array([[0.2, 0.1], [0.3, 0.05], [0.0, 0.25], [0.03, 0.0], [0.0, 0.02]]))
    res = harmonic_extension(spec, curve, g, tol=1e-9)
    assert res.residual <= 1e-9
    assert res.method in ("newton", "picard")
    assert np.array_equal(res.map.boundary, curve(g.angles))
    assert normal_residual(spec, res.map) <= res.residual + 1e-12


def test_curve_leaving_chart_is_rejected():
    g = DiskGrid(16)
    curve = BoundaryCurve.circle([0, 0], [1, 0], [0, 1], 1.2)
    with pytest.raises(ChartDomainError):
        harmonic_extension(unit_disk_flat(), curve, g)


def test_boundary_shape_checked():
    with pytest.raises(ValueError):
        harmonic_extension(euclidean(2), np.zeros((7, 2)), DiskGrid(8))


def test_nonconvergence_reports_error():
    spec = poincare_ball(2)
    g = DiskGrid(16)
    curve = BoundaryCurve(np.array([[0.1, 0.0], [0.8, 0.0], [0.0, 0.8]]))
    with pytest.raises((HarmonicSolveError, ChartDomainError)):
        harmonic_extension(spec, curve, g, tol=1e-14, max_newton=1, max_picard=1)


def test_harmonic_residual_of_nonharmonic_map():
    from riemkob.disk.maps import DiskMap

    g = DiskGrid(16)
    d = DiskMap.from_function(g, lambda x, y: np.column_stack([x * x + y * y, y]))
    assert abs(harmonic_residual(euclidean(2), d) - 4.0) <= 1e-8
