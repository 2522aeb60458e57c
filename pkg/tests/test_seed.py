from __future__ import annotations

import numpy as np
import pytest

from riemkob.disk.grid import DiskGrid
from riemkob.disk.plateau import Mobius
from riemkob.disk.seed import CenteredDisk, SeedError, chart_radius, seed_disk
from riemkob.manifold import euclidean, metric_at, norm_at, orthonormal_frame, poincare_ball
from riemkob.oracles.records import value as frozen


def test_flat_seed_is_affine_and_exact():
    spec = euclidean(3)
    p = np.array([0.5, -1.0, 2.0])
    xi = np.array([0.0, 3.0, 4.0])
    g = DiskGrid(16)
    cd = seed_disk(spec, p, xi, 2.5, grid=g)
    e1, e2 = orthonormal_frame(spec, p, xi)[:2]
    x, y = g.xy.T
    expected = p + 2.5 * (np.outer(x, e1) + np.outer(y, e2))
    assert np.max(np.abs(cd.disk.map.values - expected)) <= 1e-12
    assert cd.disk.conformality_residual <= 1e-12
    assert cd.alpha == 2.5 and np.allclose(cd.xi_hat, xi / 5)


def test_flat_seed_residuals_at_roundoff():
    """Node values of an affine map are affine only to rounding; second
    differences amplify that by about m^2, so the measured tension is a
    roundoff floor, not a discretization error."""
    spec = euclidean(3)
    cd = seed_disk(spec, np.zeros(3), [0.0, 3.0, 4.0], 1.0, grid=DiskGrid(16))
    assert cd.disk.harmonic_residual <= 1e-12 and cd.disk.conformality_residual <= 1e-12
    big = seed_disk(spec, np.array([0.5, -1.0, 2.0]), [0.0, 3.0, 4.0], 2.5, grid=DiskGrid(64))
    assert big.disk.harmonic_residual <= 100 * 64**2 * np.finfo(float).eps * 3.0


def test_poincare_seed_matches_closed_form():
    spec = poincare_ball(2)
    ref = frozen("poincare_seed_radius")
    cd = seed_disk(spec, [0.0, 0.0], [1.0, 0.0], 0.2, grid=DiskGrid(32))
    u0, e1, _ = cd.center_jet
    assert np.max(np.abs(u0)) <= 1e-8
    assert abs(e1[1]) <= 1e-8 and e1[0] > 0
    assert cd.center_misfit <= 1e-8 and cd.angle_error <= 1e-8
    assert cd.disk.conformality_residual <= 1e-6 and cd.disk.harmonic_residual <= 1e-6
    assert abs(cd.alpha - ref["alpha"]) <= 1e-6
    g = cd.disk.grid
    assert np.max(np.abs(cd.disk.map.values - ref["scale"] * g.xy)) <= 1e-6


def test_seed_in_three_dimensions_off_center():
    spec = poincare_ball(3)
    p = np.array([0.2, -0.1, 0.15])
    xi = np.array([0.3, 1.0, -0.2])
    cd = seed_disk(spec, p, xi, 0.3, grid=DiskGrid(32))
    u0, e1, _ = cd.center_jet
    assert np.allclose(u0, p, atol=1e-6)
    assert cd.angle_error <= 1e-6
    G = metric_at(spec, p)
    assert abs(np.sqrt(e1 @ G @ e1) - cd.alpha) <= 1e-9
    assert cd.disk.conformality_residual <= 1e-6


def test_seed_direction_scaling():
    spec = poincare_ball(2)
    p = np.array([0.1, 0.2])
    xi = np.array([1.0, -0.5])
    a = 3.0
    g = DiskGrid(16)
    one = seed_disk(spec, p, xi, 0.25, grid=g)
    scaled = seed_disk(spec, p, a * xi, 0.25, grid=g)
    assert one.alpha > 0
    assert np.array_equal(one.disk.map.values, scaled.disk.map.values)
    alpha_one = one.alpha / norm_at(spec, p, xi)
    alpha_scaled = scaled.alpha / norm_at(spec, p, a * xi)
    assert abs(alpha_scaled - alpha_one / a) <= 1e-12 * alpha_one


def test_zero_direction_rejected():
    with pytest.raises(ValueError):
        seed_disk(euclidean(2), [0.0, 0.0], [0.0, 0.0], 1.0)


def test_radius_above_chart_cap_rejected():
    spec = poincare_ball(2)
    p, xi = [0.5, 0.0], [1.0, 0.0]
    e1, e2 = orthonormal_frame(spec, p, xi)[:2]
    cap = chart_radius(spec, p, e1, e2)
    with pytest.raises(SeedError):
        seed_disk(spec, p, xi, 1.5 * cap, grid=DiskGrid(16))


def test_centered_disk_gauge_jet():
    spec = euclidean(2)
    base = seed_disk(spec, [0.0, 0.0], [1.0, 0.0], 1.0, grid=DiskGrid(16))
    m = Mobius(0.3 + 0.1j, 0.4)
    gauged = CenteredDisk(base.disk, base.p, base.xi_hat, base.alpha, 0.0, 0.0, gauge=m)
    z = np.array([0.1 - 0.2j, 0.5j])
    U, J = gauged.jet(z)
    w = m(z)
    assert np.allclose(U[:, 0] + 1j * U[:, 1], w, atol=1e-12)
    deriv = np.exp(1j * m.beta) * (1 - abs(m.a) ** 2) / (1 + np.conj(m.a) * np.exp(1j * m.beta) * z) ** 2
    assert np.allclose(J[:, 0, 0] + 1j * J[:, 1, 0], deriv, atol=1e-10)
