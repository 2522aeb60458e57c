from __future__ import annotations

import numpy as np
import pytest

from riemkob.disk.grid import DiskGrid, fd_weights
from riemkob.disk.harmonic import poisson_solve


def forced_error(m):
    g = DiskGrid(m)
    u = poisson_solve(g, np.ones(g.size), np.zeros(g.N))
    exact = (np.abs(g.z) ** 2 - 1) / 4
    return np.max(np.abs(u - exact))


def harmonic_error(m):
    g = DiskGrid(m)
    u = poisson_solve(g, np.zeros(g.size), np.cos(g.angles))
    return np.max(np.abs(u - g.xy[:, 0]))


def test_grid_shape_and_nodes():
    g = DiskGrid(16)
    assert g.N == 64 and g.size == 1 + 16 * 64
    assert np.all(np.abs(g.z) <= 1 + 1e-15)
    assert np.allclose(np.abs(g.z[g.rim]), 1.0)
    assert not g.interior[g.rim].any() and g.interior.sum() == g.size - g.N


@pytest.mark.parametrize("m", [6, 9, 0])
def test_grid_rejects_bad_resolution(m):
    with pytest.raises(ValueError):
        DiskGrid(m)


def test_quadrature_area():
    for m in (64, 128):
        assert abs(DiskGrid(m).integrate(np.ones(DiskGrid(m).size)) - np.pi) <= 1e-6


def test_quadrature_polynomial_moments():
    g = DiskGrid(64)
    r2 = np.abs(g.z) ** 2
    assert abs(g.integrate(r2) - np.pi / 2) <= 1e-6
    assert abs(g.integrate(g.xy[:, 0] ** 2) - np.pi / 4) <= 1e-6


def test_fd_weights_reproduce_polynomials():
    offs = np.arange(-3, 4)
    w1 = fd_weights(offs, 1, at=0.3)
    w2 = fd_weights(offs, 2, at=0.3)
    for k in range(6):
        f = offs.astype(float) ** k
        assert np.isclose(w1 @ f, k * 0.3 ** (k - 1) if k else 0.0, atol=1e-10)
        assert np.isclose(w2 @ f, k * (k - 1) * 0.3 ** (k - 2) if k > 1 else 0.0, atol=1e-9)


def test_derivatives_of_polynomial():
    g = DiskGrid(32)
    x, y = g.xy.T
    f = x**3 - 2 * x * y + y**2
    d = g.derivatives(f)
    assert np.max(np.abs(d["x"] - (3 * x**2 - 2 * y))) <= 1e-9
    assert np.max(np.abs(d["y"] - (-2 * x + 2 * y))) <= 1e-9
    assert np.max(np.abs(d["xx"] - 6 * x)) <= 1e-7
    assert np.max(np.abs(d["xy"] + 2)) <= 1e-7
    assert np.max(np.abs(d["yy"] - 2)) <= 1e-7


def test_poisson_zero_data():
    g = DiskGrid(32)
    assert np.max(np.abs(poisson_solve(g, np.zeros(g.size), np.zeros(g.N)))) == 0.0


def test_poisson_forced_solution():
    assert forced_error(64) <= 1e-3


def test_poisson_harmonic_polynomial():
    assert harmonic_error(64) <= 1e-3


def test_poisson_boundary_matches_exactly():
    g = DiskGrid(16)
    bnd = np.sin(3 * g.angles) + 0.2
    u = poisson_solve(g, np.random.default_rng(0).normal(size=g.size), bnd)
    assert np.array_equal(u[g.rim], bnd)


def test_poisson_discrete_residual():
    g = DiskGrid(32)
    x, y = g.xy.T
    rhs = np.exp(x) * np.cos(2 * y)
    u = poisson_solve(g, rhs, np.cos(g.angles) ** 2)
    assert np.max(np.abs((g.laplacian(u) - rhs)[g.interior])) <= 1e-9


def test_polynomial_solutions_are_reproduced_to_roundoff():
    for m in (16, 32):
        assert forced_error(m) <= 1e-12 and harmonic_error(m) <= 1e-12


def smooth_error(m):
    g = DiskGrid(m)
    x, y = g.xy.T
    exact = np.cos(3 * x) * np.exp(y)
    u = poisson_solve(g, -8 * exact, exact[g.rim])
    return np.max(np.abs(u - exact))


def test_poisson_convergence_order():
    """Non-polynomial forced solution: error drops by at least 3.5 per doubling."""
    errs = [smooth_error(m) for m in (8, 16, 32)]
    assert errs[1] <= errs[0] / 3.5 and errs[2] <= errs[1] / 3.5


def test_poisson_rejects_nonfinite():
    g = DiskGrid(8)
    rhs = np.zeros(g.size)
    rhs[3] = np.nan
    with pytest.raises(ValueError):
        poisson_solve(g, rhs, np.zeros(g.N))


def test_interpolation_of_smooth_function():
    g = DiskGrid(32)
    x, y = g.xy.T
    f = np.stack([np.exp(x) * np.sin(y), x * y], axis=1)
    rng = np.random.default_rng(4)
    z = np.sqrt(rng.uniform(0, 1, 20)) * np.exp(2j * np.pi * rng.uniform(size=20))
    exact = np.stack([np.exp(z.real) * np.sin(z.imag), z.real * z.imag], axis=1)
    assert np.max(np.abs(g.interpolate(f, z) - exact)) <= 1e-8
    assert np.allclose(g.interpolate(f, g.z[:5]), f[:5], atol=1e-12)
    with pytest.raises(ValueError):
        g.interpolate(f, [1.1])
