from __future__ import annotations

import numpy as np
import pytest

from riemkob.disk.grid import DiskGrid
from riemkob.disk.maps import (
    DegenerateMapError,
    DiskMap,
    area,
    conformality_residual,
    dump_disk,
    energy,
    graph_stationary_residual,
    immersion_report,
    load_disk,
)
from riemkob.manifold import euclidean, poincare_ball
from riemkob.oracles.mesh import scherk
from riemkob.oracles.records import value as frozen

E2 = euclidean(2)


def linear(g, a11, a12, a21, a22):
    return DiskMap.from_function(g, lambda x, y: np.column_stack([a11 * x + a12 * y, a21 * x + a22 * y]))


def scherk_disk(g, radius=0.5):
    x, y = radius * g.xy.T
    return DiskMap(g, np.column_stack([x, y, scherk(x, y)]))


def test_energy_identity_and_dilation():
    g = DiskGrid(64)
    assert abs(energy(E2, linear(g, 1, 0, 0, 1)) - 2 * np.pi) <= 1e-6
    assert abs(energy(E2, linear(g, 2, 0, 0, 2)) - 8 * np.pi) <= 1e-6


def test_energy_of_constant_map_is_zero():
    g = DiskGrid(16)
    assert energy(E2, DiskMap(g, np.tile([0.3, 0.4], (g.size, 1)))) == 0.0


def test_area_identity_and_dilation():
    g = DiskGrid(64)
    assert abs(area(E2, linear(g, 1, 0, 0, 1)) - np.pi) <= 1e-6
    assert abs(area(E2, linear(g, 2, 0, 0, 2)) - 4 * np.pi) <= 1e-6


def test_area_of_scherk_graph_matches_mesh_oracle():
    g = DiskGrid(64)
    A = area(euclidean(3), scherk_disk(g))
    ref = frozen("scherk_mesh_area")
    assert abs(A - ref) <= 1e-4 * ref


def test_area_at_most_half_energy():
    g = DiskGrid(32)
    d = DiskMap.from_function(g, lambda x, y: np.column_stack([x + 0.3 * x * y, y - 0.2 * x * x, 0.5 * y * y]))
    assert area(euclidean(3), d) <= energy(euclidean(3), d) / 2 + 1e-8


def test_degenerate_map_reports_locus():
    g = DiskGrid(16)
    d = DiskMap.from_function(g, lambda x, y: np.column_stack([x, np.zeros_like(x)]))
    with pytest.raises(DegenerateMapError) as err:
        area(E2, d)
    assert len(err.value.locus) > 0
    assert immersion_report(E2, d)[0] is False


def test_conformality_residual_values():
    g = DiskGrid(16)
    assert conformality_residual(E2, linear(g, 1, 0, 0, 1)) <= 1e-12
    assert abs(conformality_residual(E2, linear(g, 2, 0, 0, 1)) - frozen("linear_conformality_2x_y")) <= 1e-12


def test_conformality_residual_scale_invariant():
    g = DiskGrid(16)
    ref = conformality_residual(E2, linear(g, 2, 0, 0, 1))
    assert abs(conformality_residual(E2, linear(g, 0.5, 0, 0, 0.25)) - ref) <= 1e-12
    base = DiskMap.from_function(g, lambda x, y: np.column_stack([x + 0.1 * x * x, y + 0.2 * x * y]))
    tripled = DiskMap(g, 3.0 * base.values)
    assert abs(conformality_residual(E2, tripled) - conformality_residual(E2, base)) <= 1e-12


def test_conformality_excludes_degenerate_nodes():
    g = DiskGrid(16)
    d = DiskMap.from_function(g, lambda x, y: np.column_stack([x * x - y * y, 2 * x * y]))
    value, excluded = conformality_residual(E2, d, return_excluded=True)
    assert list(excluded) == [0]
    assert value <= 1e-10


def test_conformal_map_in_poincare_metric():
    g = DiskGrid(32)
    d = DiskMap.from_function(g, lambda x, y: 0.4 * np.column_stack([x, y]))
    assert conformality_residual(poincare_ball(2), d) <= 1e-12


def test_graph_residual_zero_for_plane_and_scherk():
    g = DiskGrid(64)
    assert np.max(np.abs(graph_stationary_residual(np.zeros(g.size), g))) == 0.0
    x, y = 0.5 * g.xy.T
    res = graph_stationary_residual(scherk(x, y), g, radius=0.5)
    assert np.max(np.abs(res)) <= 1e-5


def test_graph_residual_paraboloid_at_origin():
    g = DiskGrid(16)
    x, y = g.xy.T
    res = graph_stationary_residual(x * x + y * y, g)
    assert abs(res[0] - 4.0) <= 1e-9


def test_jet_matches_grid_derivatives():
    g = DiskGrid(32)
    d = DiskMap.from_function(g, lambda x, y: np.column_stack([np.exp(x) * np.cos(y), np.exp(x) * np.sin(y)]))
    z = np.array([0.1 + 0.2j, -0.5j, 0.7])
    U, J = d.jet(z)
    ez = np.exp(z)
    assert np.allclose(U[:, 0] + 1j * U[:, 1], ez, atol=1e-9)
    assert np.allclose(J[:, 0, 0] + 1j * J[:, 1, 0], ez, atol=1e-8)
    assert np.allclose(J[:, 0, 1] + 1j * J[:, 1, 1], 1j * ez, atol=1e-8)


def test_rotation_by_index_shift():
    g = DiskGrid(16)
    d = DiskMap.from_function(g, lambda x, y: np.column_stack([x + 0.3 * x * y, y]))
    r = d.rotated(1)
    z = np.array([0.3 + 0.1j, -0.2 + 0.5j])
    assert np.allclose(r(z), d(1j * z), atol=1e-12)


def test_dump_roundtrip(tmp_path):
    g = DiskGrid(8)
    d = DiskMap.from_function(g, lambda x, y: np.column_stack([np.sin(x), y * y, x * y]))
    path = tmp_path / "disk.txt"
    dump_disk(d, path, {"conformality": 0.125})
    back, header = load_disk(path)
    assert np.array_equal(back.values, d.values)
    assert back.grid == g
    assert float(header["conformality"]) == 0.125


def test_nonfinite_values_rejected():
    g = DiskGrid(8)
    v = np.zeros((g.size, 2))
    v[5, 1] = np.inf
    with pytest.raises(ValueError):
        DiskMap(g, v)
