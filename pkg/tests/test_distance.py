from __future__ import annotations

import numpy as np
import pytest

from riemkob.kobayashi.distance import chain_distance, coincidence_report, integrated_distance
from riemkob.kobayashi.royden import SearchBudget
from riemkob.manifold import ChartDomainError, euclidean, unit_disk_flat
from riemkob.oracles.records import value as frozen

FLAT = SearchBudget(scale_cap=20.0)


@pytest.fixture(scope="module")
def flat_pair():
    pool = []
    value, chain = chain_distance(euclidean(2), [0.0, 0.0], [1.0, 0.0], FLAT, pool)
    integ, path = integrated_distance(euclidean(2), [0.0, 0.0], [1.0, 0.0], FLAT, pool, chain)
    return value, chain, integ, path


@pytest.fixture(scope="module")
def disk_pair():
    pool = []
    value, chain = chain_distance(unit_disk_flat(), [0.0, 0.0], [0.3, 0.0], SearchBudget(), pool)
    integ, path = integrated_distance(unit_disk_flat(), [0.0, 0.0], [0.3, 0.0], SearchBudget(), pool, chain)
    return value, chain, integ, path


def test_zero_distance_to_itself():
    value, chain = chain_distance(unit_disk_flat(), [0.2, 0.1], [0.2, 0.1])
    assert value == 0.0 and chain.links == ()
    ival, _ = integrated_distance(unit_disk_flat(), [0.2, 0.1], [0.2, 0.1])
    assert ival == 0.0


def test_flat_plane_chain_below_single_disk_bound(flat_pair):
    value, chain, _, _ = flat_pair
    assert 0 < value <= frozen("flat_chain_cap20")
    assert chain.matching_error() <= 1e-9


def test_flat_plane_integrated_form(flat_pair):
    value, _, integ, path = flat_pair
    assert integ <= 0.06
    assert integ <= value + 1e-6
    assert np.array_equal(path.vertices[0], [0.0, 0.0]) and np.array_equal(path.vertices[-1], [1.0, 0.0])


def test_unit_disk_distance_close_to_classical(disk_pair):
    value, chain, integ, _ = disk_pair
    target = frozen("disk_distance_03")
    assert abs(value - target) <= 0.10 * target
    assert abs(integ - target) <= 0.10 * target
    assert chain.matching_error() <= 1e-6
    assert abs(chain.length - value) <= 1e-15


def test_chain_symmetry(disk_pair):
    value, chain, _, _ = disk_pair
    back, rchain = chain_distance(unit_disk_flat(), [0.3, 0.0], [0.0, 0.0], SearchBudget())
    assert back == value
    assert np.array_equal(rchain.p, chain.q) and np.array_equal(rchain.q, chain.p)


def test_triangle_inequality_on_unit_disk():
    spec = unit_disk_flat()
    b = SearchBudget(restarts=2)
    pool = []
    x, y, z = [0.0, 0.0], [0.25, 0.1], [0.1, 0.3]
    dxy = chain_distance(spec, x, y, b, pool)[0]
    dyz = chain_distance(spec, y, z, b, pool)[0]
    dxz = chain_distance(spec, x, z, b, pool)[0]
    slack = 1e-6
    assert dxz <= dxy + dyz + slack
    assert dxy <= dxz + dyz + slack
    assert dyz <= dxy + dxz + slack


def test_coincidence_report_rows():
    rows = coincidence_report(euclidean(2), [([0.0, 0.0], [1.0, 0.0])], FLAT)
    (row,) = rows
    assert set(row) == {"pair", "p", "q", "chain", "integrated", "gap", "one_sided", "links", "matching_error"}
    assert row["one_sided"] and row["gap"] <= 0.10
    assert row["links"] >= 1


def test_endpoint_outside_chart_rejected():
    with pytest.raises(ChartDomainError):
        chain_distance(unit_disk_flat(), [0.0, 0.0], [1.2, 0.0])
    with pytest.raises(ValueError):
        chain_distance(unit_disk_flat(), [0.0, 0.0], [0.1, 0.0, 0.0])
