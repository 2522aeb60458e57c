"""Triangulated-mesh area of a graph over a disk, with Richardson extrapolation."""
from __future__ import annotations

import numpy as np


def _polar_mesh(radius: float, rings: int):
    M = 4 * rings
    r = radius * np.arange(1, rings + 1) / rings
    th = 2 * np.pi * np.arange(M) / M
    x = np.concatenate([[0.0], np.outer(r, np.cos(th)).ravel()])
    y = np.concatenate([[0.0], np.outer(r, np.sin(th)).ravel()])
    idx = lambda i, j: 1 + i * M + (j % M)  # noqa: E731
    tris = [(0, idx(0, j), idx(0, j + 1)) for j in range(M)]
    for i in range(rings - 1):
        for j in range(M):
            a, b = idx(i, j), idx(i, j + 1)
            c, d = idx(i + 1, j), idx(i + 1, j + 1)
            tris.append((a, c, d))
            tris.append((a, d, b))
    return x, y, np.array(tris)


def mesh_area(f, radius: float, rings: int) -> float:
    """Area of the triangulated surface ``(x, y, f(x, y))`` over ``|z| <= radius``."""
    x, y, tris = _polar_mesh(radius, rings)
    P = np.stack([x, y, f(x, y)], axis=1)
    A, B, C = P[tris[:, 0]], P[tris[:, 1]], P[tris[:, 2]]
    return float(0.5 * np.linalg.norm(np.cross(B - A, C - A), axis=1).sum())


def scherk(x, y):
    return np.log(np.cos(y) / np.cos(x))


def scherk_mesh_area(radius: float = 0.5, rings: int = 256) -> float:
    """Richardson extrapolation (h^2 error) of the mesh area at ``rings`` and ``2 rings``."""
    a1 = mesh_area(scherk, radius, rings)
    a2 = mesh_area(scherk, radius, 2 * rings)
    return (4 * a2 - a1) / 3
