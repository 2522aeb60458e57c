"""Golden boundary suite shared by the plateau and acceptance tests."""
from __future__ import annotations

import numpy as np

from riemkob.disk.curve import BoundaryCurve
from riemkob.manifold import euclidean, poincare_ball, unit_disk_flat
from riemkob.oracles.mesh import scherk


def _scherk_trace(t):
    x, y = 0.5 * np.cos(t), 0.5 * np.sin(t)
    return np.column_stack([x, y, scherk(x, y)])


def golden_suite():
    """``(label, spec, curve)`` for the five reference boundaries."""
    return [
        ("flat_circle", euclidean(3), BoundaryCurve.circle([0, 0, 0], [1, 0, 0], [0, 1, 0])),
        ("flat_ellipse", euclidean(3), BoundaryCurve.circle([0, 0, 0], [1, 0, 0], [0, 0.8, 0])),
        ("scherk", euclidean(3), BoundaryCurve.from_function(_scherk_trace, 16)),
        ("disk_oval", unit_disk_flat(), BoundaryCurve(np.array([[0.1, 0.0], [0.45, 0.0], [0.0, 0.4],
                                                               [0.0, 0.0], [0.0, 0.03]]))),
        ("poincare_saddle", poincare_ball(3), BoundaryCurve(np.array([[0.0, 0.0, 0.0], [0.3, 0.0, 0.0],
                                                                     [0.0, 0.3, 0.0], [0.0, 0.0, 0.05],
                                                                     [0.0, 0.0, 0.0]]))),
    ]
