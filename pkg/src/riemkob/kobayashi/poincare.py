"""Closed-form invariant metric and distance of the unit disk."""
from __future__ import annotations

import numpy as np


def _as_complex(z) -> complex:
    if isinstance(z, (tuple, list, np.ndarray)):
        z = np.asarray(z, dtype=float)
        return complex(z[0], z[1])
    return complex(z)


def poincare_metric(z, v) -> float:
    """``|v| / (1 - |z|^2)``; ``z`` and ``v`` are complex numbers or 2-vectors."""
    z, v = _as_complex(z), _as_complex(v)
    s = 1.0 - abs(z) ** 2
    if not s > 0:
        raise ValueError("poincare_metric: base point must lie in the open unit disk")
    return abs(v) / s


def pseudo_hyperbolic(z, w) -> float:
    z, w = _as_complex(z), _as_complex(w)
    if not (abs(z) < 1 and abs(w) < 1):
        raise ValueError("poincare_distance: points must lie in the open unit disk")
    return abs(z - w) / abs(1 - z * w.conjugate())


def poincare_distance(z, w) -> float:
    """``(1/2) log((1 + d) / (1 - d))`` with ``d`` the pseudo-hyperbolic distance."""
    return float(np.arctanh(pseudo_hyperbolic(z, w)))


def geodesic_points(z, w, count: int):
    """Points ``zeta(t_i)`` and velocities of the constant-speed hyperbolic
    geodesic from ``z`` (t = 0) to ``w`` (t = 1), at ``t_i = (i + 1/2) / count``.
    """
    z, w = _as_complex(z), _as_complex(w)
    # move z to 0: phi(x) = (x - z) / (1 - conj(z) x); geodesic from 0 is radial
    wt = (w - z) / (1 - z.conjugate() * w)
    rho = float(np.arctanh(abs(wt)))
    direction = wt / abs(wt) if wt != 0 else 1.0
    t = (np.arange(count) + 0.5) / count
    s = np.tanh(rho * t)
    ds = rho * (1 - s**2)
    x = direction * s
    dx = direction * ds
    # back: psi(x) = (x + z) / (1 + conj(z) x), psi'(x) = (1 - |z|^2) / (1 + conj(z) x)^2
    den = 1 + z.conjugate() * x
    zeta = (x + z) / den
    dzeta = (1 - abs(z) ** 2) / den**2 * dx
    return zeta, dzeta, rho
