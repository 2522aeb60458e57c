"""Closed-form reference values, coded independently of the main package."""
from __future__ import annotations

import math

import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from .symbolic import symbols


def artanh_log(d: float) -> float:
    if not 0 <= d < 1:
        raise ValueError("pseudo-distance must lie in [0, 1)")
    return 0.5 * math.log((1 + d) / (1 - d))


def disk_classical_oracle(z, v=None, w=None) -> float:
    """Unit-disk invariant metric ``|v| / (1 - |z|^2)`` or distance of ``z`` and ``w``.

    Points are ``(x, y)`` pairs; real arithmetic throughout.
    """
    zx, zy = (float(c) for c in z)
    if zx * zx + zy * zy >= 1:
        raise ValueError("point outside the open unit disk")
    if w is None:
        vx, vy = (float(c) for c in v)
        return math.hypot(vx, vy) / (1 - zx * zx - zy * zy)
    wx, wy = (float(c) for c in w)
    if wx * wx + wy * wy >= 1:
        raise ValueError("point outside the open unit disk")
    # |z - w| / |1 - z conj(w)|
    num = math.hypot(zx - wx, zy - wy)
    re = 1 - (zx * wx + zy * wy)
    im = -(zy * wx - zx * wy)
    return artanh_log(num / math.hypot(re, im))


def flat_disk_oracle(p, cap: float, xi=None, q=None) -> float:
    """Best affine-disk value in flat space with disk radius at most ``cap``.

    With ``xi``: ``|xi| / cap``.  With ``q``: the single-disk chain bound
    ``rho(0, |q - p| / cap)``.
    """
    if xi is not None:
        return math.sqrt(sum(float(c) ** 2 for c in xi)) / cap
    dist = math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(p, q)))
    if dist >= cap:
        raise ValueError("points farther apart than the disk radius cap")
    return artanh_log(dist / cap)


def linear_conformality(a11: float, a12: float, a21: float, a22: float) -> float:
    """Conformality defect of the linear map ``(x, y) -> A (x, y)`` in the flat plane."""
    E = a11 * a11 + a21 * a21
    G = a12 * a12 + a22 * a22
    F = a11 * a12 + a21 * a22
    return max(abs(E - G), 2 * abs(F)) / (E + G)


def fd_gradient(source: str, dim: int, point, component: int, step: float) -> float:
    """Central difference of ``source`` (evaluated by sympy in 40 digits) along ``x_component``."""
    xs = symbols(dim)
    e = parse_expr(source, local_dict={str(x): x for x in xs},
                   transformations=standard_transformations + (convert_xor,))
    pt = [sp.Float(repr(float(c)), 40) for c in point]
    h = sp.Float(repr(step), 40)
    up = list(pt)
    dn = list(pt)
    up[component - 1] += h
    dn[component - 1] -= h
    fu = e.subs(dict(zip(xs, up))).evalf(40)
    fd = e.subs(dict(zip(xs, dn))).evalf(40)
    return float((fu - fd) / (2 * h))


def scaled_identity_disk(scale: float, factor_at_zero: float) -> dict:
    """The map ``z -> scale * z`` into a conformally flat chart: harmonic (holomorphic
    between conformal metrics) with ``|du(0) e1|_g = scale * sqrt(factor_at_zero)``."""
    return {"scale": scale, "alpha": scale * math.sqrt(factor_at_zero)}
