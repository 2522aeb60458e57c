"""Metric tensors rebuilt with sympy from the raw ``"i j expression"`` entries.

Deliberately independent of :mod:`riemkob.expr`: a different parser and a
different evaluator (sympy + lambdify).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

_TRANSFORMS = standard_transformations + (convert_xor,)


def symbols(dim: int):
    return sp.symbols(" ".join(f"x{i + 1}" for i in range(dim)), real=True, seq=True)


def _entries(metric) -> tuple:
    out = []
    for raw in metric:
        i, j, src = str(raw).split(None, 2)
        out.append((int(i), int(j), src))
    return tuple(sorted(out))


@lru_cache(maxsize=32)
def _matrix(entries: tuple, dim: int):
    xs = symbols(dim)
    local = {str(x): x for x in xs}
    G = sp.zeros(dim, dim)
    for i, j, src in entries:
        e = parse_expr(src, local_dict=local, transformations=_TRANSFORMS)
        G[i - 1, j - 1] = e
        G[j - 1, i - 1] = e
    return xs, G


def metric_matrix(metric, dim: int):
    """``(symbols, sympy Matrix)`` for the entry list ``metric``."""
    return _matrix(_entries(metric), dim)


@lru_cache(maxsize=32)
def _numeric(entries: tuple, dim: int):
    xs, G = _matrix(entries, dim)

    def entrywise(M):
        fs = [[sp.lambdify(xs, M[i, j], "numpy") for j in range(dim)] for i in range(dim)]
        return lambda *x: [[f(*x) for f in row] for row in fs]

    return entrywise(G), [entrywise(G.diff(x)) for x in xs]


def metric_functions(metric, dim: int):
    """Numeric callables ``G(*x)`` and ``[dG/dx_k(*x)]`` (each returns a nested list)."""
    return _numeric(_entries(metric), dim)


def christoffel(metric, dim: int, point):
    """Levi-Civita symbols ``Gamma[i][j][k]`` evaluated exactly at ``point``."""
    xs, G = metric_matrix(metric, dim)
    sub = dict(zip(xs, [sp.nsimplify(v) for v in point]))
    Ginv = G.subs(sub).inv()
    dG = [G.diff(x).subs(sub) for x in xs]
    out = np.zeros((dim, dim, dim))
    for i in range(dim):
        for j in range(dim):
            for k in range(dim):
                s = 0
                for l in range(dim):
                    s += Ginv[i, l] * (dG[k][l, j] + dG[j][l, k] - dG[l][j, k]) / 2
                out[i, j, k] = float(sp.nsimplify(s))
    return out


def metric_value(metric, dim: int, point):
    xs, G = metric_matrix(metric, dim)
    sub = dict(zip(xs, [sp.nsimplify(v) for v in point]))
    return np.array(G.subs(sub).evalf(30).tolist(), dtype=float)
