"""Brute-force geodesic distance: dense polyline, L-BFGS directions, Armijo steps.

Segment lengths use 5-point Gauss-Legendre quadrature of ``sqrt(d^T G d)``;
the polyline is refined by bisection from 8 segments up to the requested
count, each level warm-started from the previous one, so the value can only
decrease as segments double.
"""
from __future__ import annotations

import numpy as np

from .symbolic import metric_functions

_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
_GL_T = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


class DescentStall(RuntimeError):
    pass


def _eval_metric(funcs, pts):
    g, dG = funcs
    cols = [pts[:, k] for k in range(pts.shape[1])]
    n = pts.shape[1]
    G = np.empty((len(pts), n, n))
    D = np.empty((n, len(pts), n, n))
    Graw = g(*cols)
    for i in range(n):
        for j in range(n):
            G[:, i, j] = np.broadcast_to(Graw[i][j], len(pts))
    for k in range(n):
        raw = dG[k](*cols)
        for i in range(n):
            for j in range(n):
                D[k, :, i, j] = np.broadcast_to(raw[i][j], len(pts))
    return G, D


def length_and_gradient(funcs, verts):
    d = verts[1:] - verts[:-1]
    S, n = d.shape
    total = 0.0
    grad = np.zeros_like(verts)
    for t, w in zip(_GL_T, _GL_W):
        x = verts[:-1] + t * d
        G, D = _eval_metric(funcs, x)
        Gd = np.einsum("sij,sj->si", G, d)
        f = np.sqrt(np.einsum("si,si->s", d, Gd))
        f = np.where(f > 0, f, 1e-300)
        dx = 0.5 * np.einsum("si,ksij,sj->sk", d, D, d) / f[:, None]
        dd = Gd / f[:, None]
        total += w * f.sum()
        grad[:-1] += w * ((1 - t) * dx - dd)
        grad[1:] += w * (t * dx + dd)
    return float(total), grad


def _lbfgs(fun, x, inside, gtol=1e-12, max_iter=20000, memory=10):
    f, g = fun(x)
    S, Y = [], []
    stalls = 0
    for _ in range(max_iter):
        if np.max(np.abs(g)) <= gtol:
            break
        q = g.copy()
        alphas = []
        for s, y in reversed(list(zip(S, Y))):
            a = (s @ q) / (y @ s)
            alphas.append(a)
            q -= a * y
        if S:
            q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
        for (s, y), a in zip(zip(S, Y), reversed(alphas)):
            b = (y @ q) / (y @ s)
            q += s * (a - b)
        p = -q
        if p @ g >= 0:
            p = -g
            S, Y = [], []
        step = 1.0
        while True:
            xn = x + step * p
            if inside(xn):
                fn, gn = fun(xn)
                if fn <= f + 1e-4 * step * (p @ g):
                    break
            step *= 0.5
            if step < 1e-20:
                break
        if step < 1e-20:
            stalls += 1
            if stalls > 2:
                break
            S, Y = [], []
            continue
        s, y = xn - x, gn - g
        if y @ s > 1e-300:
            S.append(s)
            Y.append(y)
            if len(S) > memory:
                S.pop(0)
                Y.pop(0)
        if f - fn <= 1e-16 * abs(f):
            stalls += 1
            if stalls > 5:
                x, f, g = xn, fn, gn
                break
        else:
            stalls = 0
        x, f, g = xn, fn, gn
    return x, f, g


def brute_geodesic(metric, dim: int, p, q, segments: int = 512, inside=None) -> float:
    """Length of the descended dense polyline from ``p`` to ``q``.

    ``metric`` is the list of ``"i j expression"`` lower-triangle entries and
    ``segments`` must be 8 times a power of two.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if segments < 8 or segments & (segments - 1):
        raise ValueError("segments must be a power of two >= 8")
    funcs = metric_functions(metric, dim)
    inside = inside or (lambda x: True)
    if np.array_equal(p, q):
        return 0.0
    t = np.linspace(0.0, 1.0, 9)[:, None]
    verts = p + t * (q - p)
    while True:
        k = len(verts) - 2

        def fun(flat, verts=verts, k=k):
            V = verts.copy()
            V[1:-1] = flat.reshape(k, dim)
            L, g = length_and_gradient(funcs, V)
            return L, g[1:-1].ravel()

        def ok(flat, k=k):
            return inside(flat.reshape(k, dim))

        x, L, g = _lbfgs(fun, verts[1:-1].ravel(), ok)
        if not np.isfinite(L):
            raise DescentStall("polyline descent produced a non-finite length")
        verts = verts.copy()
        verts[1:-1] = x.reshape(k, dim)
        if len(verts) - 1 >= segments:
            return L
        fine = np.empty((2 * len(verts) - 1, dim))
        fine[0::2] = verts
        fine[1::2] = 0.5 * (verts[1:] + verts[:-1])
        verts = fine
