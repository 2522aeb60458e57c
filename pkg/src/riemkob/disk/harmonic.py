"""Dirichlet problem for harmonic maps of the disk into a chart.

The tension field in chart coordinates is

    tau(u)^i = Lap u^i + Gam^i_jk(u) (u_x^j u_x^k + u_y^j u_y^k)

and is driven to zero at interior nodes by damped Newton-Krylov iteration
(the Poisson inverse serves as right preconditioner), with a Picard iteration
as fallback.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from ..manifold import ChartDomainError, ManifoldSpec, christoffel_jet, metric_jet
from .grid import DiskGrid
from .maps import DiskMap

MAX_HALVINGS = 20


class HarmonicSolveError(RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass
class HarmonicResult:
    map: DiskMap
    residual: float
    iterations: int
    method: str


def poisson_solve(grid: DiskGrid, rhs, boundary) -> np.ndarray:
    """``Lap u = rhs`` inside, ``u = boundary`` on the rim (rim values or full node array)."""
    rhs = np.asarray(rhs, dtype=float)
    boundary = np.asarray(boundary, dtype=float)
    if boundary.shape[0] == grid.size:
        boundary = boundary[grid.rim]
    if not np.all(np.isfinite(rhs)) or not np.all(np.isfinite(boundary)):
        raise ValueError("poisson_solve: non-finite data")
    return grid.poisson(rhs, boundary)


def tension(spec: ManifoldSpec, grid: DiskGrid, values: np.ndarray, d: dict | None = None):
    """Tension field at every node (rim entries are meaningless)."""
    d = d or grid.derivatives(values)
    lap = d["xx"] + d["yy"]
    if spec.is_flat_constant:
        return lap
    Gam = christoffel_jet(spec, values, 1)
    ux, uy = d["x"], d["y"]
    Q = ux[:, :, None] * ux[:, None, :] + uy[:, :, None] * uy[:, None, :]
    return lap + np.einsum("pijk,pjk->pi", Gam, Q, optimize=True)


def harmonic_residual(spec: ManifoldSpec, d: DiskMap) -> float:
    t = tension(spec, d.grid, d.values, d.d)
    return float(np.max(np.abs(t[d.grid.interior]))) if t.size else 0.0


def normal_residual(spec: ManifoldSpec, d: DiskMap) -> float:
    """Max-norm of the tension projected g-orthogonally off ``span(u_x, u_y)``."""
    t = tension(spec, d.grid, d.values, d.d)
    G = metric_jet(spec, d.values)[0]
    T = np.stack([d.ux, d.uy], axis=-1)  # (P, n, 2)
    gram = np.einsum("pia,pij,pjb->pab", T, G, T)
    rhs = np.einsum("pia,pij,pj->pa", T, G, t)
    ok = np.linalg.det(gram) > 1e-300
    coef = np.zeros_like(rhs)
    coef[ok] = np.linalg.solve(gram[ok], rhs[ok][..., None])[..., 0]
    normal = t - np.einsum("pia,pa->pi", T, coef)
    return float(np.max(np.abs(normal[d.grid.interior & ok])))


def _check_chart(spec, values):
    inside = spec.chart.contains(values)
    if not np.all(inside):
        raise ChartDomainError(f"harmonic iterate left the chart at {int(np.sum(~inside))} nodes")


def harmonic_extension(
    spec: ManifoldSpec,
    boundary,
    grid: DiskGrid,
    tol: float = 1e-10,
    initial: np.ndarray | None = None,
    max_newton: int = 30,
    max_picard: int = 200,
) -> HarmonicResult:
    """Harmonic map ``D -> chart`` with prescribed rim values.

    ``boundary`` is either an ``(N, n)`` array of rim values or a callable
    ``theta -> (len(theta), n)`` such as a :class:`BoundaryCurve`.
    """
    bnd = boundary(grid.angles) if callable(boundary) else np.asarray(boundary, dtype=float)
    if bnd.ndim != 2 or bnd.shape[0] != grid.N:
        raise ValueError("boundary must give (N, n) rim values")
    _check_chart(spec, bnd)
    n = bnd.shape[1]
    zero = np.zeros((grid.size, n))
    if spec.is_flat_constant:
        u = poisson_solve(grid, zero, bnd)
        return HarmonicResult(DiskMap(grid, u), harmonic_residual(spec, DiskMap(grid, u)), 0, "linear")
    if initial is None:
        u = poisson_solve(grid, zero, bnd)
    else:
        u = np.array(initial, dtype=float)
        u[grid.rim] = bnd
    _check_chart(spec, u)
    try:
        return _newton(spec, grid, u, tol, max_newton)
    except (HarmonicSolveError, ChartDomainError, FloatingPointError, np.linalg.LinAlgError):
        pass
    return _picard(spec, grid, u, tol, max_picard)


def _matvec(A, v):
    return (A @ v[:, :, None])[:, :, 0]


def _res_norm(r, mask):
    return float(np.max(np.abs(r[mask])))


def _newton(spec, grid, u, tol, max_iter):
    mask = grid.interior
    n = u.shape[1]
    nint = int(mask.sum())
    zero_bnd = np.zeros((grid.N, n))

    def residual(v):
        return tension(spec, grid, v)

    r = residual(u)
    rn = _res_norm(r, mask)
    for it in range(max_iter):
        if rn <= tol:
            return HarmonicResult(DiskMap(grid, u), rn, it, "newton")
        d = grid.derivatives(u)
        ux, uy = d["x"], d["y"]
        Gam, dGam = christoffel_jet(spec, u, 2)
        Q = np.einsum("pj,pk->pjk", ux, ux) + np.einsum("pj,pk->pjk", uy, uy)
        A0 = np.einsum("pmijk,pjk->pim", dGam, Q, optimize=True)
        Bx = 2 * np.einsum("pijk,pj->pik", Gam, ux, optimize=True)
        By = 2 * np.einsum("pijk,pj->pik", Gam, uy, optimize=True)

        def apply(w):
            W = np.zeros((grid.size, n))
            W[mask] = w.reshape(nint, n)
            delta = grid.poisson(W, zero_bnd, refine=0)
            dd = grid.derivatives(delta)
            out = W + _matvec(A0, delta) + _matvec(Bx, dd["x"]) + _matvec(By, dd["y"])
            return out[mask].ravel()

        op = LinearOperator((nint * n, nint * n), matvec=apply, dtype=float)
        b = -r[mask].ravel()
        w, info = gmres(op, b, rtol=1e-8, atol=0.1 * tol, restart=60, maxiter=20)
        W = np.zeros((grid.size, n))
        W[mask] = w.reshape(nint, n)
        delta = grid.poisson(W, zero_bnd)
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u + lam * delta
            if np.all(spec.chart.contains(trial)):
                rt = residual(trial)
                rtn = _res_norm(rt, mask)
                if np.isfinite(rtn) and rtn < rn:
                    break
            lam *= 0.5
        else:
            raise HarmonicSolveError("Newton damping exhausted", rn)
        u, r, rn = trial, rt, rtn
    if rn <= tol:
        return HarmonicResult(DiskMap(grid, u), rn, max_iter, "newton")
    raise HarmonicSolveError(f"Newton did not converge, residual {rn:.3e}", rn)


def _picard(spec, grid, u, tol, max_iter):
    mask = grid.interior
    bnd = u[grid.rim]
    rn = float("inf")
    for it in range(max_iter):
        d = grid.derivatives(u)
        lap = d["xx"] + d["yy"]
        t = tension(spec, grid, u, d)
        rn = _res_norm(t, mask)
        if rn <= tol:
            return HarmonicResult(DiskMap(grid, u), rn, it, "picard")
        u = grid.poisson(lap - t, bnd)
        if not np.all(np.isfinite(u)):
            break
        _check_chart(spec, u)
    raise HarmonicSolveError(f"harmonic solve did not converge, residual {rn:.3e}", rn)
