"""Conformal harmonic disks with prescribed center and direction.

For a constant metric the answer is affine.  Otherwise a small round circle
in a g_p-orthonormal frame is spanned (nearly flat regime) and the radius is
continued outward, each step warm-started from the previous reparametrization.
In dimension n >= 3 the circle is shifted and tilted in the normal directions
so that the disk passes through ``p`` tangent to ``xi``.  The disk is finally
recentred by a disk automorphism so that ``u(0) = p`` and ``du(0) e1 = alpha xi_hat``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..manifold import ManifoldSpec, metric_at, orthonormal_frame
from .curve import BoundaryCurve
from .grid import DiskGrid
from .maps import DiskMap
from .plateau import (
    AngleMap,
    ConformalDisk,
    Mobius,
    PlateauError,
    finish_disk,
    locate,
    plateau_solve,
    recenter,
)

SEARCH_M = 16


class SeedError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CenteredDisk:
    """A conformal disk with ``u(0) = p`` and ``du(0) e1 = alpha * xi_hat``.

    The centred map is ``disk.map o gauge``; the gauge is the identity when the
    disk was resampled in the centred parametrization.
    """

    disk: ConformalDisk
    p: np.ndarray
    xi_hat: np.ndarray  # unit in g_p
    alpha: float
    center_misfit: float
    angle_error: float
    radius: float = float("nan")
    gauge: Mobius = field(default_factory=Mobius)

    def jet(self, z):
        """``(u(z), du(z))`` of the centred map, shapes ``(k, n)`` and ``(k, n, 2)``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.gauge.is_identity:
            return self.disk.map.jet(z)
        g = self.gauge
        e = np.exp(1j * g.beta)
        w = g(z)
        dw = e * (1 - abs(g.a) ** 2) / (1 + np.conj(g.a) * e * z) ** 2
        U, J = self.disk.map.jet(w)
        c1 = np.stack([dw.real, dw.imag], axis=-1)  # d/dx
        c2 = np.stack([-dw.imag, dw.real], axis=-1)  # d/dy
        return U, np.stack([np.einsum("kij,kj->ki", J, c1), np.einsum("kij,kj->ki", J, c2)], axis=-1)

    @property
    def center_jet(self):
        if self.gauge.is_identity:
            return self.disk.center_jet
        U, J = self.jet(0j)
        return U[0], J[0, :, 0], J[0, :, 1]


def chart_radius(spec: ManifoldSpec, p, e1, e2, samples: int = 1024) -> float:
    """Largest ``t`` with ``p + t (cos s e1 + sin s e2)`` inside the chart margin."""
    p = np.asarray(p, dtype=float)
    s = 2 * np.pi * np.arange(samples) / samples
    V = np.outer(np.cos(s), e1) + np.outer(np.sin(s), e2)
    ch = spec.chart
    mlen = ch.margin_length()
    if ch.kind == "ball":
        c = p - np.asarray(ch.center)
        R = ch.radius - mlen
        b = V @ c
        vv = np.einsum("ij,ij->i", V, V)
        disc = b * b - vv * (c @ c - R * R)
        t = (-b + np.sqrt(np.maximum(disc, 0.0))) / vv
    else:
        lo = np.asarray(ch.lower) + mlen
        hi = np.asarray(ch.upper) - mlen
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.where(V > 0, (hi - p) / V, np.inf)
            dn = np.where(V < 0, (lo - p) / V, np.inf)
        t = np.min(np.minimum(up, dn), axis=1)
    return float(max(np.min(t) * (1 - 1e-4), 0.0))


def affine_disk(spec: ManifoldSpec, p, e1, e2, radius: float, grid: DiskGrid, tol: float = 1e-12) -> ConformalDisk:
    p = np.asarray(p, dtype=float)
    x, y = grid.xy.T
    vals = p + radius * (np.outer(x, e1) + np.outer(y, e2))
    curve = BoundaryCurve.circle(p, e1, e2, radius)
    return finish_disk(spec, DiskMap(grid, vals), curve, AngleMap(np.zeros(1)), tol)


def seed_disk(
    spec: ManifoldSpec,
    p,
    xi,
    radius: float,
    tol: float = 1e-6,
    grid: DiskGrid | None = None,
    strict: bool = True,
    min_step: float = 1e-3,
) -> CenteredDisk:
    """Conformal harmonic disk of (frame) radius ``radius`` centred at ``p`` along ``xi``."""
    p = np.asarray(p, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != p.shape or not np.any(xi != 0):
        raise ValueError("seed_disk needs a nonzero direction of matching dimension")
    if not np.all(spec.chart.contains(p[None])):
        raise ValueError("base point outside the chart")
    if not radius > 0:
        raise ValueError("radius must be positive")
    grid = grid or DiskGrid(64)
    frame = orthonormal_frame(spec, p, xi)
    e1, e2 = frame[0], frame[1]
    normals = frame[2:]
    cap = chart_radius(spec, p, e1, e2)
    if radius > cap:
        raise SeedError(f"radius {radius:g} exceeds the chart-admissible radius {cap:g}")

    if spec.is_flat_constant:
        disk = affine_disk(spec, p, e1, e2, radius, grid)
        return CenteredDisk(disk, p, e1, float(radius), 0.0, 0.0, float(radius))

    coarse = DiskGrid(min(SEARCH_M, grid.m))
    t = min(radius, 0.05 * spec.chart.scale)
    step = t
    state = _solve_at(spec, p, frame, t, coarse, tol, None)
    if state is None:
        raise SeedError("could not span the initial small circle")
    while t < radius:
        t_next = min(radius, t + step)
        nxt = _solve_at(spec, p, frame, t_next, coarse, tol, state)
        if nxt is None:
            step *= 0.5
            if step < min_step * radius:
                raise SeedError(f"continuation failed at radius {t:g}")
            continue
        state, t = nxt, t_next
        step *= 2
    disk = plateau_solve(spec, state["curve"], grid, tol, initial=state["psi"], strict=False)
    try:
        centred, info = recenter(spec, disk, p, e1)
    except PlateauError as exc:
        raise SeedError(str(exc)) from exc
    if strict and (info["center_misfit"] > tol or info["angle_error"] > tol
                   or centred.conformality_residual > tol or centred.harmonic_residual > tol):
        raise SeedError(
            "seed disk missed tolerance: "
            f"center {info['center_misfit']:.1e} angle {info['angle_error']:.1e} "
            f"conformality {centred.conformality_residual:.1e} harmonic {centred.harmonic_residual:.1e}"
        )
    return CenteredDisk(centred, p, e1, info["alpha"], info["center_misfit"], info["angle_error"], float(radius))


def _circle(p, frame, t, shift, tilt):
    e1, e2, normals = frame[0], frame[1], frame[2:]
    center = p + (shift @ normals if len(normals) else 0.0)
    a = e1 + (tilt @ normals if len(normals) else 0.0)
    return BoundaryCurve.circle(center, a / np.linalg.norm(a) * np.linalg.norm(e1), e2, t)


def _solve_at(spec, p, frame, t, grid, tol, prev):
    """Plateau solve for the (shifted, tilted) circle of radius ``t``; Newton on
    the normal offsets when ``n > 2``.  Returns a state dict or ``None``."""
    k = len(frame) - 2
    shift = np.zeros(k) if prev is None else prev["shift"] * t / prev["t"]
    tilt = np.zeros(k) if prev is None else prev["tilt"].copy()
    psi = None if prev is None else prev["psi"]

    def solve(sh, ti):
        curve = _circle(p, frame, t, sh, ti)
        if not curve.inside(spec):
            return None
        try:
            disk = plateau_solve(spec, curve, grid, max(tol, 1e-8), initial=psi, strict=False)
        except PlateauError:
            return None
        if disk.conformality_residual > 1e-2 or not disk.immersion:
            return None
        return curve, disk

    out = solve(shift, tilt)
    if out is None:
        return None
    if k:
        G = metric_at(spec, p)
        normals = frame[2:]

        def defect(res):
            curve, disk = res
            a, mis = locate(spec, disk.map, p, tol=1e-12)
            if a is None:
                return None
            u = disk.map(np.array([a]))[0]
            J = disk.map.differential(np.array([a]))[0]
            # component of xi_hat outside span(du(a)), measured in g_p
            coef = np.linalg.lstsq(J, frame[0], rcond=None)[0]
            resid = frame[0] - J @ coef
            return np.concatenate([normals @ G @ (p - u), normals @ G @ resid])

        x = np.concatenate([shift, tilt])
        r = defect(out)
        if r is None:
            return None
        for _ in range(12):
            if np.max(np.abs(r)) <= 0.1 * tol * max(t, 1e-300):
                break
            h = 1e-6 * max(t, 1e-3)
            Jm = np.zeros((2 * k, 2 * k))
            for j in range(2 * k):
                xp = x.copy()
                xp[j] += h
                res = solve(xp[:k], xp[k:])
                rp = None if res is None else defect(res)
                if rp is None:
                    return None
                Jm[:, j] = (rp - r) / h
            dx = np.linalg.lstsq(Jm, -r, rcond=None)[0]
            lam = 1.0
            for _ in range(10):
                xn = x + lam * dx
                res = solve(xn[:k], xn[k:])
                rn = None if res is None else defect(res)
                if rn is not None and np.max(np.abs(rn)) < np.max(np.abs(r)):
                    break
                lam *= 0.5
            else:
                return None
            x, r, out = xn, rn, res
        shift, tilt = x[:k], x[k:]
    curve, disk = out
    return {"t": t, "shift": shift, "tilt": tilt, "psi": disk.angle_map.psi, "curve": curve, "disk": disk}
