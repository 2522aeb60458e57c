"""Conformal harmonic disks spanning a boundary curve.

Conformality is obtained by reparametrizing the boundary: among harmonic
extensions of ``gamma o Phi`` the energy-critical angle map ``Phi`` yields a
conformal map.  ``Phi(t) = t + psi(t)`` with ``psi`` a trigonometric series
without constant and first harmonic (or, optionally, vanishing at three fixed
angles); either choice removes the Moebius gauge.  The discrete conformality
defect ``(E - G, 2F) / (E + G)`` is driven to zero in
the least-squares sense over the coefficients of ``psi``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import least_squares

from ..manifold import ManifoldSpec, metric_jet
from .curve import BoundaryCurve
from .grid import DiskGrid
from .harmonic import HarmonicSolveError, harmonic_extension, harmonic_residual, normal_residual
from .maps import DiskMap, area, conformality_residual, energy, first_fundamental_form, immersion_report

FIXED_ANGLES = (0.0, 2 * np.pi / 3, 4 * np.pi / 3)
COARSE_M = 16


class PlateauError(RuntimeError):
    def __init__(self, message, disk=None):
        super().__init__(message)
        self.disk = disk


# ----------------------------------------------------------- Moebius gauge


@dataclass(frozen=True)
class Mobius:
    """Disk automorphism ``z -> (e^{i beta} z + a) / (1 + conj(a) e^{i beta} z)``."""

    a: complex = 0j
    beta: float = 0.0

    def __post_init__(self):
        if abs(self.a) >= 1:
            raise ValueError("Moebius centre must lie in the open disk")

    def __call__(self, z):
        w = np.exp(1j * self.beta) * np.asarray(z)
        return (w + self.a) / (1 + np.conj(self.a) * w)

    def matrix(self):
        e = np.exp(1j * self.beta)
        return np.array([[e, self.a], [np.conj(self.a) * e, 1.0]])

    @classmethod
    def from_matrix(cls, M) -> "Mobius":
        A, B, _, D = M.ravel() / M[1, 1]
        return cls(complex(B), float(np.angle(A)))

    def compose(self, inner: "Mobius") -> "Mobius":
        """``self o inner``."""
        return Mobius.from_matrix(self.matrix() @ inner.matrix())

    @property
    def is_identity(self) -> bool:
        return self.a == 0 and self.beta == 0.0


@dataclass(frozen=True, eq=False)
class AngleMap:
    """Boundary reparametrization ``t -> psi-map(arg mobius(e^{it}))``."""

    psi: np.ndarray = field(default_factory=lambda: np.zeros(1))
    mobius: Mobius = Mobius()

    def __post_init__(self):
        object.__setattr__(self, "psi", np.asarray(self.psi, dtype=float))

    @property
    def modes(self) -> int:
        return (len(self.psi) - 1) // 2

    def _psi(self, s, deriv=0):
        k = np.arange(1, self.modes + 1)
        ks = np.outer(s, k)
        a, b = self.psi[1::2], self.psi[2::2]
        if deriv == 0:
            return self.psi[0] + np.cos(ks) @ a + np.sin(ks) @ b
        return -np.sin(ks) @ (k * a) + np.cos(ks) @ (k * b)

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = t if self.mobius.is_identity else np.angle(self.mobius(np.exp(1j * t)))
        return s + self._psi(s)

    def min_slope(self, count: int = 512) -> float:
        s = 2 * np.pi * np.arange(count) / count
        return float(np.min(1 + self._psi(s, 1)))

    def composed(self, inner: Mobius) -> "AngleMap":
        return AngleMap(self.psi, self.mobius.compose(inner))


def _psi_basis(modes: int, gauge: str = "modes") -> np.ndarray:
    """Columns span the admissible ``psi`` coefficient vectors.

    ``gauge="modes"`` removes the constant and first harmonic of ``psi``;
    ``gauge="points"`` makes ``psi`` vanish at three fixed angles.
    """
    if gauge == "modes":
        B = np.zeros((2 * modes + 1, 2 * modes - 2))
        B[3:, :] = np.eye(2 * modes - 2)
        return B
    t = np.asarray(FIXED_ANGLES)
    C = np.zeros((3, 2 * modes + 1))
    C[:, 0] = 1.0
    for k in range(1, modes + 1):
        C[:, 2 * k - 1] = np.cos(k * t)
        C[:, 2 * k] = np.sin(k * t)
    return null_space(C)


_psi_basis = lru_cache(maxsize=32)(_psi_basis)


# ------------------------------------------------------------ disk record


@dataclass(frozen=True, eq=False)
class ConformalDisk:
    map: DiskMap
    curve: BoundaryCurve
    angle_map: AngleMap
    conformality_residual: float
    harmonic_residual: float
    normal_residual: float
    energy: float
    area: float
    immersion: bool
    immersion_ratio: float
    tol: float

    @property
    def grid(self) -> DiskGrid:
        return self.map.grid

    @property
    def center_jet(self):
        return self.map.center_jet()

    def residuals(self) -> dict:
        return {
            "conformality_residual": self.conformality_residual,
            "harmonic_residual": self.harmonic_residual,
            "normal_residual": self.normal_residual,
            "energy": self.energy,
            "area": self.area,
        }


def finish_disk(spec: ManifoldSpec, d: DiskMap, curve, angle_map, tol) -> ConformalDisk:
    """Evaluate every diagnostic of a solved disk."""
    imm, ratio = immersion_report(spec, d)
    try:
        A = area(spec, d, check=False)
    except ValueError:
        A = float("nan")
    return ConformalDisk(
        map=d,
        curve=curve,
        angle_map=angle_map,
        conformality_residual=conformality_residual(spec, d),
        harmonic_residual=harmonic_residual(spec, d),
        normal_residual=normal_residual(spec, d),
        energy=energy(spec, d),
        area=A,
        immersion=imm,
        immersion_ratio=ratio,
        tol=tol,
    )


def default_modes(grid: DiskGrid) -> int:
    return min(48, max(4, grid.N // 5))


def extend(spec, curve, angle_map, grid, tol, initial=None):
    """Harmonic extension of ``curve o angle_map``."""
    rim = curve(angle_map(grid.angles))
    return harmonic_extension(spec, rim, grid, tol=min(tol, 1e-9), initial=initial).map


def _conformality_vector(spec, d: DiskMap):
    """Weighted ``((E - G), 2F) / (E + G)`` over all nodes, for least squares."""
    E, F, G = first_fundamental_form(spec, d)
    tr = E + G
    tr = np.where(tr > 0, tr, 1.0)
    w = np.sqrt(d.grid.weights + 1e-3 / d.grid.size)
    return np.concatenate([(E - G) / tr * w, 2 * F / tr * w])


def _linearized_jacobian(spec, curve, basis, q, grid, d: DiskMap | None = None):
    """Jacobian of :func:`_conformality_vector` with the boundary variation
    extended harmonically in the flat sense.

    Exact for a constant metric.  Otherwise ``d`` is the solved map and the
    Christoffel part of the linearized extension is dropped, which gives a
    quasi-Newton matrix that is accurate for small disks.
    """
    psi = basis @ q
    amap = AngleMap(psi)
    t = grid.angles
    phi = amap(t)
    k = np.arange(1, amap.modes + 1)
    trig = np.zeros((len(t), len(psi)))
    trig[:, 0] = 1.0
    trig[:, 1::2], trig[:, 2::2] = np.cos(np.outer(t, k)), np.sin(np.outer(t, k))
    dpsi = trig @ basis  # (N, nq)
    tang = curve.derivative(phi)  # (N, n)
    n, nq = tang.shape[1], dpsi.shape[1]
    dbnd = (tang[:, :, None] * dpsi[:, None, :]).reshape(grid.N, n * nq)
    du = grid.poisson(np.zeros((grid.size, n * nq)), dbnd, refine=0)
    dd = grid.derivatives(du, second=False)
    dux = dd["x"].reshape(grid.size, n, nq)
    duy = dd["y"].reshape(grid.size, n, nq)
    if d is None:
        d = DiskMap(grid, grid.poisson(np.zeros((grid.size, n)), curve(phi)))
    if spec.is_flat_constant:
        Gm = np.broadcast_to(metric_jet(spec, d.values[:1])[0][0], (grid.size, n, n))
        dGm = None
    else:
        Gm, dGm = metric_jet(spec, d.values)
    gx = np.einsum("pi,pij->pj", d.ux, Gm)
    gy = np.einsum("pi,pij->pj", d.uy, Gm)
    E = np.einsum("pi,pi->p", gx, d.ux)
    F = np.einsum("pi,pi->p", gx, d.uy)
    Gg = np.einsum("pi,pi->p", gy, d.uy)
    dE = 2 * np.einsum("pi,piq->pq", gx, dux)
    dG = 2 * np.einsum("pi,piq->pq", gy, duy)
    dF = np.einsum("pi,piq->pq", gx, duy) + np.einsum("pi,piq->pq", gy, dux)
    if dGm is not None:
        dU = du.reshape(grid.size, n, nq)
        dE += np.einsum("pkq,pkij,pi,pj->pq", dU, dGm, d.ux, d.ux, optimize=True)
        dF += np.einsum("pkq,pkij,pi,pj->pq", dU, dGm, d.ux, d.uy, optimize=True)
        dG += np.einsum("pkq,pkij,pi,pj->pq", dU, dGm, d.uy, d.uy, optimize=True)
    tr = np.where(E + Gg > 0, E + Gg, 1.0)[:, None]
    w = np.sqrt(grid.weights + 1e-3 / grid.size)[:, None]
    dtr = dE + dG
    j1 = w * ((dE - dG) * tr - (E - Gg)[:, None] * dtr) / tr**2
    j2 = w * (2 * dF * tr - 2 * F[:, None] * dtr) / tr**2
    return np.concatenate([j1, j2], axis=0)


def _quasi_newton(spec, curve, basis, q, grid, resid, last, tol, max_iter):
    """Levenberg-Marquardt steps with the linearized Jacobian (curved metrics).

    A finite-difference Jacobian costs one nonlinear solve per coefficient;
    the linearized one costs a batch of Poisson solves.
    """
    r = resid(q)
    cost = r @ r
    mu = 1e-6
    for _ in range(max_iter):
        if grid.m not in last:
            break
        J = _linearized_jacobian(spec, curve, basis, q, grid, DiskMap(grid, last[grid.m]))
        JtJ, Jtr = J.T @ J, J.T @ r
        scale = np.max(np.diag(JtJ))
        accepted = False
        while mu < 1e8:
            step = np.linalg.solve(JtJ + mu * scale * np.eye(len(q)), -Jtr)
            saved = last.get(grid.m)
            r_new = resid(q + step)
            if r_new @ r_new < cost:
                q, r, cost = q + step, r_new, r_new @ r_new
                mu = max(mu / 10, 1e-12)
                accepted = True
                break
            last[grid.m] = saved
            mu *= 10
        if not accepted or np.max(np.abs(step)) < 1e-14:
            break
    resid(q)  # leave the cached map at the accepted point
    return q


def plateau_solve(
    spec: ManifoldSpec,
    curve: BoundaryCurve,
    grid: DiskGrid,
    tol: float = 1e-6,
    modes: int | None = None,
    initial: np.ndarray | None = None,
    strict: bool = True,
    max_iter: int = 12,
    gauge: str = "modes",
) -> ConformalDisk:
    """Conformal harmonic disk bounded by ``curve``.

    ``initial`` optionally gives full ``psi`` coefficients (for example from a
    previous continuation step).  With ``strict`` a :class:`PlateauError` is
    raised when the declared tolerances are not met; otherwise the disk is
    returned with its residuals for the caller to judge.
    """
    if not curve.inside(spec):
        raise PlateauError("boundary curve leaves the chart margin")
    if curve.self_intersects(128):
        warnings.warn("boundary curve self-intersects at sampled angles", RuntimeWarning, stacklevel=2)
    K = modes or default_modes(grid)
    psi = np.zeros(2 * K + 1)
    if initial is not None:
        k = min(len(initial), 2 * K + 1)
        psi[:k] = np.asarray(initial)[:k]

    levels = [grid]
    if grid.m > COARSE_M and initial is None:
        levels = [DiskGrid(COARSE_M), grid]
    last = {}
    for g in levels:
        Kg = min(K, default_modes(g)) if g is not grid else K
        basis = _psi_basis(Kg, gauge)
        full = np.zeros(2 * Kg + 1)
        full[: min(len(psi), 2 * Kg + 1)] = psi[: 2 * Kg + 1]
        q = basis.T @ full

        def resid(qv, g=g, basis=basis):
            amap = AngleMap(basis @ qv)
            if amap.min_slope(256) <= 0.05:
                return np.full(2 * g.size, 1e3)
            try:
                d = extend(spec, curve, amap, g, tol, last.get(g.m))
            except (HarmonicSolveError, ValueError):
                return np.full(2 * g.size, 1e3)
            last[g.m] = d.values
            return _conformality_vector(spec, d)

        r0 = resid(q)
        if np.max(np.abs(r0)) > 0.1 * tol:
            if spec.is_flat_constant:
                jac = lambda qv, g=g, basis=basis: _linearized_jacobian(spec, curve, basis, qv, g)
                nfev = 4 * max_iter
                sol = least_squares(resid, q, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                    max_nfev=nfev)
                q = sol.x
            else:
                q = _quasi_newton(spec, curve, basis, q, g, resid, last, tol, 4 * max_iter)
        psi = np.zeros(2 * K + 1)
        psi[: 2 * Kg + 1] = basis @ q
    amap = AngleMap(psi)
    if amap.min_slope() <= 0:
        raise PlateauError("boundary reparametrization lost monotonicity")
    d = extend(spec, curve, amap, grid, tol, last.get(grid.m))
    disk = finish_disk(spec, d, curve, amap, tol)
    if strict and not (disk.conformality_residual <= tol and disk.harmonic_residual <= tol):
        raise PlateauError(
            f"plateau solve missed tolerance: conformality {disk.conformality_residual:.2e}, "
            f"harmonic {disk.harmonic_residual:.2e}",
            disk,
        )
    return disk


def regauge(spec: ManifoldSpec, disk: ConformalDisk, mob: Mobius, grid: DiskGrid | None = None) -> ConformalDisk:
    """The disk ``u o mob`` re-solved from its boundary values."""
    grid = grid or disk.grid
    if mob.a == 0 and mob.beta == 0.0 and grid == disk.grid:
        return disk
    amap = disk.angle_map.composed(mob)
    d = extend(spec, disk.curve, amap, grid, disk.tol)
    return finish_disk(spec, d, disk.curve, amap, disk.tol)


# ------------------------------------------------------- point location


def locate(spec: ManifoldSpec, d: DiskMap, p, tol: float = 1e-11, rim_guard: float = 0.98):
    """Find ``a`` in the disk with ``u(a) = p`` (least squares when ``n > 2``).

    Returns ``(a, misfit)`` with ``misfit = |u(a) - p|`` in coordinates for the
    best iterate inside ``|a| < rim_guard``; a large misfit means ``p`` is not
    covered there.
    """
    p = np.asarray(p, dtype=float)
    grid = d.grid
    inner = np.abs(grid.z) < rim_guard
    dist = np.linalg.norm(d.values - p, axis=1)
    dist[~inner] = np.inf
    a = complex(grid.z[int(np.argmin(dist))])
    best = (None, np.inf)
    for _ in range(30):
        U, Js = d.jet(np.array([a]))
        val = U[0] - p
        mis = float(np.linalg.norm(val))
        if mis < best[1]:
            best = (a, mis)
        if mis <= tol:
            break
        step = np.linalg.lstsq(Js[0], -val, rcond=None)[0]
        a_new = a + complex(step[0], step[1])
        shrink = 0
        while abs(a_new) >= rim_guard and shrink < 30:
            step *= 0.5
            a_new = a + complex(step[0], step[1])
            shrink += 1
        if abs(a_new) >= rim_guard:
            break
        if abs(a_new - a) < 1e-15:
            a = a_new
            break
        a = a_new
    return best


def tangent_preimage(d: DiskMap, a: complex, xi):
    """Planar ``eta`` with ``du(a) eta = xi`` (least squares) and the relative misfit."""
    J = d.differential(np.array([a]))[0]
    xi = np.asarray(xi, dtype=float)
    eta = np.linalg.lstsq(J, xi, rcond=None)[0]
    mis = float(np.linalg.norm(J @ eta - xi) / max(np.linalg.norm(xi), 1e-300))
    return complex(eta[0], eta[1]), mis


def centering_mobius(a: complex, eta: complex) -> Mobius:
    """Automorphism ``m`` with ``m(0) = a`` and ``m'(0)`` parallel to ``eta``."""
    return Mobius(a, float(np.angle(eta)) if eta != 0 else 0.0)


def recenter(spec: ManifoldSpec, disk: ConformalDisk, p, xi, grid: DiskGrid | None = None,
             tol: float = 1e-10, rounds: int = 4):
    """Regauge ``disk`` so that ``u(0) = p`` and ``du(0) e1`` is a positive multiple of ``xi``.

    Returns ``(new_disk, info)``; ``info`` holds the center misfit and the
    angular error of the direction condition.
    """
    p = np.asarray(p, dtype=float)
    xi = np.asarray(xi, dtype=float)
    cur = disk
    if grid is not None and grid != disk.grid:
        cur = regauge(spec, disk, Mobius(), grid)
    info = {}
    for _ in range(rounds):
        u0, e1, _ = cur.center_jet
        info = center_info(spec, p, xi, u0, e1)
        if info["center_misfit"] <= tol and info["angle_error"] <= tol:
            break
        a, mis = locate(spec, cur.map, p)
        if a is None:
            raise PlateauError("point not covered by the disk")
        eta, emis = tangent_preimage(cur.map, a, xi)
        if emis > 1e-6 or eta == 0:
            raise PlateauError("direction not tangent to the disk")
        cur = regauge(spec, cur, centering_mobius(a, eta))
    u0, e1, _ = cur.center_jet
    info = center_info(spec, p, xi, u0, e1)
    return cur, info


def center_info(spec, p, xi, u0, e1):
    G = metric_jet(spec, p[None])[0][0]
    ne1 = np.sqrt(e1 @ G @ e1)
    nxi = np.sqrt(xi @ G @ xi)
    cosang = (e1 @ G @ xi) / (ne1 * nxi) if ne1 > 0 else -1.0
    ang = float(np.arccos(np.clip(cosang, -1.0, 1.0)))
    scale = max(1.0, float(np.linalg.norm(p)))
    return {
        "center_misfit": float(np.linalg.norm(u0 - p)) / scale,
        "angle_error": ang,
        "alpha": float(ne1),
    }
