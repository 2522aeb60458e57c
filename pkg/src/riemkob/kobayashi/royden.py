"""Upper estimates of the Kobayashi-Royden metric ``F(p, xi)``.

``F(p, xi) = inf 1/r`` over conformal harmonic immersed disks ``u`` with
``u(0) = p`` and ``du(0) e1 = r xi``.  Every candidate disk certifies an upper
bound; the estimate is the best certificate found by three families:

* seed disks centred at ``p`` (affine in a constant metric),
* a Nelder-Mead search over boundary-curve coefficients, each candidate
  spanned by a Plateau solve and pulled back to ``p`` by a disk automorphism,
* a pool of previously solved disks passing through ``p`` tangent to ``xi``.

For a disk with ``u(a) = p`` and ``du(a) eta = xi`` the recentred disk has
``r = (1 - |a|^2) / |eta|``, i.e. the estimate is the Poincare length of ``eta``
at ``a``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from ..disk.curve import BoundaryCurve
from ..disk.grid import DiskGrid
from ..disk.plateau import (
    ConformalDisk,
    Mobius,
    PlateauError,
    center_info,
    centering_mobius,
    locate,
    plateau_solve,
    recenter,
    regauge,
    tangent_preimage,
)
from ..disk.seed import CenteredDisk, SeedError, affine_disk, chart_radius, seed_disk
from ..manifold import ChartDomainError, ManifoldSpec, TangentVector, metric_at, orthonormal_frame
from ..disk.harmonic import HarmonicSolveError

RIM_GUARD = 0.95
QUANTUM = 12  # decimal digits kept when canonicalising directions


@dataclass(frozen=True)
class SearchBudget:
    """Search effort for :func:`royden_estimate` and everything built on it."""

    modes: int = 8
    restarts: int = 5
    scale_cap: float = float("inf")
    max_evals: int = 40
    search_m: int = 16
    grid_m: int = 64
    tol: float = 1e-6
    search_tol: float = 1e-3
    seed: int = 0
    # distance estimators
    waypoints: int = 3
    random_nodes: int = 2
    segments: int = 8
    descent_iters: int = 20

    def reduced(self) -> "SearchBudget":
        """Inner budget: no simplex restarts, certificates on the search grid."""
        return replace(self, restarts=0, grid_m=self.search_m)

    def to_dict(self) -> dict:
        d = asdict(self)
        if not np.isfinite(self.scale_cap):
            d["scale_cap"] = "inf"
        return d


@dataclass(frozen=True, eq=False)
class MetricEstimate:
    p: np.ndarray
    xi: np.ndarray
    value: float
    r: float
    certificate: CenteredDisk | None
    family: str
    budget: SearchBudget
    diagnostics: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.value))


def spec_key(spec: ManifoldSpec):
    return (spec.name, spec.dim, spec.chart,
            tuple(tuple(e.source if e is not None else None for e in row) for row in spec.metric))


# ----------------------------------------------------------- solve cache

_PLATEAU_CACHE: dict = {}
_CACHE_LIMIT = 512


def cached_plateau(spec, curve: BoundaryCurve, grid: DiskGrid, tol, modes=None):
    key = (spec_key(spec), curve.coeffs.tobytes(), curve.coeffs.shape, grid.m, tol, modes)
    hit = _PLATEAU_CACHE.get(key)
    if hit is not None:
        return hit
    try:
        disk = plateau_solve(spec, curve, grid, tol, modes=modes, strict=False, max_iter=8)
    except (PlateauError, HarmonicSolveError, ChartDomainError, ValueError, np.linalg.LinAlgError):
        disk = None
    if len(_PLATEAU_CACHE) >= _CACHE_LIMIT:
        _PLATEAU_CACHE.pop(next(iter(_PLATEAU_CACHE)))
    _PLATEAU_CACHE[key] = disk
    return disk


def clear_cache():
    _PLATEAU_CACHE.clear()


# ------------------------------------------------------------ pool values


def disk_value(spec: ManifoldSpec, disk: ConformalDisk, p, xi, rim_guard: float = RIM_GUARD):
    """Poincare length of the preimage of ``xi`` at the preimage of ``p``.

    Returns ``(value, a, eta)``; ``value`` is ``inf`` when ``p`` is not on the
    disk (within ``rim_guard``) or ``xi`` is not tangent to it.
    """
    if disk is None or not disk.immersion:
        return np.inf, None, None
    p = np.asarray(p, dtype=float)
    scale = max(1.0, float(np.linalg.norm(p)))
    lo, hi = disk.map.values.min(axis=0), disk.map.values.max(axis=0)
    if np.any(p < lo - 1e-9 * scale) or np.any(p > hi + 1e-9 * scale):
        return np.inf, None, None
    a, mis = locate(spec, disk.map, p, rim_guard=rim_guard)
    if a is None or mis > 1e-9 * scale:
        return np.inf, None, None
    eta, emis = tangent_preimage(disk.map, a, xi)
    if emis > 1e-6 or eta == 0:
        return np.inf, None, None
    return abs(eta) / (1.0 - abs(a) ** 2), a, eta


def pool_value(spec: ManifoldSpec, pool, p, xi) -> float:
    """``min`` over the pool of :func:`disk_value` (``inf`` if none applies)."""
    best = np.inf
    for disk in pool or ():
        v = disk_value(spec, disk, p, xi)[0]
        if v < best:
            best = v
    return float(best)


# ------------------------------------------------------------- estimator


def _canonical_direction(spec, p, xi):
    G = metric_at(spec, p)
    nrm = float(np.sqrt(xi @ G @ xi))
    d = np.round(xi / nrm, QUANTUM)
    nz = np.flatnonzero(d)
    flip = bool(len(nz) and d[nz[0]] < 0)
    if flip:
        d = -d
    d = d / np.sqrt(d @ G @ d)
    return nrm, d, flip


def _half_turn(cert: CenteredDisk) -> CenteredDisk:
    """``u(-z)``: exact index roll on every ring, or a rotated gauge."""
    if not cert.gauge.is_identity:
        return replace(cert, gauge=cert.gauge.compose(Mobius(0j, np.pi)), xi_hat=-cert.xi_hat)
    disk = cert.disk
    amap = disk.angle_map.composed(Mobius(0j, np.pi))
    return replace(cert, disk=replace(disk, map=disk.map.rotated(2), angle_map=amap), xi_hat=-cert.xi_hat)


def royden_estimate(spec: ManifoldSpec, v, budget: SearchBudget | None = None, pool=None) -> MetricEstimate:
    """Certified upper estimate of ``F(p, xi)`` for ``v = TangentVector`` or ``(p, xi)``."""
    budget = budget or SearchBudget()
    if isinstance(v, TangentVector):
        p, xi = np.asarray(v.base, dtype=float), np.asarray(v.components, dtype=float)
    else:
        p, xi = (np.asarray(a, dtype=float) for a in v)
    spec.require_inside(p[None], "base point")
    if xi.shape != p.shape or not np.any(xi != 0) or not np.all(np.isfinite(xi)):
        raise ValueError("royden_estimate needs a finite nonzero direction")
    nrm, d, flip = _canonical_direction(spec, p, xi)
    r_unit, cert, family, diag = _estimate_unit(spec, p, d, budget, pool)
    if cert is None:
        return MetricEstimate(p, xi, np.inf, 0.0, None, "none", budget, diag)
    if flip:
        cert = _half_turn(cert)
    r = r_unit / nrm
    return MetricEstimate(p, xi, 1.0 / r, r, cert, family, budget, diag)


def _estimate_unit(spec, p, d, budget: SearchBudget, pool):
    """Best certificate for the g-unit direction ``d``: ``(alpha, cert, family, diag)``."""
    grid = DiskGrid(budget.grid_m)
    sgrid = DiskGrid(min(budget.search_m, budget.grid_m))
    frame = orthonormal_frame(spec, p, d)
    e1, e2 = frame[0], frame[1]
    t_chart = chart_radius(spec, p, e1, e2)
    t_max = min(budget.scale_cap, t_chart)
    diag = {"chart_radius": t_chart, "seed_radius": t_max, "candidates": []}
    cands = []  # (alpha, family, builder)

    # (a) seed disks
    if spec.is_flat_constant:
        cands.append((t_max, "affine", lambda: CenteredDisk(affine_disk(spec, p, e1, e2, t_max, grid), p, e1, t_max, 0.0, 0.0, t_max)))
    else:
        seed = None
        t = t_max
        for _ in range(4):
            try:
                seed = seed_disk(spec, p, d, t, budget.tol, grid=grid, strict=False)
                if seed.disk.immersion:
                    break
            except (SeedError, PlateauError, HarmonicSolveError, ChartDomainError, ValueError):
                seed = None
            t *= 0.5
        if seed is not None:
            cands.append((seed.alpha, "seed", lambda s=seed: s))
    diag["candidates"].append(("seed", cands[0][0] if cands else 0.0))

    # (b) boundary-curve search
    capped = budget.scale_cap <= t_chart
    if not (spec.is_flat_constant and capped):
        best = _curve_search(spec, p, d, frame, budget, sgrid, t_max, cands[0][0] if cands else 0.0)
        if best is not None:
            alpha_b, curve = best
            diag["candidates"].append(("search", alpha_b))
            cands.append((alpha_b, "search", lambda c=curve: _certify_curve(spec, c, p, d, grid, budget)))

    # (c) pool
    for disk in pool or ():
        val, a, eta = disk_value(spec, disk, p, d)
        if np.isfinite(val):
            cands.append((1.0 / val, "pool", lambda dk=disk: _certify_disk(spec, dk, p, d, grid, budget)))
            diag["candidates"].append(("pool", 1.0 / val))

    order = sorted(range(len(cands)), key=lambda i: (-cands[i][0], i))
    for i in order:
        alpha_est, family, build = cands[i]
        try:
            cert = build()
        except (SeedError, PlateauError, HarmonicSolveError, ChartDomainError, ValueError, np.linalg.LinAlgError):
            cert = None
        if cert is None or not _acceptable(cert, budget):
            diag.setdefault("rejected", []).append((family, alpha_est))
            continue
        return cert.alpha, cert, family, diag
    return 0.0, None, "none", diag


def _acceptable(cert: CenteredDisk, budget: SearchBudget) -> bool:
    tol = budget.tol
    dk = cert.disk
    return (
        dk.immersion
        and cert.alpha > 0
        and cert.center_misfit <= tol
        and cert.angle_error <= tol
        and dk.conformality_residual <= max(tol, 10 * dk.tol)
    )


def _certify_disk(spec, disk: ConformalDisk, p, d, grid, budget) -> CenteredDisk:
    """Recentre by resampling; if that loses accuracy (a point far from the
    centre needs a strongly distorted reparametrization), keep the solved disk
    and carry the automorphism as a gauge."""
    try:
        centred, info = recenter(spec, disk, p, d, grid=grid)
        cert = CenteredDisk(centred, p, d, info["alpha"], info["center_misfit"], info["angle_error"])
        if _acceptable(cert, budget):
            return cert
    except PlateauError:
        pass
    if grid != disk.grid:
        disk = regauge(spec, disk, Mobius(), grid)
    a, _ = locate(spec, disk.map, p, rim_guard=RIM_GUARD)
    if a is None:
        raise PlateauError("point not covered by the disk")
    eta, emis = tangent_preimage(disk.map, a, d)
    if emis > 1e-6 or eta == 0:
        raise PlateauError("direction not tangent to the disk")
    cert = CenteredDisk(disk, p, d, 0.0, np.inf, np.inf, gauge=centering_mobius(a, eta))
    u0, e1, _ = cert.center_jet
    info = center_info(spec, p, d, u0, e1)
    return replace(cert, alpha=info["alpha"], center_misfit=info["center_misfit"], angle_error=info["angle_error"])


def _certify_curve(spec, curve, p, d, grid, budget) -> CenteredDisk:
    coarse = cached_plateau(spec, curve, DiskGrid(min(budget.search_m, budget.grid_m)), budget.search_tol)
    init = None if coarse is None else coarse.angle_map.psi
    disk = plateau_solve(spec, curve, grid, budget.tol, initial=init, strict=False)
    return _certify_disk(spec, disk, p, d, grid, budget)


# ------------------------------------------------------- simplex search


def _start_curves(spec, p, d, frame, t_max):
    e1, e2 = frame[0], frame[1]
    out = [BoundaryCurve.circle(p, e1, e2, t_max)]
    ch = spec.chart
    c = np.asarray(ch.center) if ch.kind == "ball" else 0.5 * (np.asarray(ch.lower) + np.asarray(ch.upper))
    G = metric_at(spec, p)
    # g_p-orthogonal projection of the chart centre onto the plane p + span(e1, e2)
    off = c - p
    cp = p + (e1 @ G @ off) * e1 + (e2 @ G @ off) * e2
    if np.all(ch.contains(cp[None])):
        rad = chart_radius(spec, cp, e1, e2)
        out.append(BoundaryCurve.circle(cp, e1, e2, rad))
    return out


def _curve_alpha(spec, curve, p, d, budget, sgrid, t_cap):
    if not curve.inside(spec, 128):
        return 0.0
    if np.isfinite(t_cap):
        G = metric_at(spec, p)
        X = curve.sample(128) - p
        if np.max(np.sqrt(np.einsum("pi,ij,pj->p", X, G, X))) > t_cap * (1 + 1e-12):
            return 0.0
    disk = cached_plateau(spec, curve, sgrid, budget.search_tol)
    if disk is None or disk.conformality_residual > budget.search_tol:
        return 0.0
    val = disk_value(spec, disk, p, d)[0]
    return 1.0 / val if np.isfinite(val) and val > 0 else 0.0


def _curve_search(spec, p, d, frame, budget, sgrid, t_max, alpha_seed):
    """Nelder-Mead over boundary-curve coefficients; returns ``(alpha, curve)`` of the best."""
    t_cap = budget.scale_cap
    best = None
    for curve in _start_curves(spec, p, d, frame, t_max):
        a = _curve_alpha(spec, curve, p, d, budget, sgrid, t_cap)
        if a > 0 and (best is None or a > best[0]):
            best = (a, curve)
    if best is None or budget.restarts <= 0:
        return best
    rng = np.random.default_rng(budget.seed)
    scale = max(t_max, 1e-6)
    for r in range(budget.restarts):
        K = max(1, min(budget.modes, 2**r))
        start = best[1].truncated(K)
        shape = start.coeffs.shape
        x0 = start.coeffs.ravel()
        dim = x0.size
        simplex = np.vstack([x0, x0 + 0.05 * scale * rng.standard_normal((dim, dim)) / np.sqrt(dim)])

        def obj(x, shape=shape):
            a = _curve_alpha(spec, BoundaryCurve(x.reshape(shape)), p, d, budget, sgrid, t_cap)
            return 1.0 / a if a > 0 else 1e300

        res = minimize(obj, x0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "maxfev": budget.max_evals, "xatol": 1e-10, "fatol": 1e-12})
        if res.fun < 1e299 and 1.0 / res.fun > best[0] * (1 + 1e-12):
            best = (1.0 / res.fun, BoundaryCurve(res.x.reshape(shape)))
    return best
