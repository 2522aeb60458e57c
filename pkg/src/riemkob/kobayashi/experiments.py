"""Experiments built on the metric and distance estimators.

All sampling goes through ``numpy.random.default_rng(seed)`` or a seeded
scrambled Halton sequence, so every result is reproducible from its seed.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import qmc

from ..disk.plateau import ConformalDisk
from ..disk.seed import CenteredDisk
from ..expr import eval_jet, parse_expr
from ..manifold import ManifoldSpec, ManifoldSpecError, geodesic_distance, metric_at, metric_jet
from .distance import chain_distance
from .poincare import poincare_distance, poincare_metric
from .royden import SearchBudget, royden_estimate


@dataclass(frozen=True)
class Region:
    """A ball ``|x - center| <= radius`` or a box ``lower <= x <= upper``."""

    kind: str
    center: tuple = ()
    radius: float = 0.0
    lower: tuple = ()
    upper: tuple = ()

    @classmethod
    def ball(cls, center, radius) -> "Region":
        return cls("ball", center=tuple(float(c) for c in center), radius=float(radius))

    @classmethod
    def box(cls, lower, upper) -> "Region":
        return cls("box", lower=tuple(float(c) for c in lower), upper=tuple(float(c) for c in upper))

    @property
    def dim(self) -> int:
        return len(self.center) if self.kind == "ball" else len(self.lower)

    def bounds(self):
        if self.kind == "ball":
            c = np.asarray(self.center)
            return c - self.radius, c + self.radius
        return np.asarray(self.lower), np.asarray(self.upper)

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.kind == "ball":
            return np.linalg.norm(x - np.asarray(self.center), axis=1) <= self.radius
        return np.all((x >= np.asarray(self.lower)) & (x <= np.asarray(self.upper)), axis=1)

    def sample(self, count: int, seed: int) -> np.ndarray:
        """``count`` quasi-random points of the region (scrambled Halton, rejection for balls)."""
        lo, hi = self.bounds()
        gen = qmc.Halton(self.dim, seed=seed)
        out = []
        while len(out) < count:
            pts = lo + (hi - lo) * gen.random(max(2 * count, 16))
            out.extend(pts[self.contains(pts)])
        return np.array(out[:count])


def unit_directions(spec: ManifoldSpec, points, rng) -> np.ndarray:
    """Random directions with ``|xi|_g = 1`` at each point."""
    points = np.atleast_2d(points)
    G = metric_jet(spec, points)[0]
    out = rng.standard_normal(points.shape)
    nrm = np.sqrt(np.einsum("pi,pij,pj->p", out, G, out))
    return out / nrm[:, None]


def disk_jet(disk, z):
    """``(u(z), du(z))`` for a :class:`ConformalDisk` or a centred certificate."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if isinstance(disk, CenteredDisk):
        return disk.jet(z)
    return disk.map.jet(z)


def _geodesic(spec, x, y):
    if spec.is_flat_constant:  # charts are convex
        G = metric_at(spec, x)
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return float(np.sqrt(d @ G @ d))
    return geodesic_distance(spec, x, y, tol=1e-8)


# ------------------------------------------------------------ hyperbolicity


def hyperbolicity_scan(spec: ManifoldSpec, region: Region, samples: int, budget: SearchBudget | None = None,
                       seed: int | None = None):
    """``c_min = min F(y, xi)`` over ``samples`` quasi-random unit vectors.

    Every value is an upper bound of the true metric at its sample, so a small
    ``c_min`` backed by certificates is evidence against hyperbolicity on the
    region.  Returns ``(c_min, estimates)``.
    """
    budget = budget or SearchBudget()
    seed = budget.seed if seed is None else seed
    if samples < 1:
        raise ValueError("samples must be positive")
    pts = region.sample(samples, seed)
    spec.require_inside(pts, "scan region")
    dirs = unit_directions(spec, pts, np.random.default_rng(seed))
    ests = [royden_estimate(spec, (p, xi), budget) for p, xi in zip(pts, dirs)]
    c_min = min(e.value for e in ests)
    return float(c_min), ests


# ----------------------------------------------------------------- isometry


@dataclass
class IsometryReport:
    relation: str
    rows: list
    pullback_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return all(r["ok"] for r in self.rows)

    @property
    def max_relative_difference(self) -> float:
        return max((r["rel_diff"] for r in self.rows), default=0.0)


def _map_jets(exprs, pts):
    vals, jac = [], []
    for e in exprs:
        v, g, _ = eval_jet(e, pts.T, order=1)
        vals.append(np.broadcast_to(v, pts.shape[:1]))
        jac.append(np.broadcast_to(g.T if np.ndim(g) > 1 else g, pts.shape))
    return np.stack(vals, axis=1), np.stack(jac, axis=1)  # (P, m), (P, m, n)


def isometry_check(
    specA: ManifoldSpec,
    specB: ManifoldSpec,
    map_sources,
    samples: int,
    budget: SearchBudget | None = None,
    relation: str = "inequality",
    region: Region | None = None,
    tol: float = 1e-3,
    seed: int | None = None,
) -> IsometryReport:
    """Compare ``F_B(f(p), df(p) xi)`` with ``F_A(p, xi)``.

    ``relation`` is ``"inequality"`` (``F_B <= F_A + tol``), ``"equality"``
    (``|F_B - F_A| <= tol``, relative) or ``"conformal"``: the inequality for a
    map that pulls ``h`` back to a positive multiple of ``g`` (dimension 2,
    where conformal maps carry conformal harmonic disks to conformal harmonic
    disks).  The pullback is checked on the samples to 1e-8 first.
    """
    if relation not in ("inequality", "equality", "conformal"):
        raise ValueError(f"unknown relation {relation!r}")
    budget = budget or SearchBudget()
    seed = budget.seed if seed is None else seed
    n = specA.dim
    exprs = [parse_expr(s, n) if isinstance(s, str) else s for s in map_sources]
    if len(exprs) != specB.dim:
        raise ManifoldSpecError(f"map needs {specB.dim} components, got {len(exprs)}")
    if region is None:
        ch = specA.chart
        if ch.kind == "ball":
            region = Region.ball(ch.center, 0.5 * ch.radius)
        else:
            c = 0.5 * (np.asarray(ch.lower) + np.asarray(ch.upper))
            region = Region.ball(c, 0.5 * ch.scale)
    pts = region.sample(samples, seed)
    specA.require_inside(pts, "sample")
    fp, J = _map_jets(exprs, pts)
    specB.require_inside(fp, "image point")
    GA = metric_jet(specA, pts)[0]
    GB = metric_jet(specB, fp)[0]
    pull = np.einsum("pai,pab,pbj->pij", J, GB, J)
    if relation == "conformal":
        if n != 2:
            raise ManifoldSpecError("conformal relation needs dimension 2")
        lam = np.trace(pull, axis1=1, axis2=2) / np.trace(GA, axis1=1, axis2=2)
        target = lam[:, None, None] * GA
    else:
        target = GA
    err = float(np.max(np.abs(pull - target) / np.max(np.abs(GA), axis=(1, 2))[:, None, None]))
    if err > 1e-8:
        raise ManifoldSpecError(f"map does not pull the metric back correctly (error {err:.2e})")
    dirs = unit_directions(specA, pts, np.random.default_rng(seed))
    rows = []
    for i, (p, xi) in enumerate(zip(pts, dirs)):
        ea = royden_estimate(specA, (p, xi), budget)
        eb = royden_estimate(specB, (fp[i], J[i] @ xi), budget)
        a, b = ea.value, eb.value
        rel = abs(b - a) / max(abs(a), 1e-300)
        if relation == "equality":
            ok = rel <= tol
        else:
            ok = b <= a + tol * max(1.0, abs(a))
        rows.append({"sample": i, "p": p.tolist(), "xi": xi.tolist(), "F_A": a, "F_B": b,
                     "rel_diff": float(rel), "ok": bool(ok)})
    return IsometryReport(relation, rows, err, tol)


# ------------------------------------------------------------ disk bounds


def disk_upper_bound_check(spec: ManifoldSpec, disk: ConformalDisk | CenteredDisk, samples: int = 50,
                           budget: SearchBudget | None = None, seed: int = 0, z_max: float = 0.9,
                           slack: float = 0.05):
    """Sample ``(z, v)`` and compare ``F(u(z), du(z) v)`` with ``P(z, v) (1 + slack)``.

    Returns a list of rows; ``ok`` is false for a violation.
    """
    budget = budget or SearchBudget()
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(samples):
        z = z_max * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        v = np.exp(2j * np.pi * rng.uniform())
        x, J = disk_jet(disk, z)
        xi = J[0] @ np.array([v.real, v.imag])
        est = royden_estimate(spec, (x[0], xi), budget)
        bound = poincare_metric(z, v)
        rows.append({"sample": i, "z": [z.real, z.imag], "v": [v.real, v.imag], "estimate": est.value,
                     "poincare": bound, "ok": bool(est.value <= bound * (1 + slack))})
    return rows


# ----------------------------------------------------------- equicontinuity


def equicontinuity_probe(spec: ManifoldSpec, disks, radii=(0.1, 0.25, 0.5, 0.75, 0.9), angles: int = 8,
                         pairs_per_disk: int = 2, budget: SearchBudget | None = None, seed: int = 0,
                         tol: float = 1e-6):
    """Modulus of continuity of the pool and a check of ``d(u(z), u(w)) <= rho(z, w)``.

    Returns ``(table, violations)``: ``table`` maps each radius ``s`` to the
    largest ``dist_g(u(z), u(0))`` over the pool with ``|z| = s``; violations
    list the sampled pairs whose chain estimate exceeds ``rho (1 + tol)``.
    """
    disks = list(disks)
    if not disks:
        raise ValueError("equicontinuity probe needs a nonempty pool")
    budget = budget or SearchBudget()
    probe_budget = replace(budget, waypoints=1, random_nodes=0)
    th = 2 * np.pi * np.arange(angles) / angles
    table = {}
    for s in radii:
        zs = s * np.exp(1j * th)
        worst = 0.0
        for d in disks:
            u0 = disk_jet(d, 0j)[0][0]
            for x in disk_jet(d, zs)[0]:
                worst = max(worst, _geodesic(spec, u0, x))
        table[float(s)] = worst
    rng = np.random.default_rng(seed)
    violations = []
    for k, d in enumerate(disks):
        for _ in range(pairs_per_disk):
            z, w = (0.6 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform()) for _ in range(2))
            x, y = disk_jet(d, np.array([z, w]))[0]
            rho = poincare_distance(z, w)
            if np.allclose(x, y, rtol=0, atol=1e-14):
                continue
            dval, _ = chain_distance(spec, x, y, probe_budget)
            if dval > rho * (1 + tol):
                violations.append({"disk": k, "z": [z.real, z.imag], "w": [w.real, w.imag],
                                   "distance": dval, "rho": rho})
    return table, violations


# ------------------------------------------------------- semicontinuity


def semicontinuity_probe(spec: ManifoldSpec, p, xi, deltas=(1e-2, 1e-3), count: int = 20,
                         budget: SearchBudget | None = None, seed: int | None = None):
    """Relative excess ``eps(delta) = max (F(p', xi') - F(p, xi)) / F(p, xi)`` over
    ``count`` perturbations with ``|p' - p|, |xi' - xi| <= delta``.

    Returns ``(base_estimate, {delta: eps})``.
    """
    budget = budget or SearchBudget()
    seed = budget.seed if seed is None else seed
    p = np.asarray(p, dtype=float)
    xi = np.asarray(xi, dtype=float)
    base = royden_estimate(spec, (p, xi), budget)
    rng = np.random.default_rng(seed)
    out = {}
    for delta in deltas:
        worst = -np.inf
        for _ in range(count):
            dp = _ball_sample(rng, spec.dim) * delta
            dx = _ball_sample(rng, spec.dim) * delta
            est = royden_estimate(spec, (p + dp, xi + dx), budget)
            worst = max(worst, (est.value - base.value) / base.value)
        out[float(delta)] = float(worst)
    return base, out


def _ball_sample(rng, n):
    g = rng.standard_normal(n)
    return g / np.linalg.norm(g) * rng.uniform() ** (1.0 / n)


# ----------------------------------------------------------------- Lipschitz


def lipschitz_experiment(spec: ManifoldSpec, center, radius: float, pairs: int = 50,
                         budget: SearchBudget | None = None, seed: int | None = None,
                         metric_samples: int = 24, tol: float = 1e-6):
    """Empirical ``C_K = max F(y, xi) / |xi|_g`` over the ball (interior and
    boundary-sphere samples) and the check ``d(y, z) <= C_K dist_g(y, z)``.

    Returns a dict with ``C_K``, the per-pair rows and the violation count.
    """
    budget = budget or SearchBudget()
    seed = budget.seed if seed is None else seed
    center = np.asarray(center, dtype=float)
    region = Region.ball(center, radius)
    rng = np.random.default_rng(seed)
    inner = region.sample(metric_samples // 2, seed)
    g = rng.standard_normal((metric_samples - len(inner), spec.dim))
    rim = center + radius * g / np.linalg.norm(g, axis=1, keepdims=True)
    pts = np.vstack([center[None], inner, rim])
    dirs = unit_directions(spec, pts, rng)
    ratios = [royden_estimate(spec, (y, xi), budget).value for y, xi in zip(pts, dirs)]
    C_K = float(max(ratios))
    rows = []
    for i in range(pairs):
        y = center + radius * _ball_sample(rng, spec.dim)
        z = center + radius * _ball_sample(rng, spec.dim)
        # a fresh pool per pair keeps the cost linear in the number of pairs
        dval, _ = chain_distance(spec, y, z, budget)
        dg = _geodesic(spec, y, z)
        rows.append({"pair": i, "y": y.tolist(), "z": z.tolist(), "distance": dval, "dist_g": dg,
                     "ok": bool(dval <= C_K * dg * (1 + tol))})
    return {"C_K": C_K, "rows": rows, "violations": sum(not r["ok"] for r in rows)}
