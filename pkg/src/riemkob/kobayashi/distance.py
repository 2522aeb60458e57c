"""Upper estimates of the Kobayashi pseudodistance.

Two estimators:

* ``chain_distance``: a waypoint graph whose edges join points lying on one
  solved disk, weighted by the Poincare distance of their preimages; the
  shortest path (Dijkstra) is a Kobayashi chain.
* ``integrated_distance``: the length of a polyline measured with the metric
  estimate, midpoint rule per segment, minimised over the interior vertices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.csgraph import csgraph_from_dense, dijkstra

from ..disk.plateau import ConformalDisk, locate
from ..disk.seed import chart_radius
from ..manifold import ManifoldSpec, NoAdmissiblePath, metric_at, orthonormal_frame
from .poincare import geodesic_points, poincare_distance
from .royden import RIM_GUARD, SearchBudget, disk_value, royden_estimate

MATCH_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ChainLink:
    disk: ConformalDisk
    z: complex
    w: complex
    rho: float


@dataclass(frozen=True, eq=False)
class Chain:
    p: np.ndarray
    q: np.ndarray
    links: tuple = ()

    @property
    def length(self) -> float:
        return float(sum(l.rho for l in self.links))

    def reversed(self) -> "Chain":
        links = tuple(ChainLink(l.disk, l.w, l.z, l.rho) for l in reversed(self.links))
        return Chain(self.q, self.p, links)

    def matching_error(self) -> float:
        """Largest coordinate gap between consecutive link endpoints (and the ends)."""
        if not self.links:
            return float(np.linalg.norm(self.p - self.q))
        pts = []
        for l in self.links:
            a, b = l.disk.map(np.array([l.z, l.w]))
            pts.append((a, b))
        err = max(np.linalg.norm(pts[0][0] - self.p), np.linalg.norm(pts[-1][1] - self.q))
        for (_, b), (a, _) in zip(pts[:-1], pts[1:]):
            err = max(err, np.linalg.norm(b - a))
        return float(err)


@dataclass(frozen=True, eq=False)
class PathPolyline:
    vertices: np.ndarray
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))  # per-segment integrand

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[1:] + self.vertices[:-1])

    @property
    def steps(self) -> np.ndarray:
        """Segment vectors, i.e. the velocity times ``dt`` on each segment."""
        return np.diff(self.vertices, axis=0)

    def __call__(self, t: float) -> np.ndarray:
        k = len(self.vertices) - 1
        s = min(max(float(t), 0.0), 1.0) * k
        i = min(int(s), k - 1)
        return self.vertices[i] + (s - i) * (self.vertices[i + 1] - self.vertices[i])


def _as_point(spec, x, what):
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise ValueError(f"{what} must have {spec.dim} coordinates")
    spec.require_inside(x[None], what)
    return x


def _add_disk(pool: list, disk):
    if disk is None or not disk.immersion:
        return
    if any(d is disk for d in pool):
        return
    pool.append(disk)


# ------------------------------------------------------------- chains


def _waypoints(spec, a, b, budget: SearchBudget):
    k = budget.waypoints
    t = np.arange(1, k + 1) / (k + 1)
    nodes = [a, b] + [a + s * (b - a) for s in t]
    rng = np.random.default_rng(budget.seed)
    span = float(np.linalg.norm(b - a))
    mid = 0.5 * (a + b)
    tries = 0
    extra = []
    while len(extra) < budget.random_nodes and tries < 50 * max(budget.random_nodes, 1):
        tries += 1
        g = rng.standard_normal(spec.dim)
        x = mid + 0.5 * span * rng.uniform() ** (1 / spec.dim) * g / np.linalg.norm(g)
        if np.all(spec.chart.contains(x[None])):
            extra.append(x)
    return np.array(nodes + extra)


def _preimages(spec, disks, nodes):
    """``pre[i][k]``: parameter of node ``i`` on disk ``k``, or ``None`` if it is not on it."""
    pre = []
    for x in nodes:
        tol = MATCH_TOL * max(1.0, float(np.linalg.norm(x)))
        row = []
        for disk in disks:
            v = disk.map.values
            if np.any(x < v.min(axis=0) - tol) or np.any(x > v.max(axis=0) + tol):
                row.append(None)
                continue
            z, mz = locate(spec, disk.map, x, rim_guard=RIM_GUARD)
            row.append(z if z is not None and mz <= tol else None)
        pre.append(row)
    return pre


def _edge_weight(disks, zs, ws):
    best, arg = np.inf, None
    for disk, z, w in zip(disks, zs, ws):
        if z is None or w is None:
            continue
        rho = poincare_distance(z, w)
        if rho < best:
            best, arg = rho, (disk, z, w)
    return best, arg


def chain_distance(spec: ManifoldSpec, p, q, budget: SearchBudget | None = None, pool: list | None = None):
    """Shortest Kobayashi chain through a waypoint graph.  Returns ``(value, Chain)``.

    Nodes are generated from the endpoints in a canonical order, so swapping
    ``p`` and ``q`` yields the same graph and the same value.  Disks found on
    the way are appended to ``pool`` when one is given.
    """
    budget = budget or SearchBudget()
    p = _as_point(spec, p, "p")
    q = _as_point(spec, q, "q")
    if np.array_equal(p, q):
        return 0.0, Chain(p, q)
    swap = tuple(q) < tuple(p)
    a, b = (q, p) if swap else (p, q)
    nodes = _waypoints(spec, a, b, budget)
    disks = [] if pool is None else pool
    inner = budget.reduced()
    k = len(nodes)
    for i in range(k):
        for j in range(i + 1, k):
            chord = nodes[j] - nodes[i]
            mid = 0.5 * (nodes[i] + nodes[j])
            if not np.all(spec.chart.contains(mid[None])):
                continue
            est = royden_estimate(spec, (mid, chord), inner, pool=disks)
            if est.certificate is not None:
                _add_disk(disks, est.certificate.disk)
    W = np.full((k, k), np.inf)
    links = {}
    pre = _preimages(spec, disks, nodes)
    for i in range(k):
        for j in range(i + 1, k):
            rho, arg = _edge_weight(disks, pre[i], pre[j])
            if arg is not None:
                W[i, j] = W[j, i] = max(rho, 1e-300)
                links[i, j] = arg
    graph = csgraph_from_dense(W, null_value=np.inf)
    dist, pred = dijkstra(graph, directed=False, indices=0, return_predecessors=True)
    if not np.isfinite(dist[1]):
        raise NoAdmissiblePath("waypoint graph is disconnected; increase the budget")
    path = [1]
    while path[-1] != 0:
        path.append(int(pred[path[-1]]))
    path.reverse()
    chain_links = []
    for u, v in zip(path[:-1], path[1:]):
        disk, z, w = links[min(u, v), max(u, v)]
        if u > v:
            z, w = w, z
        chain_links.append(ChainLink(disk, z, w, poincare_distance(z, w)))
    chain = Chain(a, b, tuple(chain_links))
    value = chain.length
    if swap:
        chain = chain.reversed()
    return value, chain


# --------------------------------------------------- integrated form


class _Integrand:
    """``F(x, v)`` from the disk pool, the affine family and, lazily, fresh estimates."""

    def __init__(self, spec, budget: SearchBudget, pool: list):
        self.spec = spec
        self.budget = budget
        self.pool = pool
        self.calls = 0

    def affine(self, x, v):
        if not self.spec.is_flat_constant:
            return np.inf
        frame = orthonormal_frame(self.spec, x, v)
        t = min(self.budget.scale_cap, chart_radius(self.spec, x, frame[0], frame[1]))
        G = metric_at(self.spec, x)
        return float(np.sqrt(v @ G @ v)) / t if t > 0 else np.inf

    def pooled(self, x, v, disks=None):
        best = self.affine(x, v)
        for disk in self.pool if disks is None else disks:
            val = disk_value(self.spec, disk, x, v)[0]
            if val < best:
                best = val
        return float(best)

    def __call__(self, x, v, disks=None, fresh=True):
        self.calls += 1
        if not np.any(v != 0):
            return 0.0, None
        val = self.pooled(x, v, disks)
        if np.isfinite(val) or not fresh:
            return val, None
        est = royden_estimate(self.spec, (x, v), self.budget.reduced(), pool=self.pool)
        if est.certificate is not None:
            _add_disk(self.pool, est.certificate.disk)
        return est.value, est


def _polyline_value(F, verts, disks=None, fresh=False):
    mids = 0.5 * (verts[1:] + verts[:-1])
    steps = np.diff(verts, axis=0)
    vals = np.array([F(m, s, disks, fresh)[0] for m, s in zip(mids, steps)])
    return vals


def _best_disks(spec, F, verts):
    """Disks realising the pool minimum on each segment (the descent pool)."""
    out = []
    for m, s in zip(0.5 * (verts[1:] + verts[:-1]), np.diff(verts, axis=0)):
        best, arg = np.inf, None
        for disk in F.pool:
            val = disk_value(spec, disk, m, s)[0]
            if val < best:
                best, arg = val, disk
        if arg is not None and not any(arg is d for d in out):
            out.append(arg)
    return out


def chain_image_path(spec, chain: Chain, F: _Integrand, count: int):
    """Integrated length of the path that follows, link by link, the image of the
    hyperbolic geodesic from ``z_k`` to ``w_k``.  Returns ``(value, vertices)``."""
    total = 0.0
    verts = [chain.p]
    for link in chain.links:
        zeta, dzeta, _ = geodesic_points(link.z, link.w, count)
        pts = link.disk.map(zeta)
        J = link.disk.map.differential(zeta)  # (count, n, 2)
        vel = J @ np.stack([dzeta.real, dzeta.imag], axis=-1)[..., None]
        vel = vel[..., 0] / count
        vals = [F.pooled(x, v) for x, v in zip(pts, vel)]
        total += float(np.sum(vals))
        verts.extend(pts)
    verts.append(chain.q)
    return total, np.array(verts)


def integrated_distance(
    spec: ManifoldSpec,
    p,
    q,
    budget: SearchBudget | None = None,
    pool: list | None = None,
    chain: Chain | None = None,
):
    """Minimal midpoint-rule length ``sum F(gamma(t_i), gamma'(t_i)) dt`` over polylines.

    Interior vertices are optimised with the reduced inner budget; the optimal
    polyline is re-evaluated at full budget.  When ``chain`` is given, the image
    of the chain's hyperbolic geodesics is also measured and the shorter of the
    two paths is returned.  Returns ``(value, PathPolyline)``.
    """
    budget = budget or SearchBudget()
    p = _as_point(spec, p, "p")
    q = _as_point(spec, q, "q")
    if np.array_equal(p, q):
        return 0.0, PathPolyline(np.array([p, q]), np.zeros(1))
    pool = [] if pool is None else pool
    F = _Integrand(spec, budget, pool)
    S = max(1, budget.segments)
    t = np.linspace(0.0, 1.0, S + 1)[:, None]
    verts = p + t * (q - p)
    if not np.all(spec.chart.contains(verts)):
        raise NoAdmissiblePath("straight segment leaves the chart")
    # populate: make every segment finite
    vals = np.array([F(m, s)[0] for m, s in zip(0.5 * (verts[1:] + verts[:-1]), np.diff(verts, axis=0))])
    if not np.all(np.isfinite(vals)):
        raise NoAdmissiblePath("no certificate along the straight segment; increase the budget")

    if S > 1 and budget.descent_iters > 0:
        active = _best_disks(spec, F, verts)
        n = spec.dim
        scale = float(np.linalg.norm(q - p))
        x0 = verts[1:-1].ravel()

        def objective(x):
            V = np.vstack([p, x.reshape(S - 1, n), q])
            if not np.all(spec.chart.contains(V)):
                return 1e6
            s = float(np.sum(_polyline_value(F, V, active)))
            return s if np.isfinite(s) else 1e6

        res = minimize(objective, x0, method="L-BFGS-B",
                       options={"maxiter": budget.descent_iters,
                                "maxfun": budget.descent_iters * (x0.size + 1),
                                "eps": 1e-6 * max(scale, 1e-3)})
        if res.fun < float(np.sum(vals)):
            verts = np.vstack([p, res.x.reshape(S - 1, n), q])

    # final pass at full budget on the chosen polyline
    inner = _polyline_value(F, verts, None, fresh=True)
    final = []
    for m, s, v in zip(0.5 * (verts[1:] + verts[:-1]), np.diff(verts, axis=0), inner):
        est = royden_estimate(spec, (m, s), budget, pool=pool)
        if est.certificate is not None:
            _add_disk(pool, est.certificate.disk)
        final.append(min(v, est.value))
    final = np.array(final)
    value = float(np.sum(final))
    path = PathPolyline(verts, final)

    if chain is not None and chain.links:
        cval, cverts = chain_image_path(spec, chain, F, max(S, 8))
        if cval < value:
            value = cval
            path = PathPolyline(cverts, np.full(len(cverts) - 1, np.nan))
    return value, path


# ---------------------------------------------------------- coincidence


def coincidence_report(spec: ManifoldSpec, pairs, budget: SearchBudget | None = None, pool: list | None = None,
                       tol: float = 1e-6) -> list[dict]:
    """Chain and integrated estimates per pair, with relative gap and the
    one-sided check ``integrated <= chain + tol``."""
    budget = budget or SearchBudget()
    pool = [] if pool is None else pool
    rows = []
    for idx, (p, q) in enumerate(pairs):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        cval, chain = chain_distance(spec, p, q, budget, pool)
        ival, path = integrated_distance(spec, p, q, budget, pool, chain)
        if cval == 0.0 and ival == 0.0:
            gap = 0.0
        else:
            gap = abs(cval - ival) / cval if cval > 0 else np.inf
        rows.append({
            "pair": idx,
            "p": p.tolist(),
            "q": q.tolist(),
            "chain": cval,
            "integrated": ival,
            "gap": float(gap),
            "one_sided": bool(ival <= cval + tol),
            "links": len(chain.links),
            "matching_error": chain.matching_error() if chain.links else 0.0,
        })
    return rows
