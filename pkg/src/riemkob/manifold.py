"""Riemannian manifolds described in a single chart.

The metric is given entrywise by expressions in ``x1..xn``; every derivative
needed downstream (Christoffel symbols and their first derivatives) comes from
exact forward jets, never from finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .expr import Const, Expr, ExprError, Var, eval_jet, parse_expr

DEFAULT_MARGIN = 1e-3
EUCLIDEAN_HALF_WIDTH = 100.0


class ManifoldSpecError(ValueError):
    """Invalid manifold description (bad entry, non-SPD metric, bad chart)."""


class ChartDomainError(ValueError):
    """A point lies outside the chart (or inside the boundary margin)."""


class NoAdmissiblePath(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    kind: str  # "box" or "ball"
    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()
    center: tuple[float, ...] = ()
    radius: float = 0.0
    margin: float = DEFAULT_MARGIN

    @property
    def scale(self) -> float:
        if self.kind == "ball":
            return self.radius
        return 0.5 * min(u - l for l, u in zip(self.lower, self.upper))

    def margin_length(self) -> float:
        return self.margin * self.scale

    def slack(self, x) -> np.ndarray:
        """Signed distance to the margin-shrunk boundary (positive inside).

        ``x`` has shape ``(..., n)``.
        """
        x = np.asarray(x, dtype=float)
        m = self.margin_length()
        if self.kind == "ball":
            c = np.asarray(self.center)
            return self.radius - m - np.linalg.norm(x - c, axis=-1)
        lo = np.asarray(self.lower) + m
        hi = np.asarray(self.upper) - m
        return np.min(np.minimum(x - lo, hi - x), axis=-1)

    def contains(self, x, use_margin: bool = True) -> np.ndarray:
        s = self.slack(x)
        if not use_margin:
            s = s + self.margin_length()
        return s > 0

    def sample_grid(self, k: int) -> np.ndarray:
        """Tensor grid of ``k`` points per axis, restricted to the interior."""
        n = len(self.center) if self.kind == "ball" else len(self.lower)
        if self.kind == "ball":
            lo = np.asarray(self.center) - self.radius
            hi = np.asarray(self.center) + self.radius
        else:
            lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        axes = [lo[i] + (hi[i] - lo[i]) * (np.arange(k) + 0.5) / k for i in range(n)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        return pts[self.contains(pts)]


def _is_constant(e: Expr) -> bool:
    stack = [e.root]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            return False
        if isinstance(node, Const):
            continue
        stack.extend(getattr(node, a) for a in ("arg", "left", "right") if hasattr(node, a))
    return True


@dataclass(frozen=True)
class ManifoldSpec:
    """Immutable chart description of (M, g)."""

    name: str
    dim: int
    chart: Chart
    metric: tuple[tuple[Expr | None, ...], ...]  # lower triangle, metric[i][j] for j <= i
    builtin: str | None = None
    _constant: tuple = field(default=(), compare=False, repr=False)

    def entry(self, i: int, j: int) -> Expr | None:
        if j > i:
            i, j = j, i
        return self.metric[i][j]

    @property
    def is_flat_constant(self) -> bool:
        return all(e is None or _is_constant(e) for row in self.metric for e in row)

    def require_inside(self, x, what: str = "point"):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ChartDomainError(f"{what} has {x.shape[-1]} coordinates, manifold dimension is {self.dim}")
        if not np.all(self.chart.contains(x)):
            raise ChartDomainError(f"{what} lies outside the chart {self.name!r} (margin {self.chart.margin})")


def _build(name, dim, chart, sources, builtin=None) -> ManifoldSpec:
    rows = []
    for i in range(dim):
        row = []
        for j in range(i + 1):
            src = sources.get((i, j))
            if src is None:
                row.append(None)
                continue
            try:
                row.append(parse_expr(str(src), dim))
            except ExprError as err:
                raise ManifoldSpecError(f"metric entry {i + 1} {j + 1} ({src!r}): {err}") from err
        rows.append(tuple(row))
    return ManifoldSpec(name, dim, chart, tuple(rows), builtin)


def euclidean(n: int, half_width: float = EUCLIDEAN_HALF_WIDTH, chart: Chart | None = None) -> ManifoldSpec:
    chart = chart or Chart("box", lower=(-half_width,) * n, upper=(half_width,) * n)
    sources = {(i, i): "1" for i in range(n)}
    return _build(f"euclidean({n})", n, chart, sources, "euclidean")


def unit_disk_flat(radius: float = 1.0) -> ManifoldSpec:
    chart = Chart("ball", center=(0.0, 0.0), radius=radius)
    name = "unit_disk_flat" if radius == 1.0 else f"flat_disk(r={radius:g})"
    return _build(name, 2, chart, {(0, 0): "1", (1, 1): "1"}, "unit_disk_flat")


def poincare_ball(n: int) -> ManifoldSpec:
    r2 = " - ".join(f"x{i + 1}^2" for i in range(n))
    factor = f"4/((1 - {r2})^2)"
    chart = Chart("ball", center=(0.0,) * n, radius=1.0)
    return _build(f"poincare_ball({n})", n, chart, {(i, i): factor for i in range(n)}, "poincare_ball")


def builtin_spec(name: str, dim: int | None = None, chart: Chart | None = None) -> ManifoldSpec:
    if name == "euclidean":
        return euclidean(dim or 2, chart=chart)
    if name == "unit_disk_flat":
        if dim not in (None, 2):
            raise ManifoldSpecError("unit_disk_flat has dimension 2")
        if chart is not None:
            if chart.kind != "ball":
                raise ManifoldSpecError("unit_disk_flat needs a ball chart")
            return unit_disk_flat(chart.radius)
        return unit_disk_flat()
    if name == "poincare_ball":
        return poincare_ball(dim or 2)
    raise ManifoldSpecError(f"unknown builtin {name!r}")


# ---------------------------------------------------------------- evaluation


def metric_jet(spec: ManifoldSpec, points, order: int = 1):
    """Metric and its derivatives at a batch of points.

    ``points`` has shape ``(P, n)`` (or ``(n,)``).  Returns ``G`` of shape
    ``(P, n, n)``, ``dG`` with ``dG[p, k, i, j] = d_k g_ij`` and, for
    ``order=2``, ``ddG[p, k, l, i, j]``.
    """
    x = np.asarray(points, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    n, P = spec.dim, x.shape[0]
    G = np.zeros((P, n, n))
    dG = np.zeros((P, n, n, n))
    ddG = np.zeros((P, n, n, n, n)) if order >= 2 else None
    xt = x.T
    for i in range(n):
        for j in range(i + 1):
            e = spec.metric[i][j]
            if e is None:
                continue
            if _is_constant(e):
                G[:, i, j] = G[:, j, i] = float(eval_jet(e, np.zeros(n), order=1)[0])
                continue
            val, grad, hess = eval_jet(e, xt, order=order)
            G[:, i, j] = G[:, j, i] = val
            dG[:, :, i, j] = dG[:, :, j, i] = grad.T
            if ddG is not None:
                h = np.moveaxis(hess, -1, 0)
                ddG[:, :, :, i, j] = ddG[:, :, :, j, i] = h
    if single:
        return (G[0], dG[0]) + ((ddG[0],) if order >= 2 else ())
    return (G, dG) + ((ddG,) if order >= 2 else ())


def metric_at(spec: ManifoldSpec, p) -> np.ndarray:
    """Symmetric positive definite metric matrix at ``p`` (single point or batch)."""
    p = np.asarray(p, dtype=float)
    spec.require_inside(p)
    G = metric_jet(spec, p)[0]
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as err:
        raise ManifoldSpecError(f"metric of {spec.name!r} is not positive definite at {p}") from err
    return G


def _christoffel_from(G, dG):
    Ginv = np.linalg.inv(G)
    # first-kind symbols: Gamma_{l, jk} = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
    first = 0.5 * (np.einsum("...jlk->...ljk", dG) + np.einsum("...klj->...ljk", dG) - dG)
    return np.einsum("...il,...ljk->...ijk", Ginv, first), Ginv, first


def christoffel_jet(spec: ManifoldSpec, points, order: int = 1):
    """Christoffel symbols ``Gam[..., i, j, k]`` and optionally ``dGam[..., m, i, j, k]``."""
    if order < 2:
        G, dG = metric_jet(spec, points, 1)
        return _christoffel_from(G, dG)[0]
    G, dG, ddG = metric_jet(spec, points, 2)
    Gam, Ginv, first = _christoffel_from(G, dG)
    dGinv = -np.einsum("...il,...mlr,...rs->...mis", Ginv, dG, Ginv)
    dfirst = 0.5 * (
        np.einsum("...mjlk->...mljk", ddG) + np.einsum("...mklj->...mljk", ddG) - ddG
    )
    dGam = np.einsum("...mil,...ljk->...mijk", dGinv, first) + np.einsum("...il,...mljk->...mijk", Ginv, dfirst)
    return Gam, dGam


def christoffel_at(spec: ManifoldSpec, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    metric_at(spec, p)
    return christoffel_jet(spec, p)


@dataclass(frozen=True)
class TangentVector:
    base: tuple[float, ...]
    components: tuple[float, ...]

    @classmethod
    def of(cls, base, components) -> "TangentVector":
        return cls(tuple(float(b) for b in base), tuple(float(c) for c in components))


def vector_norm(spec: ManifoldSpec, v: TangentVector) -> float:
    G = metric_at(spec, v.base)
    xi = np.asarray(v.components, dtype=float)
    return float(np.sqrt(max(xi @ G @ xi, 0.0)))


def norm_at(spec: ManifoldSpec, p, xi) -> float:
    return vector_norm(spec, TangentVector.of(p, xi))


def orthonormal_frame(spec: ManifoldSpec, p, xi) -> np.ndarray:
    """g_p-orthonormal basis whose first vector is ``xi / |xi|_g``.

    For n = 2 the frame is positively oriented.  Deterministic: the remaining
    vectors come from Gram-Schmidt on the coordinate basis.
    """
    G = metric_at(spec, p)
    n = spec.dim
    xi = np.asarray(xi, dtype=float)
    vecs = [xi / np.sqrt(xi @ G @ xi)]
    order = np.argsort(np.abs(vecs[0]), kind="stable")
    for idx in order:
        e = np.zeros(n)
        e[idx] = 1.0
        for v in vecs:
            e = e - (v @ G @ e) * v
        nrm = np.sqrt(max(e @ G @ e, 0.0))
        if nrm > 1e-8:
            vecs.append(e / nrm)
        if len(vecs) == n:
            break
    frame = np.array(vecs)
    if n == 2 and np.linalg.det(frame) < 0:
        frame[1] = -frame[1]
    return frame


# ------------------------------------------------------------ geodesic distance


def _polyline_length(spec, verts):
    """Metric length of a polyline (Simpson's rule per segment) and its gradient."""
    d = np.diff(verts, axis=0)
    total = 0.0
    grad = np.zeros_like(verts)
    for s, w in ((0.0, 1.0 / 6.0), (0.5, 4.0 / 6.0), (1.0, 1.0 / 6.0)):
        pts = verts[:-1] + s * d
        G, dG = metric_jet(spec, pts, 1)
        f = np.sqrt(np.maximum(np.einsum("si,sij,sj->s", d, G, d), 0.0))
        safe = np.where(f > 0, f, 1.0)
        gd = np.einsum("sij,sj->si", G, d) / safe[:, None]
        gx = 0.5 * np.einsum("si,skij,sj->sk", d, dG, d) / safe[:, None]
        total += w * f.sum()
        grad[1:] += w * (gd + s * gx)
        grad[:-1] += w * (-gd + (1.0 - s) * gx)
    return total, grad


def _descend(spec, verts, tol):
    n = spec.dim
    inner0 = verts[1:-1].ravel()
    if inner0.size == 0:
        return _polyline_length(spec, verts)[0], verts
    bounds = None
    if spec.chart.kind == "box":
        m = spec.chart.margin_length()
        lo = np.asarray(spec.chart.lower) + m
        hi = np.asarray(spec.chart.upper) - m
        bounds = list(zip(np.tile(lo, len(verts) - 2), np.tile(hi, len(verts) - 2)))

    def fun(flat):
        v = verts.copy()
        v[1:-1] = flat.reshape(-1, n)
        if spec.chart.kind == "ball" and not np.all(spec.chart.contains(v[1:-1])):
            return np.inf, np.zeros_like(flat)
        L, g = _polyline_length(spec, v)
        return L, g[1:-1].ravel()

    res = minimize(fun, inner0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"ftol": 1e-15, "gtol": tol * 1e-2, "maxiter": 2000})
    out = verts.copy()
    out[1:-1] = res.x.reshape(-1, n)
    return float(fun(res.x)[0]), out


def geodesic_path(spec: ManifoldSpec, p, q, tol: float = 1e-8, segments: int = 8, max_segments: int = 1024):
    """Length-minimizing polyline from ``p`` to ``q``; returns ``(length, vertices)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for what, x in (("p", p), ("q", q)):
        try:
            spec.require_inside(x, what)
        except ChartDomainError as err:
            raise NoAdmissiblePath(str(err)) from err
    if np.array_equal(p, q):
        return 0.0, np.stack([p, q])
    t = np.linspace(0.0, 1.0, segments + 1)[:, None]
    verts = (1 - t) * p + t * q
    if not np.all(spec.chart.contains(verts)):
        raise NoAdmissiblePath("straight seed leaves the chart; no admissible path found")
    L, verts = _descend(spec, verts, tol)
    while len(verts) - 1 < max_segments:
        fine = np.empty((2 * len(verts) - 1, spec.dim))
        fine[0::2] = verts
        fine[1::2] = 0.5 * (verts[1:] + verts[:-1])
        L_new, fine = _descend(spec, fine, tol)
        done = abs(L_new - L) < tol
        L, verts = L_new, fine
        if done:
            break
    return L, verts


def geodesic_distance(spec: ManifoldSpec, p, q, tol: float = 1e-8) -> float:
    """dist_g(p, q) by refined polyline descent (see :func:`geodesic_path`)."""
    return geodesic_path(spec, p, q, tol)[0]


# -------------------------------------------------------------------- validation


def validate(spec: ManifoldSpec, resolution: int | None = None) -> ManifoldSpec:
    """Check that g is SPD on a tensor validation grid; return ``spec``."""
    if spec.dim < 2:
        raise ManifoldSpecError("dimension must be at least 2")
    ch = spec.chart
    if ch.kind == "ball":
        if ch.radius <= 0 or len(ch.center) != spec.dim:
            raise ManifoldSpecError("ball chart needs a positive radius and a center of matching dimension")
    elif ch.kind == "box":
        if len(ch.lower) != spec.dim or len(ch.upper) != spec.dim or any(u <= l for l, u in zip(ch.lower, ch.upper)):
            raise ManifoldSpecError("box chart needs lower < upper in every coordinate")
    else:
        raise ManifoldSpecError(f"unknown chart kind {ch.kind!r}")
    k = resolution or (9 if spec.dim <= 3 else 5)
    pts = ch.sample_grid(k)
    if len(pts) == 0:
        raise ManifoldSpecError("chart domain is empty")
    try:
        G = metric_jet(spec, pts)[0]
    except ExprError as err:
        raise ManifoldSpecError(f"metric of {spec.name!r} cannot be evaluated on the chart: {err}") from err
    if not np.all(np.isfinite(G)):
        raise ManifoldSpecError(f"metric of {spec.name!r} is not finite on the chart")
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        bad = [i for i in range(len(pts)) if np.any(np.linalg.eigvalsh(G[i]) <= 0)]
        raise ManifoldSpecError(f"metric of {spec.name!r} is not positive definite at {pts[bad[0]].tolist()}")
    return spec


# ------------------------------------------------------------------- spec files


def _chart_from_dict(d: dict, dim: int, margin: float) -> Chart:
    if not isinstance(d, dict) or "kind" not in d:
        raise ManifoldSpecError("chart must be a mapping with a 'kind' field")
    kind = d["kind"]
    if kind == "ball":
        center = tuple(float(c) for c in d.get("center", [0.0] * dim))
        if "radius" not in d:
            raise ManifoldSpecError("ball chart needs 'radius'")
        return Chart("ball", center=center, radius=float(d["radius"]), margin=margin)
    if kind == "box":
        bounds = d.get("bounds")
        if bounds is None or len(bounds) != dim:
            raise ManifoldSpecError(f"box chart needs 'bounds' with {dim} [lo, hi] pairs")
        return Chart("box", lower=tuple(float(b[0]) for b in bounds), upper=tuple(float(b[1]) for b in bounds), margin=margin)
    raise ManifoldSpecError(f"unknown chart kind {kind!r}")


def spec_from_dict(doc: dict) -> ManifoldSpec:
    if not isinstance(doc, dict):
        raise ManifoldSpecError("manifold spec must be a mapping")
    try:
        dim = int(doc["dim"])
    except (KeyError, TypeError, ValueError) as err:
        raise ManifoldSpecError("field 'dim' is required and must be an integer") from err
    name = str(doc.get("name", "manifold"))
    margin = float(doc.get("margin", DEFAULT_MARGIN))
    chart = _chart_from_dict(doc["chart"], dim, margin) if "chart" in doc else None
    if doc.get("builtin"):
        spec = builtin_spec(str(doc["builtin"]), dim, chart)
        if chart is not None and spec.builtin != "unit_disk_flat":
            spec = ManifoldSpec(name, spec.dim, chart, spec.metric, spec.builtin)
        return validate(spec)
    if chart is None:
        raise ManifoldSpecError("field 'chart' is required")
    entries = doc.get("metric")
    if not entries:
        raise ManifoldSpecError("field 'metric' is required unless 'builtin' is given")
    sources = {}
    for raw in entries:
        parts = str(raw).split(None, 2)
        if len(parts) != 3:
            raise ManifoldSpecError(f"metric entry {raw!r} must read 'i j expression'")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError as err:
            raise ManifoldSpecError(f"metric entry {raw!r}: indices must be integers") from err
        if not (1 <= j <= i <= dim):
            raise ManifoldSpecError(f"metric entry {raw!r}: need 1 <= j <= i <= dim={dim} (lower triangle)")
        if (i - 1, j - 1) in sources:
            raise ManifoldSpecError(f"metric entry {raw!r}: duplicate entry {i} {j}")
        sources[(i - 1, j - 1)] = parts[2]
    for i in range(dim):
        if (i, i) not in sources:
            raise ManifoldSpecError(f"metric entry {i + 1} {i + 1} is missing")
    spec = _build(name, dim, chart, sources)
    return validate(spec)


def load_spec(path: str | Path) -> ManifoldSpec:
    """Load a YAML manifold spec file (see README for the schema)."""
    import yaml

    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ManifoldSpecError(f"cannot parse {path}: {err}") from err
    return spec_from_dict(doc)


def resolve_spec(ref: str) -> ManifoldSpec:
    """``builtin:NAME[:DIM]`` or a path to a spec file."""
    if ref.startswith("builtin:"):
        parts = ref.split(":")
        dim = int(parts[2]) if len(parts) > 2 else None
        return validate(builtin_spec(parts[1], dim))
    return load_spec(ref)
