"""Sampled maps of the unit disk and the functionals evaluated on them."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..manifold import ManifoldSpec, metric_jet
from .grid import DiskGrid

IMMERSION_THRESHOLD = 1e-6


class DegenerateMapError(ValueError):
    """The differential is (numerically) degenerate where an immersion is required."""

    def __init__(self, message, locus):
        super().__init__(message)
        self.locus = locus


@dataclass(frozen=True, eq=False)
class DiskMap:
    """Node values of ``u: D -> R^n`` on a :class:`DiskGrid`.

    ``values`` has shape ``(P, n)``.  Derivatives are computed lazily and
    cached; the instance is immutable.
    """

    grid: DiskGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.grid.size:
            raise ValueError(f"values must have shape ({self.grid.size}, n)")
        if not np.all(np.isfinite(v)):
            raise ValueError("disk map has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @cached_property
    def d(self) -> dict:
        return self.grid.derivatives(self.values)

    @cached_property
    def first(self) -> dict:
        if "d" in self.__dict__:
            return self.d
        return self.grid.derivatives(self.values, second=False)

    @property
    def ux(self):
        return self.first["x"]

    @property
    def uy(self):
        return self.first["y"]

    @property
    def boundary(self) -> np.ndarray:
        return self.grid.rings(self.values)[-1]

    def center_jet(self):
        """``(u(0), du(0) e1, du(0) e2)``."""
        return self.values[0].copy(), self.ux[0].copy(), self.uy[0].copy()

    @cached_property
    def _jet_modes(self):
        stack = np.concatenate([self.values, self.ux, self.uy], axis=1)
        return stack, self.grid._modes(stack)

    def jet(self, z):
        """``(u(z), du(z))`` with shapes ``(len(z), n)`` and ``(len(z), n, 2)``."""
        stack, modes = self._jet_modes
        out = self.grid.interpolate(stack, z, modes)
        n = self.n
        return out[:, :n], np.stack([out[:, n : 2 * n], out[:, 2 * n :]], axis=-1)

    def __call__(self, z) -> np.ndarray:
        return self.jet(z)[0]

    def differential(self, z) -> np.ndarray:
        """``du(z)`` as an ``(len(z), n, 2)`` array."""
        return self.jet(z)[1]

    def rotated(self, quarter_turns: int) -> "DiskMap":
        """``u(i^q z)`` sampled exactly (index shift on every ring)."""
        N = self.grid.N
        shift = (quarter_turns % 4) * (N // 4)
        rings = np.roll(self.grid.rings(self.values), -shift, axis=1)
        return DiskMap(self.grid, self.grid.assemble(self.values[0], rings))

    @classmethod
    def from_function(cls, grid: DiskGrid, fn) -> "DiskMap":
        """Sample ``fn(x, y) -> (P, n)`` at the grid nodes."""
        x, y = grid.xy.T
        return cls(grid, np.asarray(fn(x, y), dtype=float).reshape(grid.size, -1))


def first_fundamental_form(spec: ManifoldSpec, d: DiskMap):
    """Pointwise ``E = g(u_x,u_x)``, ``F = g(u_x,u_y)``, ``G = g(u_y,u_y)``."""
    Gm = metric_jet(spec, d.values)[0]
    ux, uy = d.ux, d.uy
    E = np.einsum("pi,pij,pj->p", ux, Gm, ux)
    F = np.einsum("pi,pij,pj->p", ux, Gm, uy)
    G = np.einsum("pi,pij,pj->p", uy, Gm, uy)
    return E, F, G


def energy(spec: ManifoldSpec, d: DiskMap) -> float:
    """Dirichlet energy ``int_D |du|_g^2 dm``."""
    E, _, G = first_fundamental_form(spec, d)
    return d.grid.integrate(E + G)


def area(spec: ManifoldSpec, d: DiskMap, check: bool = True) -> float:
    """Area ``int_D sqrt(EG - F^2) dx dy`` of the immersion."""
    E, F, G = first_fundamental_form(spec, d)
    det = E * G - F * F
    if check:
        scale = np.mean(E + G)
        bad = np.nonzero(det <= (IMMERSION_THRESHOLD * scale) ** 2)[0]
        if len(bad):
            raise DegenerateMapError(f"degenerate differential at {len(bad)} nodes", d.grid.xy[bad])
    return d.grid.integrate(np.sqrt(np.maximum(det, 0.0)))


def singular_values(spec: ManifoldSpec, d: DiskMap):
    E, F, G = first_fundamental_form(spec, d)
    tr, det = E + G, E * G - F * F
    disc = np.sqrt(np.maximum(tr * tr / 4 - det, 0.0))
    return np.sqrt(np.maximum(tr / 2 + disc, 0.0)), np.sqrt(np.maximum(tr / 2 - disc, 0.0))


def immersion_report(spec: ManifoldSpec, d: DiskMap, threshold: float = IMMERSION_THRESHOLD):
    """``(is_immersion, min_sigma / mean_sigma)`` over interior nodes."""
    big, small = singular_values(spec, d)
    mask = d.grid.interior
    mean = np.mean(0.5 * (big + small)[mask])
    ratio = float(np.min(small[mask]) / mean) if mean > 0 else 0.0
    return ratio >= threshold, ratio


def conformality_residual(spec: ManifoldSpec, d: DiskMap, return_excluded: bool = False):
    """``max_nodes max(|E - G|, |F|) / (E + G)``; degenerate nodes are excluded."""
    E, F, G = first_fundamental_form(spec, d)
    tr = E + G
    ok = tr > IMMERSION_THRESHOLD**2 * max(np.max(tr), np.finfo(float).tiny)
    res = np.maximum(np.abs(E - G), np.abs(F))[ok] / tr[ok]
    value = float(res.max()) if res.size else 0.0
    if return_excluded:
        return value, np.nonzero(~ok)[0]
    return value


def graph_stationary_residual(f: np.ndarray, grid: DiskGrid, center=(0.0, 0.0), radius: float = 1.0) -> np.ndarray:
    """Minimal-graph operator for ``(x, y) -> (x, y, f(x, y))`` over ``D(center, radius)``.

    ``f`` holds the node values of the height function(s) at the physical points
    ``center + radius * node``; shape ``(P,)`` or ``(P, k)`` for a vector graph.
    The result is ``G f_xx - 2 F f_xy + E f_yy`` with ``E = 1 + |f_x|^2``,
    ``F = f_x . f_y``, ``G = 1 + |f_y|^2``; for a scalar graph this is
    ``(1 + f_y^2) f_xx + (1 + f_x^2) f_yy - 2 f_x f_y f_xy``.
    """
    f = np.asarray(f, dtype=float)
    scalar = f.ndim == 1
    F2 = f[:, None] if scalar else f
    d = grid.derivatives(F2)
    s = 1.0 / radius
    fx, fy = d["x"] * s, d["y"] * s
    fxx, fxy, fyy = d["xx"] * s * s, d["xy"] * s * s, d["yy"] * s * s
    E = 1 + np.sum(fx * fx, axis=1, keepdims=True)
    F = np.sum(fx * fy, axis=1, keepdims=True)
    G = 1 + np.sum(fy * fy, axis=1, keepdims=True)
    res = G * fxx - 2 * F * fxy + E * fyy
    return res[:, 0] if scalar else res


# ------------------------------------------------------------------ disk dumps

DUMP_COLUMNS = "ir itheta x y u1..un"


def dump_disk(d: DiskMap, path, residuals: dict | None = None) -> None:
    """Plain-text dump: ``#`` header lines, then one row per node.

    Columns: ring index (0 = center), angle index, x, y, u1..un; every float is
    written with 17 significant digits so a reload is bit-exact.
    """
    grid = d.grid
    lines = [f"# riemkob-disk v1", f"# m {grid.m}", f"# n {d.n}"]
    for k, v in sorted((residuals or {}).items()):
        lines.append(f"# {k} {v!r}")
    lines.append(f"# columns {DUMP_COLUMNS}")
    fmt = "%.17g"
    idx = [(0, 0)] + [(i, j) for i in range(1, grid.m + 1) for j in range(grid.N)]
    for (ir, it), (x, y), u in zip(idx, grid.xy, d.values):
        lines.append(" ".join([str(ir), str(it), fmt % x, fmt % y] + [fmt % c for c in u]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_disk(path):
    """Inverse of :func:`dump_disk`; returns ``(DiskMap, header dict)``."""
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                parts = line[1:].split(None, 1)
                if len(parts) == 2:
                    header[parts[0]] = parts[1].strip()
                continue
            if line.strip():
                rows.append(line.split())
    m, n = int(header["m"]), int(header["n"])
    grid = DiskGrid(m)
    values = np.array([[float(c) for c in r[4:]] for r in rows])
    if values.shape != (grid.size, n):
        raise ValueError(f"dump has {values.shape} values, expected {(grid.size, n)}")
    meta = {}
    for k, v in header.items():
        if k in ("m", "n", "riemkob-disk", "columns"):
            continue
        try:
            meta[k] = float(v)
        except ValueError:
            meta[k] = v
    return DiskMap(grid, values), meta
