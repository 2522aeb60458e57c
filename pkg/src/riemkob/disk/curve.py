"""Closed boundary curves given by truncated Fourier series."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..manifold import ManifoldSpec


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """``gamma(t) = c0 + sum_k a_k cos(k t) + b_k sin(k t)`` in R^n.

    ``coeffs`` has shape ``(2K + 1, n)``: row 0 is ``c0``, rows ``2k - 1`` and
    ``2k`` are ``a_k`` and ``b_k``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] % 2 != 1:
            raise ValueError("coeffs must have shape (2K+1, n)")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite curve coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def modes(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    def _basis(self, t, deriv=0):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.arange(1, self.modes + 1)
        kt = np.outer(t, k)
        B = np.zeros((len(t), 2 * self.modes + 1))
        if deriv == 0:
            B[:, 0] = 1.0
            B[:, 1::2], B[:, 2::2] = np.cos(kt), np.sin(kt)
        elif deriv == 1:
            B[:, 1::2], B[:, 2::2] = -k * np.sin(kt), k * np.cos(kt)
        else:
            B[:, 1::2], B[:, 2::2] = -k * k * np.cos(kt), -k * k * np.sin(kt)
        return B

    def __call__(self, t) -> np.ndarray:
        return self._basis(t) @ self.coeffs

    def derivative(self, t, order: int = 1) -> np.ndarray:
        return self._basis(t, order) @ self.coeffs

    def with_coeffs(self, coeffs) -> "BoundaryCurve":
        return BoundaryCurve(coeffs)

    def truncated(self, modes: int) -> "BoundaryCurve":
        """Keep (or zero-pad to) ``modes`` harmonics."""
        out = np.zeros((2 * modes + 1, self.n))
        k = min(modes, self.modes)
        out[: 2 * k + 1] = self.coeffs[: 2 * k + 1]
        return BoundaryCurve(out)

    @classmethod
    def circle(cls, center, e1, e2, radius: float = 1.0, modes: int = 1) -> "BoundaryCurve":
        c = np.zeros((2 * max(modes, 1) + 1, len(center)))
        c[0] = center
        c[1] = radius * np.asarray(e1, dtype=float)
        c[2] = radius * np.asarray(e2, dtype=float)
        return cls(c)

    @classmethod
    def from_function(cls, fn, modes: int, samples: int | None = None) -> "BoundaryCurve":
        """Least-squares (FFT) fit of a periodic function ``fn(t) -> (len(t), n)``."""
        S = samples or max(4 * modes + 4, 64)
        t = 2 * np.pi * np.arange(S) / S
        vals = np.asarray(fn(t), dtype=float).reshape(S, -1)
        F = np.fft.rfft(vals, axis=0) / S
        c = np.zeros((2 * modes + 1, vals.shape[1]))
        c[0] = F[0].real
        for k in range(1, modes + 1):
            c[2 * k - 1] = 2 * F[k].real
            c[2 * k] = -2 * F[k].imag
        return cls(c)

    def sample(self, count: int = 256) -> np.ndarray:
        return self(2 * np.pi * np.arange(count) / count)

    def inside(self, spec: ManifoldSpec, count: int = 256) -> bool:
        return bool(np.all(spec.chart.contains(self.sample(count))))

    def max_distance_from(self, p, count: int = 256) -> float:
        return float(np.max(np.linalg.norm(self.sample(count) - np.asarray(p), axis=1)))

    def self_intersects(self, count: int = 256) -> bool:
        """Heuristic embedding test on the sampled polygon (first two coordinates
        of the best-fit plane)."""
        pts = self.sample(count)
        X = pts - pts.mean(axis=0)
        _, _, vt = np.linalg.svd(X, full_matrices=False)
        q = X @ vt[:2].T
        a, b = q, np.roll(q, -1, axis=0)
        for i in range(count):
            j = np.arange(i + 2, count if i > 0 else count - 1)
            if not len(j):
                continue
            p1, p2, p3, p4 = a[i], b[i], a[j], b[j]
            d1 = _cross(p4 - p3, p1 - p3)
            d2 = _cross(p4 - p3, p2 - p3)
            d3 = _cross(p2 - p1, p3 - p1)
            d4 = _cross(p2 - p1, p4 - p1)
            if np.any((d1 * d2 < 0) & (d3 * d4 < 0)):
                return True
        return False


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
