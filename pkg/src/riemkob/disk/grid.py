"""Polar grid on the closed unit disk.

Nodes: one center node plus ``m`` rings ``r_i = i/m`` (the last is the rim)
with ``N = 4m`` equispaced angles each.  Node ``0`` is the center; ring ``i``,
angle ``j`` is node ``1 + (i - 1) N + j``.

All differential operators act on angular Fourier modes.  Along a diameter
the mode coefficient ``c_k(r)`` extends smoothly to ``r < 0`` with parity
``(-1)^k``, so the radial stencils simply run through the center; near the rim
they switch to one-sided stencils.  Angular derivatives are spectral, radial
ones of order ``RADIAL_ORDER``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


MODE_CUTOFF = 36.0
RADIAL_ORDER = 6


def fd_weights(offsets, deriv: int, at: float = 0.0) -> np.ndarray:
    """Finite-difference weights on integer ``offsets`` (unit spacing)."""
    x = np.asarray(offsets, dtype=float) - at
    k = len(x)
    A = np.vander(x, k, increasing=True).T
    b = np.zeros(k)
    b[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    return np.linalg.solve(A, b)


def _radial_offsets(i: int, m: int, deriv: int):
    half = RADIAL_ORDER // 2
    if i <= m - half:
        return tuple(range(-half, half + 1))
    top = m - i
    size = RADIAL_ORDER + deriv
    return tuple(range(top - size + 1, top + 1))


def _radial_matrix(m: int, deriv: int, parity: int) -> np.ndarray:
    """Rows i = 1..m; columns are samples c(0), c(h), ..., c(mh)."""
    h = 1.0 / m
    D = np.zeros((m, m + 1))
    for i in range(1, m + 1):
        offs = _radial_offsets(i, m, deriv)
        w = fd_weights(offs, deriv) / h**deriv
        for o, wo in zip(offs, w):
            node = i + o
            if node >= 0:
                D[i - 1, node] += wo
            else:
                D[i - 1, -node] += parity * wo
    return D


def _center_row(m: int, deriv: int, parity: int) -> np.ndarray:
    h = 1.0 / m
    half = RADIAL_ORDER // 2
    offs = tuple(range(-half, half + 1))
    w = fd_weights(offs, deriv) / h**deriv
    row = np.zeros(m + 1)
    for o, wo in zip(offs, w):
        row[abs(o)] += wo * (parity if o < 0 else 1)
    return row


@dataclass(frozen=True)
class _Ops:
    D1: dict
    D2: dict
    c1: np.ndarray  # first derivative at the center, odd parity
    c2: np.ndarray  # second derivative at the center, even parity
    poisson_inv: np.ndarray  # (K, m, m)
    poisson_bnd: np.ndarray  # (K, m)
    keep: np.ndarray  # (K, m) angular modes resolved on each ring


@lru_cache(maxsize=16)
def _ops(m: int) -> _Ops:
    N = 4 * m
    K = N // 2 + 1
    D1 = {p: _radial_matrix(m, 1, p) for p in (1, -1)}
    D2 = {p: _radial_matrix(m, 2, p) for p in (1, -1)}
    c1 = _center_row(m, 1, -1)
    c2 = _center_row(m, 2, 1)
    r = np.arange(1, m + 1) / m
    inv = np.empty((K, m, m))
    bnd = np.empty((K, m))
    for k in range(K):
        p = 1 if k % 2 == 0 else -1
        L = D2[p] + D1[p] / r[:, None]
        L[np.arange(m), np.arange(1, m + 1)] -= k * k / r**2
        full = np.zeros((m, m + 1))
        full[1:] = L[: m - 1]
        if k == 0:
            full[0] = 2.0 * c2
        else:
            full[0, 0] = 1.0
        inv[k] = np.linalg.inv(full[:, :m])
        bnd[k] = full[:, m]
    # mode k on ring r is O(r^k); below roundoff it only amplifies noise by k^2/r^2
    keep = np.arange(K)[:, None] * np.log(1.0 / r)[None, :] <= MODE_CUTOFF
    return _Ops(D1, D2, c1, c2, inv, bnd, keep)


@dataclass(frozen=True, eq=False)
class DiskGrid:
    """Polar grid with ``m`` rings (``m`` even, ``m >= 8``) and ``4m`` angles."""

    m: int
    radii: np.ndarray = field(init=False, repr=False)
    angles: np.ndarray = field(init=False, repr=False)
    xy: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = self.m
        if m < 8 or m % 2:
            raise ValueError("grid resolution m must be even and at least 8")
        N = 4 * m
        radii = np.arange(1, m + 1) / m
        angles = 2 * np.pi * np.arange(N) / N
        xy = np.zeros((1 + m * N, 2))
        xy[1:, 0] = (radii[:, None] * np.cos(angles)[None, :]).ravel()
        xy[1:, 1] = (radii[:, None] * np.sin(angles)[None, :]).ravel()
        # Simpson in r (integrand carries the factor r), trapezoid in theta
        s = np.ones(m + 1)
        s[1:-1:2] = 4.0
        s[2:-1:2] = 2.0
        ring_w = (1.0 / (3 * m)) * s[1:] * radii * (2 * np.pi / N)
        w = np.zeros(1 + m * N)
        w[1:] = np.repeat(ring_w, N)
        for name, val in (("radii", radii), ("angles", angles), ("xy", xy), ("weights", w)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    def __eq__(self, other):
        return isinstance(other, DiskGrid) and other.m == self.m

    def __hash__(self):
        return hash(("DiskGrid", self.m))

    @property
    def N(self) -> int:
        return 4 * self.m

    @property
    def size(self) -> int:
        return 1 + self.m * self.N

    @property
    def z(self) -> np.ndarray:
        return self.xy[:, 0] + 1j * self.xy[:, 1]

    @property
    def rim(self) -> slice:
        return slice(1 + (self.m - 1) * self.N, self.size)

    @property
    def interior(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[self.rim] = False
        return mask

    def rings(self, values: np.ndarray) -> np.ndarray:
        """View ``(P, ...)`` node values as ``(m, N, ...)`` ring values."""
        return values[1:].reshape((self.m, self.N) + values.shape[1:])

    def assemble(self, center, rings) -> np.ndarray:
        rings = np.asarray(rings)
        out = np.empty((self.size,) + rings.shape[2:], dtype=rings.dtype)
        out[0] = center
        out[1:] = rings.reshape((-1,) + rings.shape[2:])
        return out

    def integrate(self, f: np.ndarray) -> float:
        return float(self.weights @ f)

    @property
    def ops(self) -> _Ops:
        return _ops(self.m)

    # --------------------------------------------------------------- modes

    def _modes(self, values):
        """Radial samples of angular modes: ``(K, m+1, ...)`` with c(0) at index 0."""
        rings = self.rings(values)
        F = np.fft.rfft(rings, axis=1)  # (m, K, ...)
        K = F.shape[1]
        c = np.zeros((K, self.m + 1) + values.shape[1:], dtype=complex)
        c[:, 1:] = np.swapaxes(F, 0, 1)
        c[:, 1:] *= self.ops.keep.reshape(self.ops.keep.shape + (1,) * (values.ndim - 1))
        c[0, 0] = self.N * values[0]
        return c

    def _apply_radial(self, D: dict, c):
        flat = c.reshape(c.shape[:2] + (-1,))
        out = np.empty((c.shape[0], self.m, flat.shape[2]), dtype=complex)
        out[0::2] = D[1] @ flat[0::2]
        out[1::2] = D[-1] @ flat[1::2]
        return out.reshape((c.shape[0], self.m) + c.shape[2:])

    def derivatives(self, values: np.ndarray, second: bool = True) -> dict:
        """Cartesian first and second derivatives at every node.

        ``values`` has shape ``(P,)`` or ``(P, n)``; returns a dict with keys
        ``x, y, xx, xy, yy`` (same shape as ``values``) plus polar ``r`` and
        ``t`` (d/dtheta) on the rings.  With ``second=False`` only ``x, y, r, t``
        are computed.
        """
        values = np.asarray(values, dtype=float)
        values = values - values[0]  # constants only feed roundoff into the stencils
        m, N = self.m, self.N
        c = self._modes(values)
        K = c.shape[0]
        ops = self.ops
        c1 = self._apply_radial(ops.D1, c)  # (K, m, ...)
        k = np.arange(K).reshape((K, 1) + (1,) * (values.ndim - 1))
        ik = 1j * k
        ik_odd = ik.copy()
        ik_odd[-1] = 0.0  # Nyquist mode has no odd derivative

        def back(a):
            return np.fft.irfft(np.swapaxes(a, 0, 1), n=N, axis=1)

        u_r = back(c1)
        u_t = back(ik_odd * c[:, 1:])
        r = self.radii.reshape((m, 1) + (1,) * (values.ndim - 1))
        th = self.angles.reshape((1, N) + (1,) * (values.ndim - 1))
        cs, sn = np.cos(th), np.sin(th)
        ux = cs * u_r - sn * u_t / r
        uy = sn * u_r + cs * u_t / r
        g = ops.c1 @ c[1] if K > 1 else np.zeros_like(c[0, 0])
        gx, gy = 2 * g.real / N, -2 * g.imag / N
        out = {"x": self.assemble(gx, ux), "y": self.assemble(gy, uy), "r": u_r, "t": u_t}
        if not second:
            return out

        c2 = self._apply_radial(ops.D2, c)
        u_rr = back(c2)
        u_tt = back(-(k**2) * c[:, 1:])
        u_rt = back(ik_odd * c1)
        lap_t = u_r / r + u_tt / r**2
        mix = u_rt / r - u_t / r**2
        uxx = cs**2 * u_rr + sn**2 * lap_t - 2 * cs * sn * mix
        uyy = sn**2 * u_rr + cs**2 * lap_t + 2 * cs * sn * mix
        uxy = cs * sn * (u_rr - lap_t) + (cs**2 - sn**2) * mix

        # center: Hessian from modes 0 and 2
        lap0 = 2 * (ops.c2 @ c[0]).real / N
        q = 2 * (ops.c2 @ c[2]) / N
        dif, cxy = 2 * q.real, -q.imag
        out["xx"] = self.assemble(0.5 * (lap0 + dif), uxx)
        out["yy"] = self.assemble(0.5 * (lap0 - dif), uyy)
        out["xy"] = self.assemble(cxy, uxy)
        return out

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        d = self.derivatives(values)
        return d["xx"] + d["yy"]

    # ------------------------------------------------------------- Poisson

    def poisson(self, rhs: np.ndarray, boundary: np.ndarray, refine: int = 1) -> np.ndarray:
        """Solve ``Lap u = rhs`` inside, ``u = boundary`` on the rim.

        ``rhs`` has shape ``(P, ...)`` (rim entries ignored); ``boundary`` has
        shape ``(N, ...)``.  Uses the same discrete Laplacian as
        :meth:`derivatives`; ``refine`` steps of iterative refinement bring the
        discrete residual down to the roundoff floor of that Laplacian.
        """
        rhs = np.asarray(rhs, dtype=float)
        boundary = np.asarray(boundary, dtype=float)
        u = self._poisson_direct(rhs, boundary)
        mask = self.interior
        for _ in range(refine):
            res = np.zeros_like(rhs)
            res[mask] = (rhs - self.laplacian(u))[mask]
            u = u + self._poisson_direct(res, np.zeros_like(boundary))
        return u

    def _poisson_direct(self, rhs, boundary):
        m, N = self.m, self.N
        ops = self.ops
        rings = self.rings(rhs)
        F = np.swapaxes(np.fft.rfft(rings[: m - 1], axis=1), 0, 1)  # (K, m-1, ...)
        B = np.fft.rfft(boundary, axis=0)  # (K, ...)
        K = F.shape[0]
        R = np.zeros((K, m) + rhs.shape[1:], dtype=complex)
        R[:, 1:] = F
        R[0, 0] = N * rhs[0]
        bnd = ops.poisson_bnd.reshape((K, m) + (1,) * (rhs.ndim - 1))
        R -= bnd * B[:, None]
        C = (ops.poisson_inv @ R.reshape((K, m, -1))).reshape(R.shape)
        ring_vals = np.fft.irfft(np.swapaxes(C[:, 1:], 0, 1), n=N, axis=1)
        out = np.empty(rhs.shape, dtype=float)
        out[0] = C[0, 0].real / N
        out[1:] = np.concatenate([ring_vals, boundary[None]], axis=0).reshape((-1,) + rhs.shape[1:])
        return out

    # -------------------------------------------------------- interpolation

    def interpolate(self, values: np.ndarray, z, modes: np.ndarray | None = None) -> np.ndarray:
        """Evaluate the grid function at arbitrary points ``z`` (complex, |z| <= 1).

        ``modes`` may carry a precomputed ``_modes(values)`` for repeated calls.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        values = np.asarray(values, dtype=float)
        m, N = self.m, self.N
        c = self._modes(values) if modes is None else modes
        K = c.shape[0]
        kk = np.arange(K)
        wk = np.full(K, 2.0)
        wk[0] = 1.0
        wk[-1] = 1.0
        odd = (kk % 2 == 1).reshape((K, 1) + (1,) * (values.ndim - 1))
        out = np.empty((len(z),) + values.shape[1:])
        for idx, zz in enumerate(z):
            rho = abs(zz) * m
            if rho > m + 1e-9:
                raise ValueError("interpolation point outside the closed disk")
            base = int(np.floor(rho))
            lo = min(max(base - RADIAL_ORDER // 2, -m), m - RADIAL_ORDER - 1)
            offs = np.arange(lo, lo + RADIAL_ORDER + 2)
            w = fd_weights(offs, 0, at=rho)
            samples = c[:, np.abs(offs)]  # (K, 8, ...)
            neg = offs < 0
            if neg.any():
                samples = samples.copy()
                samples[:, neg] = np.where(odd, -samples[:, neg], samples[:, neg])
            ck = np.tensordot(w, samples, axes=([0], [1]))
            phase = np.exp(1j * kk * np.angle(zz)) * wk
            out[idx] = np.tensordot(phase, ck, axes=1).real / N
        return out
