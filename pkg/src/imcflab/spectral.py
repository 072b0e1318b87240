"""Legendre-Gauss-Lobatto grids on [0, pi] with quadrature and differentiation."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def _legendre_pair(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (P_n(x), P_{n-1}(x)) by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p, p_prev


@lru_cache(maxsize=32)
def lgl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Legendre-Gauss-Lobatto nodes and weights on [-1, 1], ascending.

    Returns n + 1 nodes, the zeros of (1 - x^2) P_n'(x).
    """
    if n < 2:
        raise ValueError("LGL grid needs n >= 2")
    x = -np.cos(np.pi * np.arange(n + 1) / n)
    for _ in range(100):
        p, p_prev = _legendre_pair(n, x)
        dx = (x * p - p_prev) / ((n + 1) * p)
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    x[0], x[-1] = -1.0, 1.0
    # symmetrize to kill the last ulp of drift
    x = 0.5 * (x - x[::-1])
    p, _ = _legendre_pair(n, x)
    w = 2.0 / (n * (n + 1) * p**2)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=32)
def lgl_diff_matrix(n: int) -> np.ndarray:
    """Barycentric first-derivative matrix on the LGL nodes of [-1, 1].

    The barycentric weights of the LGL nodes are proportional to 1/P_n(x_j),
    so D_ij = P_n(x_i) / (P_n(x_j) (x_i - x_j)). The diagonal uses the
    negative-sum identity, which is more accurate than the closed form.
    """
    x, _ = lgl_nodes(n)
    p, _ = _legendre_pair(n, x)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    d = (p[:, None] / p[None, :]) / dx
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    d.setflags(write=False)
    return d


def _annihilate_constants(m: np.ndarray) -> np.ndarray:
    """Reset the diagonal so every row sums to zero (exact derivative of constants)."""
    m = m.copy()
    np.fill_diagonal(m, 0.0)
    np.fill_diagonal(m, -m.sum(axis=1))
    return m


class PolarGrid:
    """LGL grid mapped to polar angles phi in [0, pi].

    Holds the nodes, plain quadrature weights in phi, and the first and second
    derivative matrices in phi.
    """

    def __init__(self, n: int):
        x, w = lgl_nodes(n)
        self.n = n
        self.phi = 0.5 * np.pi * (x + 1.0)
        self.phi[0], self.phi[-1] = 0.0, np.pi
        self.weights = 0.5 * np.pi * w
        d = (2.0 / np.pi) * lgl_diff_matrix(n)
        self.d1 = d
        self.d2 = _annihilate_constants(d @ d)
        p, _ = _legendre_pair(n, np.asarray(x))
        self._bary = 1.0 / p
        self.d1_reg, self.d2_reg = map(_annihilate_constants, self._regularized(p))
        for arr in (self.phi, self.weights, self.d1, self.d2, self.d1_reg, self.d2_reg):
            arr.setflags(write=False)

    def _regularized(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Derivative matrices of the pole-regular interpolant.

        The interpolant I of the nodal data is corrected by w(phi) (a + b phi),
        w the node polynomial, so that the slope vanishes at phi = 0 and pi.
        Nodal values are unchanged; the correction is rank two, driven by the
        uncorrected end slopes. w'(phi_j) is proportional to P_n(x_j) and
        w''(phi_j) = 2 w'(phi_j) sum_{k != j} 1/(phi_j - phi_k) = 2 w'(phi_j) D_jj.
        """
        phi, d = self.phi, self.d1
        r0 = p / p[0]
        rpi = p / p[-1]
        u0 = -r0 * (1.0 - phi / np.pi)
        upi = -rpi * phi / np.pi
        s = np.diag(d)
        v0 = 2.0 * s * u0 + 2.0 / np.pi * r0
        vpi = 2.0 * s * upi - 2.0 / np.pi * rpi
        d1r = d + np.outer(u0, d[0]) + np.outer(upi, d[-1])
        d2r = self.d2 + np.outer(v0, d[0]) + np.outer(vpi, d[-1])
        return d1r, d2r

    def regular_derivatives(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """First and second derivatives of the pole-regular interpolant.

        The mean is removed first: the matrices annihilate constants exactly,
        and centring keeps the rounding error proportional to the variation of
        the data instead of its size.
        """
        c = values - np.mean(values)
        return self.d1_reg @ c, self.d2_reg @ c

    def __len__(self) -> int:
        return self.n + 1

    def interpolate(self, values: np.ndarray, phi_new: np.ndarray) -> np.ndarray:
        """Barycentric interpolation of nodal values to arbitrary angles."""
        phi_new = np.atleast_1d(np.asarray(phi_new, dtype=float))
        diff = phi_new[:, None] - self.phi[None, :]
        exact = np.isclose(diff, 0.0, rtol=0.0, atol=1e-15)
        diff[exact] = 1.0
        ratio = self._bary[None, :] / diff
        out = (ratio @ values) / ratio.sum(axis=1)
        rows, cols = np.nonzero(exact)
        out[rows] = values[cols]
        return out


@lru_cache(maxsize=32)
def polar_grid(n: int) -> PolarGrid:
    return PolarGrid(n)


def sphere_area(k: int) -> float:
    """Total measure of the unit k-sphere, omega_k."""
    from math import gamma, pi

    return 2.0 * pi ** ((k + 1) / 2) / gamma((k + 1) / 2)
