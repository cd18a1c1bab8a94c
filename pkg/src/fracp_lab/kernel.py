"""Discrete Gagliardo seminorm and the weak fractional p-Laplacian on a grid.

For a grid function ``u`` (zero outside the domain) the p-th power of the
seminorm is approximated by midpoint quadrature over interior cell pairs with
the diagonal cells skipped, plus the exact interaction with the exterior:

    sum_{i != j} w_i w_j |u_i - u_j|^p |x_i - x_j|^{-(n+sp)}
        + 2 sum_i w_i |u_i|^p T(x_i),

where ``T(x) = int_{R^n \\ Omega} |x - y|^{-(n+sp)} dy``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor
from scipy.spatial.distance import pdist, squareform

from ._backend import get_backend
from .grid import Domain, Grid, GridFunction
from .radial import radial_gagliardo_p, radial_kernel  # noqa: F401  (re-export)


def tail_weight(domain: Domain, x, sp: float, order: int = 48) -> np.ndarray:
    """Exterior kernel mass ``T(x)`` for interior points ``x``.

    Closed form on intervals; on rectangles the radial integral is done
    analytically and the angular one by Gauss-Legendre on each of the four
    wall sectors.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if domain.dim == 1:
        pts = pts.reshape(-1, 1)
    d = domain.distance_to_boundary(pts)
    if np.any(d <= 0):
        raise ValueError("tail weight is singular on or outside the boundary")
    if domain.dim == 1:
        (a, b), = domain.bounds
        t = pts[:, 0]
        return ((t - a) ** -sp + (b - t) ** -sp) / sp
    (a, b), (c, e) = domain.bounds
    gx, gw = np.polynomial.legendre.leggauss(order)
    out = np.empty(pts.shape[0])
    for k, (px, py) in enumerate(pts):
        # corner angles split the circle into four sectors, one wall each
        corners = np.sort(np.mod(np.arctan2(
            np.array([c - py, c - py, e - py, e - py]),
            np.array([a - px, b - px, b - px, a - px])), 2 * np.pi))
        edges = np.concatenate([corners, [corners[0] + 2 * np.pi]])
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            phi = 0.5 * (hi - lo) * gx + 0.5 * (hi + lo)
            cx, cy = np.cos(phi), np.sin(phi)
            with np.errstate(divide="ignore"):
                rho = np.minimum(
                    np.where(cx > 0, (b - px) / cx, np.where(cx < 0, (a - px) / cx, np.inf)),
                    np.where(cy > 0, (e - py) / cy, np.where(cy < 0, (c - py) / cy, np.inf)))
            total += 0.5 * (hi - lo) * np.dot(gw, rho**-sp)
        out[k] = total / sp
    return out


@dataclass(eq=False)
class KernelContext:
    """Precomputed weighted kernel matrix and exterior weights for one grid."""

    grid: Grid
    s: float
    p: float
    backend: str = "auto"
    K: np.ndarray = field(init=False, repr=False)
    tau: np.ndarray = field(init=False, repr=False)
    T: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = self.grid
        sp = self.s * self.p
        if g.n <= sp:
            raise ValueError("need n > s*p")
        dist = pdist(g.nodes)
        K = squareform(dist ** -(g.n + sp))
        K *= np.outer(g.weights, g.weights)
        self.K = np.ascontiguousarray(K)
        self.T = tail_weight(g.domain, g.nodes, sp)
        self.tau = 2.0 * g.weights * self.T
        self.K.setflags(write=False)
        self._core = get_backend(self.backend)
        self.warn_nonsmooth = self.p < 2

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def sp(self) -> float:
        return self.s * self.p

    def _vals(self, u) -> np.ndarray:
        if isinstance(u, GridFunction):
            if u.grid is not self.grid:
                raise ValueError("grid function lives on a different grid")
            return np.ascontiguousarray(u.values)
        return np.ascontiguousarray(u, dtype=float)

    def gagliardo_p(self, u) -> float:
        """p-th power of the discrete Gagliardo seminorm."""
        return self._core.energy(self.K, self.tau, self._vals(u), self.p)

    def weak_apply(self, u, v) -> float:
        """Discrete pairing of the fractional p-Laplacian of ``u`` with ``v``."""
        return self._core.weak_apply(self.K, self.tau, self._vals(u), self._vals(v), self.p)

    def operator_gradient(self, u) -> np.ndarray:
        """Integrated nodal gradient of ``(1/p) gagliardo_p``: ``g . v = weak_apply(u, v)``."""
        if self.warn_nonsmooth:
            warnings.warn("p < 2: operator gradient is not Lipschitz", RuntimeWarning, stacklevel=2)
            self.warn_nonsmooth = False
        return self._core.gradient(self.K, self.tau, self._vals(u), self.p)

    def hessian(self, u) -> np.ndarray:
        """Hessian of ``(1/p) gagliardo_p``; constant for p = 2."""
        if self.p == 2.0:
            return self.stiffness
        return self._core.hessian(self.K, self.tau, self._vals(u), self.p)

    @cached_property
    def stiffness(self) -> np.ndarray:
        """The p = 2 form matrix (Hessian of half the quadratic seminorm)."""
        A = -2.0 * np.array(self.K)
        A[np.diag_indices_from(A)] = 2.0 * self.K.sum(axis=1) + self.tau
        A.setflags(write=False)
        return A

    @cached_property
    def stiffness_factor(self):
        """Cholesky factor of :attr:`stiffness` for repeated solves."""
        return cho_factor(self.stiffness, lower=True)
