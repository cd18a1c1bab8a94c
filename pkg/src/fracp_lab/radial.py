"""Radial reduction of the fractional kernel and seminorms of radial profiles.

For a radial ``u`` on R^n,

    [u]^p = |S^{n-1}| int_0^inf int_0^inf |u(r) - u(rho)|^p K_n(r, rho)
                                             r^{n-1} rho^{n-1} dr drho,

with ``K_n(r, rho) = int_{S^{n-1}} |r e_1 - rho w|^{-(n+sp)} dw``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, hyp2f1


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def radial_kernel(n: int, r, rho, sp: float):
    """Angular average ``K_n(r, rho)``.

    n = 1 is the two-point sum; n >= 2 uses
    ``|S^{n-1}| R^{-2v} 2F1(v, v - n/2 + 1; n/2; (m/R)^2)`` with
    ``v = (n+sp)/2``, ``R = max(r, rho)``, ``m = min(r, rho)``.
    """
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(r <= 0) or np.any(rho <= 0):
        raise ValueError("radii must be positive")
    if np.any(r == rho):
        raise ValueError("radial kernel is singular at r == rho")
    a = n + sp
    if n == 1:
        return np.abs(r - rho) ** -a + (r + rho) ** -a
    v = 0.5 * a
    big = np.maximum(r, rho)
    t2 = (np.minimum(r, rho) / big) ** 2
    return sphere_area(n) * big ** (-2 * v) * hyp2f1(v, v - n / 2 + 1, n / 2, t2)


def ball_tail(n: int, rho, R: float, sp: float):
    """``int_R^inf K_n(r, rho) r^{n-1} dr`` for ``rho < R``.

    This is the exterior kernel mass ``int_{|y|>R} |x-y|^{-(n+sp)} dy`` at
    any ``|x| = rho``.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho >= R):
        raise ValueError("ball tail needs rho < R")
    if n == 1:
        return ((R - rho) ** -sp + (R + rho) ** -sp) / sp
    # polar coordinates around the point: mass = int_S d(w)^{-sp}/sp dw with
    # d(w) the distance to the sphere along w; reduce to the polar angle.
    x, wx = np.polynomial.legendre.leggauss(96)
    th = 0.5 * np.pi * (x + 1.0)
    c = np.cos(th)
    wt = 0.5 * np.pi * wx * np.sin(th) ** (n - 2)
    out = np.empty(rho.shape)
    flat = out.reshape(-1)
    for k, rr in enumerate(rho.reshape(-1)):
        dist = -rr * c + np.sqrt(R * R - rr * rr * (1 - c * c))
        flat[k] = sphere_area(n - 1) * np.dot(wt, dist**-sp) / sp
    return out


@dataclass(frozen=True)
class RadialSeminorm:
    value: float
    raw: float
    rmax: float
    error_estimate: float = 0.0


def _panels(points, order):
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = points[:-1], points[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes, weights


def graded_breakpoints(rmin, rmax, knots=(), grading=1.05, span=0.3, extra=()):
    """Breakpoints geometric away from 0, refined around each knot.

    Around every knot ``k`` the mesh is graded from ``k`` outward with
    ratio ``grading`` until the local spacing reaches the base spacing.
    """
    base = np.exp(np.arange(math.log(rmin), math.log(rmax), math.log(1 + 8 * (grading - 1))))
    pts = [np.array([0.0, rmin, rmax, *extra]), base]
    for k in knots:
        if not 0 < k < rmax:
            continue
        h0 = 1e-4 * k
        steps = h0 * (grading ** np.arange(400) - 1) / (grading - 1)
        steps = steps[steps < span * k]
        pts.append(k + steps)
        pts.append(k - steps)
    allp = np.unique(np.concatenate(pts))
    return allp[(allp >= 0) & (allp <= rmax)]


def radial_gagliardo_p(profile, n: int, s: float, p: float, rmax: float, *,
                       knots=(), support: float | None = None,
                       tail_exponent: float | None = None,
                       rmin: float = 1e-6, order: int = 8, grading: float = 1.05,
                       diag_levels: int = 24) -> RadialSeminorm:
    """p-th power of the Gagliardo seminorm of a radial profile on R^n.

    ``support``: the profile vanishes for r >= support; pairs with one point
    outside are handled exactly through :func:`ball_tail`, and ``rmax`` must
    cover the support.  Otherwise ``tail_exponent`` (decay rate of the
    truncation error in ``rmax``) drives a Richardson extrapolation.
    """
    sp = s * p
    if support is not None:
        if support > rmax:
            raise ValueError("rmax does not cover the profile support")
        rmax = support
        knots = tuple(knots) + (support,)
    bps = graded_breakpoints(rmin, rmax, knots, grading, extra=rmax / 2.0 ** np.arange(1, 7))
    rn, rw = _panels(bps, order)
    rn, rw = rn.ravel(), rw.ravel()
    u_r = np.asarray(profile(rn), dtype=float)
    gx, gw = np.polynomial.legendre.leggauss(order)
    outer = np.empty(rn.size)
    for k, r in enumerate(rn):
        # inner nodes: all full panels below r plus a dyadic grading onto r
        j = np.searchsorted(bps, r) - 1
        full = slice(0, j * order)
        b = bps[j]
        dy = b + (r - b) * (1.0 - 2.0 ** -np.arange(diag_levels + 1))
        lo, hi = dy[:-1], dy[1:]
        half = 0.5 * (hi - lo)
        dn = (0.5 * (hi + lo))[:, None] + half[:, None] * gx
        dw = half[:, None] * gw
        rho = np.concatenate([rn[full], dn.ravel()])
        wts = np.concatenate([rw[full], dw.ravel()])
        u_rho = np.concatenate([u_r[full], np.asarray(profile(dn.ravel()), dtype=float)])
        keep = rho < r
        rho, wts, u_rho = rho[keep], wts[keep], u_rho[keep]
        ker = radial_kernel(n, r, rho, sp)
        outer[k] = np.dot(wts, np.abs(u_r[k] - u_rho) ** p * ker * rho ** (n - 1)) * r ** (n - 1)
    area = sphere_area(n)
    contrib = 2.0 * area * rw * outer
    raw = float(np.sum(contrib))
    if support is not None:
        inside = rn < support
        tail = ball_tail(n, rn[inside], support, sp)
        raw += 2.0 * area * float(np.dot(rw[inside], np.abs(u_r[inside]) ** p * tail * rn[inside] ** (n - 1)))
        return RadialSeminorm(raw, raw, rmax)
    if tail_exponent is None:
        return RadialSeminorm(raw, raw, rmax)
    cum = np.cumsum(contrib)
    value, err = _richardson(rn, cum, rmax, tail_exponent)
    return RadialSeminorm(value, raw, rmax, err)


def _richardson(rn, cum, rmax, tau, kappa=2.0):
    """Extrapolate a cumulative integral to R = inf.

    ``tau`` is one exponent or a sequence of distinct exponents; the model
    ``I(R) = I_inf + sum_j c_j R^{-tau_j}`` is fitted exactly on the
    geometric radii ``R, R/kappa, ...``.  The error estimate compares with
    the same fit one level down.
    """
    taus = sorted(set(float(t) for t in np.atleast_1d(tau)))
    m = len(taus)

    def at(R):
        return cum[np.searchsorted(rn, R * (1 - 1e-12)) - 1]

    def fit(R0):
        radii = R0 / kappa ** np.arange(m + 1)
        A = np.ones((m + 1, m + 1))
        for j, t in enumerate(taus):
            A[:, j + 1] = (radii / R0) ** -t
        return float(np.linalg.solve(A, [at(R) for R in radii])[0])

    e1 = fit(rmax)
    e2 = fit(rmax / kappa)
    return e1, float(abs(e1 - e2))


def richardson_levels(tau) -> int:
    return len(set(float(t) for t in np.atleast_1d(tau))) + 2


def seminorm_tail_exponents(n, s, p, terms=3):
    """Truncation exponents of the seminorm of a profile decaying like ``r^{-a}``.

    With ``a = (n-sp)/(p-1)`` the error in ``rmax`` expands in powers
    ``a`` and ``sp + k a`` (k = 0, 1, ...); exponents closer than 1e-2 are
    merged to keep the extrapolation well conditioned.
    """
    a = (n - s * p) / (p - 1)
    out = []
    for t in sorted([a] + [s * p + k * a for k in range(terms)]):
        if not out or t - out[-1] > 1e-2:
            out.append(t)
    return tuple(out)


def radial_lr_power(profile, n: int, r_exp: float, rmax: float, *, knots=(),
                    support: float | None = None, tail_exponent: float | None = None,
                    rmin: float = 1e-6, order: int = 8, grading: float = 1.05):
    """``int_{R^n} |u|^r dx`` for a radial profile; extrapolated like the seminorm."""
    if support is not None:
        rmax = support
        knots = tuple(knots) + (support,)
    bps = graded_breakpoints(rmin, rmax, knots, grading, extra=rmax / 2.0 ** np.arange(1, 7))
    rn, rw = _panels(bps, order)
    rn, rw = rn.ravel(), rw.ravel()
    vals = sphere_area(n) * rw * np.abs(np.asarray(profile(rn), dtype=float)) ** r_exp * rn ** (n - 1)
    raw = float(np.sum(vals))
    if support is not None or tail_exponent is None:
        return RadialSeminorm(raw, raw, rmax)
    value, err = _richardson(rn, np.cumsum(vals), rmax, tail_exponent)
    return RadialSeminorm(value, raw, rmax, err)


def fractional_sobolev_constant_p2(n: int, s: float) -> float:
    """Sharp constant of ``[u]^2 >= S |u|_{2*}^2`` for the unnormalized kernel, p = 2.

    Combines the sharp fractional Sobolev inequality for ``(-Delta)^{s/2}``
    with the Fourier symbol of the unnormalized Gagliardo form.
    """
    # [u]^2 = (2 / C(n,s)) |(-Delta)^{s/2} u|_2^2
    C = 4**s * gamma(n / 2 + s) / (math.pi ** (n / 2) * abs(gamma(-s)))
    S_frac = (2 ** (2 * s) * math.pi**s * gamma((n + 2 * s) / 2) / gamma((n - 2 * s) / 2)
              * (gamma(n / 2) / gamma(n)) ** (2 * s / n))
    return float(2.0 / C * S_frac)
