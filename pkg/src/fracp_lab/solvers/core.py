"""Safeguarded Newton / preconditioned-descent iterations on nodal vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lu_factor, lu_solve

ARMIJO_C = 1e-4
MIN_STEP = 1e-14


@dataclass
class IterResult:
    x: np.ndarray
    iterations: int
    grad_norm: float
    energy: float
    converged: bool
    status: str
    tol: float = 0.0


def _spd_direction(Hm, g, shift, shifts=(0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0)):
    """``-(H + mu S)^{-1} g`` for the smallest trial ``mu`` giving a Cholesky factor."""
    if shift is None:
        shifts = (0.0,)
        scale = 0.0
    else:
        scale = abs(np.trace(Hm)) / max(np.trace(shift), 1e-300) or 1.0
    for mu in shifts:
        try:
            M = Hm if mu == 0.0 else Hm + (mu * scale) * shift
            c = cho_factor(M, lower=True, check_finite=False)
        except LinAlgError:
            continue
        d = -cho_solve(c, g, check_finite=False)
        if np.all(np.isfinite(d)):
            return d
    return None


def minimize(energy, grad, x0, *, norm, tol, budget=200, hess=None, metric=None,
             shift=None) -> IterResult:
    """Minimize ``energy`` from ``x0``.

    Directions: Newton on ``hess`` (regularized by ``shift`` if not positive
    definite), else the preconditioned gradient ``-metric(x, g)``.  Steps
    follow Armijo backtracking; once the energy stops resolving the
    decrease, a step is still accepted when it lowers the residual norm.
    ``tol`` may be a number or a callable ``tol(energy, x)``.
    """
    x = np.array(x0, dtype=float)
    tol_of = tol if callable(tol) else (lambda e, x, t=tol: t)
    e = energy(x)
    g = grad(x)
    gn = norm(g)
    status = "budget"
    it = 0
    for it in range(1, budget + 1):
        if gn <= tol_of(e, x):
            status = "converged"
            it -= 1
            break
        dirs = []
        if hess is not None:
            d = _spd_direction(hess(x), g, shift)
            if d is not None and np.dot(g, d) < 0:
                dirs.append(d)
        if metric is not None:
            dirs.append(-metric(x, g))
        moved = False
        for d in dirs:
            slope = float(np.dot(g, d))
            if not slope < 0:
                continue
            alpha = 1.0
            while alpha >= MIN_STEP:
                xn = x + alpha * d
                en = energy(xn)
                if en <= e + ARMIJO_C * alpha * slope:
                    break
                alpha *= 0.5
            else:
                # energy differences below rounding: fall back to residual decrease
                xn = x + d
                en = energy(xn)
                if norm(grad(xn)) >= gn:
                    continue
            x, e = xn, en
            g = grad(x)
            gn = norm(g)
            moved = True
            break
        if not moved:
            status = "stalled"
            break
    else:
        if gn <= tol_of(e, x):
            status = "converged"
    return IterResult(x, it, float(gn), float(e), status == "converged", status,
                      float(tol_of(e, x)))


def newton_root(grad, hess, x0, *, norm, tol, budget=100) -> IterResult:
    """Damped Newton on ``grad(x) = 0`` with residual-norm backtracking.

    Used to polish saddle points, where the Hessian is indefinite.
    """
    x = np.array(x0, dtype=float)
    g = grad(x)
    gn = norm(g)
    status = "budget"
    it = 0
    for it in range(1, budget + 1):
        if gn <= tol:
            status = "converged"
            it -= 1
            break
        try:
            d = -lu_solve(lu_factor(hess(x), check_finite=False), g, check_finite=False)
        except (LinAlgError, ValueError):
            status = "singular"
            break
        if not np.all(np.isfinite(d)):
            status = "singular"
            break
        alpha = 1.0
        while alpha >= 1e-10:
            xn = x + alpha * d
            gnew = grad(xn)
            nn = norm(gnew)
            if nn < (1 - 1e-4 * alpha) * gn:
                break
            alpha *= 0.5
        else:
            status = "stalled"
            break
        x, g, gn = xn, gnew, nn
    else:
        if gn <= tol:
            status = "converged"
    return IterResult(x, it, float(gn), float("nan"), status == "converged", status, float(tol))
