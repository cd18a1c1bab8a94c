"""Energy functionals, their integrated nodal gradients and Sobolev-constant estimates.

Conventions: ``|u|_r^r`` is the discrete integral ``sum_i w_i |u_i|^r`` and
``||u||^p`` is :meth:`KernelContext.gagliardo_p`.  Gradients are integrated
(they carry the quadrature weights) so that ``g . v`` is the directional
derivative along ``v``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .bubbles import decay_rate, profile_U
from .grid import Domain, GridFunction, ProblemParams, build_grid
from .kernel import KernelContext
from .radial import radial_gagliardo_p, radial_lr_power, seminorm_tail_exponents

TAGS = ("E_Q", "I_tilde", "I_full", "I_hat")


@dataclass(eq=False)
class Problem:
    """Parameters plus the kernel context of one grid."""

    params: ProblemParams
    ctx: KernelContext

    @classmethod
    def build(cls, params: ProblemParams, domain: Domain, N: int, backend: str = "auto") -> "Problem":
        grid = build_grid(domain, N)
        if grid.n != params.n:
            raise ValueError("domain dimension differs from params.n")
        return cls(params, KernelContext(grid, params.s, params.p, backend))

    @property
    def grid(self):
        return self.ctx.grid

    @property
    def w(self) -> np.ndarray:
        return self.ctx.grid.weights

    @property
    def lam(self) -> float:
        return self.params.lam

    def with_lambda(self, lam: float) -> "Problem":
        return Problem(self.params.with_lambda(lam), self.ctx)

    def values(self, u) -> np.ndarray:
        return self.ctx._vals(u)

    def wrap(self, values) -> GridFunction:
        return GridFunction(self.grid, np.asarray(values, dtype=float))


@dataclass(frozen=True)
class EnergyReport:
    seminorm_p: float
    lq_term: float
    crit_term: float
    value: float
    which: str

    @classmethod
    def make(cls, p, seminorm_p, lq_term, crit_term, which):
        if which not in TAGS:
            raise ValueError(f"unknown energy tag {which!r}")
        return cls(float(seminorm_p), float(lq_term), float(crit_term),
                   float(seminorm_p / p - lq_term - crit_term), which)

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _lam(prob, lam):
    lam = prob.lam if lam is None else float(lam)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return lam


def _pos(x):
    return np.maximum(x, 0.0)


def _power_sum(w, a, r):
    return float(np.dot(w, a**r))


# --- nonlinearity ---------------------------------------------------------

def f_lambda(t, lam, q, p_star):
    """``lam (t+)^{q-1} + (t+)^{p*-1}``."""
    tp = _pos(np.asarray(t, dtype=float))
    return lam * tp ** (q - 1) + tp ** (p_star - 1)


def F_lambda(t, lam, q, p_star):
    tp = _pos(np.asarray(t, dtype=float))
    return lam * tp**q / q + tp**p_star / p_star


def df_lambda(t, lam, q, p_star):
    """Derivative of :func:`f_lambda` in t (infinite at 0+, returned as a large finite number)."""
    tp = _pos(np.asarray(t, dtype=float))
    with np.errstate(divide="ignore"):
        d = lam * (q - 1) * np.where(tp > 0, tp, np.inf) ** (q - 2) + (p_star - 1) * tp ** (p_star - 2)
    return np.where(tp > 0, d, 0.0)


# --- functionals ----------------------------------------------------------

def energy_Q(prob: Problem, u, lam=None) -> EnergyReport:
    """Energy whose critical points solve the purely concave problem."""
    lam = _lam(prob, lam)
    pr = prob.params
    v = prob.values(u)
    return EnergyReport.make(pr.p, prob.ctx.gagliardo_p(v),
                             lam / pr.q * _power_sum(prob.w, _pos(v), pr.q), 0.0, "E_Q")


def energy_tilde(prob: Problem, u, lam=None) -> EnergyReport:
    lam = _lam(prob, lam)
    pr = prob.params
    v = prob.values(u)
    vp = _pos(v)
    return EnergyReport.make(pr.p, prob.ctx.gagliardo_p(v),
                             lam / pr.q * _power_sum(prob.w, vp, pr.q),
                             _power_sum(prob.w, vp, pr.p_star) / pr.p_star, "I_tilde")


def energy_I(prob: Problem, u, lam=None) -> EnergyReport:
    lam = _lam(prob, lam)
    pr = prob.params
    v = prob.values(u)
    a = np.abs(v)
    return EnergyReport.make(pr.p, prob.ctx.gagliardo_p(v),
                             lam / pr.q * _power_sum(prob.w, a, pr.q),
                             _power_sum(prob.w, a, pr.p_star) / pr.p_star, "I_full")


def F_hat(t, cap, lam, q, p_star):
    """Primitive of the nonlinearity frozen at ``f(cap)`` above ``cap``."""
    t = np.asarray(t, dtype=float)
    cap = np.asarray(cap, dtype=float)
    below = F_lambda(np.minimum(t, cap), lam, q, p_star)
    above = F_lambda(cap, lam, q, p_star) + f_lambda(cap, lam, q, p_star) * (t - cap)
    return np.where(t > cap, above, below)


def f_hat(t, cap, lam, q, p_star):
    t = np.asarray(t, dtype=float)
    return f_lambda(np.minimum(t, cap), lam, q, p_star)


def energy_hat(prob: Problem, u, cap, lam=None) -> EnergyReport:
    """Energy with the nonlinearity frozen above ``cap``.

    The whole primitive term is stored in ``lq_term`` and ``crit_term`` is 0.
    """
    lam = _lam(prob, lam)
    pr = prob.params
    c = prob.values(cap)
    if np.any(c <= 0):
        raise ValueError("cap must be positive at every node")
    v = prob.values(u)
    prim = float(np.dot(prob.w, F_hat(v, c, lam, pr.q, pr.p_star)))
    return EnergyReport.make(pr.p, prob.ctx.gagliardo_p(v), prim, 0.0, "I_hat")


def grad_Q(prob: Problem, u, lam=None) -> np.ndarray:
    lam = _lam(prob, lam)
    v = prob.values(u)
    return prob.ctx._core.gradient(prob.ctx.K, prob.ctx.tau, v, prob.params.p) \
        - prob.w * lam * _pos(v) ** (prob.params.q - 1)


def grad_tilde(prob: Problem, u, lam=None) -> np.ndarray:
    lam = _lam(prob, lam)
    pr = prob.params
    v = prob.values(u)
    return prob.ctx._core.gradient(prob.ctx.K, prob.ctx.tau, v, pr.p) \
        - prob.w * f_lambda(v, lam, pr.q, pr.p_star)


def grad_I(prob: Problem, u, lam=None) -> np.ndarray:
    lam = _lam(prob, lam)
    pr = prob.params
    v = prob.values(u)
    a = np.abs(v)
    return prob.ctx._core.gradient(prob.ctx.K, prob.ctx.tau, v, pr.p) \
        - prob.w * np.sign(v) * (lam * a ** (pr.q - 1) + a ** (pr.p_star - 1))


def grad_hat(prob: Problem, u, cap, lam=None) -> np.ndarray:
    lam = _lam(prob, lam)
    pr = prob.params
    v = prob.values(u)
    return prob.ctx._core.gradient(prob.ctx.K, prob.ctx.tau, v, pr.p) \
        - prob.w * f_hat(v, prob.values(cap), lam, pr.q, pr.p_star)


def nehari_residual(prob: Problem, u, lam=None) -> float:
    lam = _lam(prob, lam)
    pr = prob.params
    v = prob.values(u)
    vp = _pos(v)
    return prob.ctx.gagliardo_p(v) - lam * _power_sum(prob.w, vp, pr.q) \
        - _power_sum(prob.w, vp, pr.p_star)


def stability_margin(prob: Problem, u, lam=None) -> float:
    lam = _lam(prob, lam)
    pr = prob.params
    v = prob.values(u)
    if np.any(v < 0):
        raise ValueError("stability margin is defined for nonnegative u")
    return (pr.p - 1) * prob.ctx.gagliardo_p(v) - (pr.q - 1) * lam * _power_sum(prob.w, v, pr.q) \
        - (pr.p_star - 1) * _power_sum(prob.w, v, pr.p_star)


def dual_norm(prob: Problem, g) -> float:
    """Discrete L2 norm of the nodal density ``g / w`` (mesh-consistent gradient size)."""
    g = np.asarray(g, dtype=float)
    return float(math.sqrt(np.dot(g, g / prob.w)))


# --- Sobolev constant -------------------------------------------------------

@dataclass(frozen=True)
class SobolevEstimate:
    value: float
    raw: float
    rmax: float
    grading: float
    error_flag: bool
    error_estimate: float = 0.0

    def to_dict(self):
        return asdict(self)


def _quotient(n, s, p, rmax, grading, extrapolate, eps=1.0):
    U = lambda r: eps ** (-(n - s * p) / p) * profile_U(np.asarray(r) / eps, n, s, p)  # noqa: E731
    p_star = n * p / (n - s * p)
    a = decay_rate(n, s, p)
    sem = radial_gagliardo_p(U, n, s, p, rmax, grading=grading, rmin=1e-6 * eps,
                             tail_exponent=seminorm_tail_exponents(n, s, p) if extrapolate else None)
    crit = radial_lr_power(U, n, p_star, rmax, grading=grading, rmin=1e-6 * eps,
                           tail_exponent=n / (p - 1) if extrapolate else None)
    value = sem.value / crit.value ** (p / p_star)
    raw = sem.raw / crit.raw ** (p / p_star)
    rel_err = sem.error_estimate / sem.value + crit.error_estimate / crit.value
    return value, raw, rel_err


def sobolev_constant(params: ProblemParams, rmax: float = 1e10, grading: float = 1.05,
                     eps: float = 1.0) -> SobolevEstimate:
    """Rayleigh quotient ``[U]^p / |U|_{p*}^p`` of the extremal profile on R^n.

    Integrals are truncated at ``rmax`` and Richardson-extrapolated with the
    known tail exponents.  The flag is raised when the estimate at
    ``rmax/10`` differs by more than 5%.
    """
    n, s, p = params.n, params.s, params.p
    value, raw, rel = _quotient(n, s, p, rmax * eps, grading, True, eps)
    coarse, _, _ = _quotient(n, s, p, rmax * eps / 10, grading, True, eps)
    flag = abs(value - coarse) / value > 0.05 or not value > 0
    return SobolevEstimate(value, raw, rmax, grading, bool(flag), rel * value)


def critical_level(prob: Problem, u_min, S_est: SobolevEstimate | float | None, lam=None) -> float:
    """``I_tilde(u_min) + (s/n) S^{n/(sp)}``."""
    if S_est is None:
        raise ValueError("a Sobolev constant estimate is required")
    S = S_est.value if isinstance(S_est, SobolevEstimate) else float(S_est)
    pr = prob.params
    return energy_tilde(prob, u_min, lam).value + pr.s / pr.n * S ** (pr.n / pr.sp)
