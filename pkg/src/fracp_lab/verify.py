"""Numerical checks of the elementary inequalities and qualitative principles."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bubbles import FitResult, cutoff_eta_delta, find_theta
from .energy import Problem, f_lambda
from .grid import GridFunction, ProblemParams

SLACK = 1e-8


@dataclass
class Verdict:
    """JSON-serializable outcome of a verifier."""

    passed: bool
    witnesses: list = field(default_factory=list)
    fit: FitResult | None = None
    values: dict = field(default_factory=dict)

    def to_dict(self):
        return {"pass": bool(self.passed), "witnesses": self.witnesses,
                "fit": None if self.fit is None else self.fit.to_dict(),
                "values": self.values}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=float)


# --- beta_0 --------------------------------------------------------------

def beta0(lam: float, lam2: float, M: float, q: float, p_star: float,
          step: float = 1e-3, samples: int = 4000) -> float:
    """Largest lattice beta with ``f_lam(beta t) <= f_lam2(t)`` for t on a dense grid of (0, M].

    Returns 1.0 when no beta > 1 passes (the degenerate or under-resolved case).
    """
    if not (0 < lam <= lam2) or M <= 0:
        raise ValueError("need 0 < lam <= lam2 and M > 0")
    t = np.concatenate([np.geomspace(M * 1e-12, M, samples), np.linspace(M / samples, M, samples)])
    rhs = f_lambda(t, lam2, q, p_star)

    def ok(beta):
        return bool(np.all(f_lambda(beta * t, lam, q, p_star) <= rhs * (1 + 1e-15)))

    k = 0
    while ok(1.0 + (k + 1) * step):
        k += 1
        if k > 10**6:
            break
    return 1.0 + k * step


def beta0_small_t_bound(lam, lam2, q) -> float:
    """Admissible range of the small-t regime, ``((lam2+lam)/(2 lam))^{1/(q-1)}``."""
    return ((lam2 + lam) / (2 * lam)) ** (1.0 / (q - 1))


# --- elementary inequality ---------------------------------------------------

def _f_elem(t, p):
    """``|1-t|^p - 1 - t^p + p t`` without cancellation at small or large t."""
    t = np.asarray(t, dtype=float)
    out = np.abs(1.0 - t) ** p - 1.0 - t**p + p * t
    small = t <= 1e-2
    if np.any(small):
        ts = t[small]
        acc = np.zeros_like(ts)
        coef = 1.0
        for k in range(1, 14):
            coef *= (p - k + 1) / k
            if k >= 2:
                acc += coef * (-ts) ** k
        out[small] = acc - ts**p
    large = t > 1e2
    if np.any(large):
        tl = t[large]
        out[large] = tl**p * np.expm1(p * np.log1p(-1.0 / tl)) - 1.0 + p * tl
    return out


def elementary_C(p: float, gamma: float, seed: int = 0, pairs: int = 10**4):
    """Best constant C with ``|a-b|^p <= a^p + b^p - p a b^{p-1} + C a^gamma b^{p-gamma}``.

    Returns ``(C, Verdict)``; the verdict records random-pair violations.
    For p = 2 the defect ``f`` vanishes identically and C = 0 exactly.
    """
    if p < 2 or not 0 < gamma <= 2:
        raise ValueError("need p >= 2 and gamma in (0, 2]")
    if p == 2.0:
        C = 0.0
    else:
        t = np.geomspace(1e-12, 1e12, 200001)
        vals = _f_elem(t, p) / t**gamma
        k = int(np.argmax(vals))
        from scipy.optimize import minimize_scalar
        lo, hi = t[max(k - 1, 0)], t[min(k + 1, t.size - 1)]
        res = minimize_scalar(lambda x: -float(_f_elem(np.array([x]), p)[0]) / x**gamma, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14 * hi})
        C = max(0.0, float(vals[k]), float(-res.fun))
    rng = np.random.default_rng(seed)
    a = np.exp(rng.uniform(-6, 6, pairs))
    b = np.exp(rng.uniform(-6, 6, pairs))
    lhs = np.abs(a - b) ** p
    rhs = a**p + b**p - p * a * b ** (p - 1) + C * a**gamma * b ** (p - gamma)
    scale = a**p + b**p
    bad = np.nonzero(lhs > rhs + 1e-12 * scale)[0]
    wit = [{"a": float(a[i]), "b": float(b[i]), "excess": float(lhs[i] - rhs[i])} for i in bad[:5]]
    return C, Verdict(bad.size == 0, wit, values={"C": C, "violations": int(bad.size)})


# --- comparison principle ----------------------------------------------------

def check_comparison(prob: Problem, u, v) -> Verdict:
    """Hypothesis: the operator pairings of u dominate those of v on every nodal basis function.

    The conclusion ``u >= v - 1e-8`` is asserted only when the hypothesis holds.
    """
    ctx = prob.ctx
    uu, vv = prob.values(u), prob.values(v)
    gu = ctx._core.gradient(ctx.K, ctx.tau, uu, prob.params.p)
    gv = ctx._core.gradient(ctx.K, ctx.tau, vv, prob.params.p)
    scale = max(float(np.max(np.abs(gu))), float(np.max(np.abs(gv))), 1e-300)
    hyp_gap = gu - gv
    hypothesis = bool(np.all(hyp_gap >= -1e-12 * scale))
    concl_gap = uu - vv
    conclusion = bool(np.all(concl_gap >= -SLACK))
    wit = []
    if not hypothesis:
        i = int(np.argmin(hyp_gap))
        wit.append({"kind": "hypothesis", "node": i, "gap": float(hyp_gap[i])})
    if hypothesis and not conclusion:
        i = int(np.argmin(concl_gap))
        wit.append({"kind": "conclusion", "node": i, "gap": float(concl_gap[i])})
    passed = conclusion if hypothesis else True
    return Verdict(passed, wit, values={"hypothesis": hypothesis, "conclusion": conclusion})


# --- boundary decay --------------------------------------------------------

def boundary_decay_fit(u: GridFunction, s: float, band: float = 0.1):
    """Fit ``log u`` against ``log d`` on nodes with ``d < band * diam``.

    Returns ``(FitResult, (min, max) of u / d^s)``.
    """
    g = u.grid
    vals = u.values
    if np.any(vals <= 0):
        raise ValueError("boundary decay fit needs u > 0 at every node")
    d = g.d_omega
    mask = d < band * g.domain.diameter
    if mask.sum() < 3:
        raise ValueError("too few nodes in the boundary band")
    fit = FitResult.fit(d[mask], vals[mask], s)
    ratio = vals / d**s
    return fit, (float(ratio.min()), float(ratio.max()))


# --- cut-off convergence -------------------------------------------------------

def admissible_delta(prob: Problem, theta: float, factor: float = 5.0) -> float:
    """Largest delta with the ball of radius ``factor*theta*delta`` inside the domain."""
    dist = min(min(-lo, hi) for lo, hi in prob.grid.domain.bounds)
    if dist <= 0:
        raise ValueError("the origin is not inside the domain")
    return dist / (factor * theta)


def _check_ball(prob: Problem, delta: float, theta: float):
    if delta > admissible_delta(prob, theta) * (1 + 1e-12):
        raise ValueError(f"ball of radius 5*theta*delta={5 * theta * delta:g} is not inside the domain")


def _eta(prob: Problem, delta, theta):
    pts = prob.grid.nodes
    return cutoff_eta_delta(pts if prob.params.n == 2 else pts[:, 0], delta, theta)


def cutoff_values(prob: Problem, u, deltas, theta: float | None = None) -> np.ndarray:
    """``||eta_delta u - u||^p`` for each delta."""
    pr = prob.params
    theta = find_theta(pr.n, pr.s, pr.p) if theta is None else theta
    uu = prob.values(u)
    out = []
    for delta in deltas:
        _check_ball(prob, delta, theta)
        eta = _eta(prob, delta, theta)
        out.append(prob.ctx.gagliardo_p(eta * uu - uu))
    return np.array(out)


def cutoff_convergence(prob: Problem, u, deltas=None, theta: float | None = None) -> Verdict:
    """Decay of ``||eta_delta u - u||^p`` along a delta sweep, fitted against ``delta^{n-sp}``.

    The default sweep is ``{1, 1/2, 1/4, 1/8}`` times the largest admissible delta.
    """
    pr = prob.params
    theta = find_theta(pr.n, pr.s, pr.p) if theta is None else theta
    if deltas is None:
        deltas = admissible_delta(prob, theta) * 2.0 ** -np.arange(4)
    deltas = np.sort(np.asarray(deltas, dtype=float))[::-1]
    vals = cutoff_values(prob, u, deltas, theta)
    decreasing = bool(np.all(np.diff(vals) <= 1e-14 * max(vals.max(), 1e-300)))
    fit = None
    if np.all(vals > 0):
        fit = FitResult.fit(deltas, vals, pr.n - pr.sp)
    return Verdict(decreasing, [] if decreasing else [{"values": vals.tolist()}], fit,
                   values={"deltas": deltas.tolist(), "norms": vals.tolist(), "theta": theta})


def cutoff_energy_bound(prob: Problem, v, deltas=None, theta: float | None = None,
                        tol: float = 0.2) -> Verdict:
    """Growth of ``||v eta_delta||^p - ||v||^p`` along a delta sweep.

    The excess splits into the first-order pairing ``-p <(-Delta)_p v, (1-eta) v>``
    (of order ``delta^n`` for bounded data) and a nonnegative convexity
    remainder.  The remainder carries the ``delta^{n-sp}`` rate; it is
    fitted and must shrink along the sweep.
    """
    pr = prob.params
    theta = find_theta(pr.n, pr.s, pr.p) if theta is None else theta
    if deltas is None:
        deltas = admissible_delta(prob, theta) * 2.0 ** -np.arange(4)
    deltas = np.sort(np.asarray(deltas, dtype=float))[::-1]
    vv = prob.values(v)
    base = prob.ctx.gagliardo_p(vv)
    excess, cross = [], []
    for delta in deltas:
        _check_ball(prob, delta, theta)
        eta = _eta(prob, delta, theta)
        excess.append(prob.ctx.gagliardo_p(eta * vv) - base)
        cross.append(-pr.p * prob.ctx.weak_apply(vv, (1.0 - eta) * vv))
    excess, cross = np.array(excess), np.array(cross)
    rem = excess - cross
    target = pr.n - pr.sp
    fit = FitResult.fit(deltas, rem, target) if np.all(rem > 0) else None
    shrinking = bool(np.all(np.diff(rem) <= 0))
    ok = shrinking and fit is not None and fit.rel_dev <= tol
    wit = [] if ok else [{"remainder": rem.tolist()}]
    return Verdict(ok, wit, fit, values={"deltas": deltas.tolist(), "excess": excess.tolist(),
                                         "first_order": cross.tolist(), "remainder": rem.tolist(),
                                         "bound_ratio": (excess / deltas**target).tolist()})


# --- k-window ------------------------------------------------------------

def k_window(params: ProblemParams):
    """Open interval of k in (0, p-1) with ``A < k B``; None when empty.

    ``A = n - (n-sp)q/p`` and ``B = (n-sp)/(p-1) - A``.
    """
    n, sp, p, q = params.n, params.sp, params.p, params.q
    A = n - (n - sp) * q / p
    B = (n - sp) / (p - 1) - A
    if B <= 0:
        return None
    lo = max(0.0, A / B)
    hi = p - 1
    return (lo, hi) if lo < hi else None


def k_window_threshold(params: ProblemParams) -> bool:
    """Closed-form nonemptiness test ``n > sp(q+1)/(q+1-p)`` (with ``q > p-1``)."""
    n, sp, p, q = params.n, params.sp, params.p, params.q
    return q + 1 - p > 0 and n > sp * (q + 1) / (q + 1 - p)


def log_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


__all__ = [
    "FitResult", "Verdict", "admissible_delta", "beta0", "beta0_small_t_bound", "boundary_decay_fit",
    "check_comparison", "cutoff_convergence", "cutoff_energy_bound", "cutoff_values",
    "elementary_C", "k_window", "k_window_threshold", "log_slope",
]
