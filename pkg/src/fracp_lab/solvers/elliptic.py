"""Dirichlet problems, the first eigenpair, the concave problem, minimal solutions and Lambda."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from ..energy import (Problem, energy_Q, energy_tilde, f_lambda, grad_tilde,
                      nehari_residual, stability_margin)
from ..grid import GridFunction, cs0_norm
from .core import minimize, newton_root
from .report import SolveReport

MONOTONE_SLACK = 1e-8


def residual_norm(prob: Problem, g) -> float:
    """Sup norm of the residual density ``g_i / w_i``."""
    return float(np.max(np.abs(np.asarray(g) / prob.w)))


def _as_values(prob: Problem, f) -> np.ndarray:
    if isinstance(f, GridFunction):
        return prob.values(f)
    if np.isscalar(f):
        return np.full(prob.grid.size, float(f))
    return np.asarray(f, dtype=float).reshape(prob.grid.size)


def _stiff_solve(prob: Problem, rhs):
    return cho_solve(prob.ctx.stiffness_factor, rhs, check_finite=False)


def _op_grad(prob: Problem, u):
    ctx = prob.ctx
    return ctx._core.gradient(ctx.K, ctx.tau, np.ascontiguousarray(u), prob.params.p)


def _op_hess(prob: Problem, u):
    return prob.ctx.hessian(np.ascontiguousarray(u))


def _metric(prob: Problem):
    return lambda x, g: _stiff_solve(prob, g)


# --- linear-in-data Dirichlet problem --------------------------------------

def solve_dirichlet(prob: Problem, f, tol: float = 1e-8, budget: int = 500, u0=None) -> SolveReport:
    """Minimize ``(1/p)||u||^p - sum_i w_i f_i u_i``.

    p = 2 is a single Cholesky solve plus one refinement step; otherwise a
    safeguarded Newton iteration started from the rescaled p = 2 solution.
    """
    p = prob.params.p
    fv = _as_values(prob, f)
    if not np.all(np.isfinite(fv)):
        raise ValueError("right-hand side must be finite")
    b = prob.w * fv
    ctx = prob.ctx

    def energy(u):
        return ctx.gagliardo_p(u) / p - float(np.dot(b, u))

    def grad(u):
        return _op_grad(prob, u) - b

    fscale = float(np.max(np.abs(fv)))
    tol_of = lambda e, x=None: tol * max(1.0 + abs(e), fscale)  # noqa: E731
    if not np.any(fv):
        u = np.zeros_like(fv)
        return SolveReport(prob.wrap(u), 0, 0.0, 0.0, True, "dirichlet", tol=tol)
    if p == 2.0:
        u = _stiff_solve(prob, b)
        u = u + _stiff_solve(prob, b - prob.ctx.stiffness @ u)
        e = energy(u)
        gn = residual_norm(prob, grad(u))
        return SolveReport(prob.wrap(u), 1, gn, e, gn <= tol_of(e), "dirichlet", tol=tol_of(e))
    if u0 is None:
        v = _stiff_solve(prob, b)
        num = float(np.dot(b, v))
        u0 = v * (abs(num) / ctx.gagliardo_p(v)) ** (1.0 / (p - 1)) if num != 0 else v
    else:
        u0 = _as_values(prob, u0)
    res = minimize(energy, grad, u0, norm=lambda g: residual_norm(prob, g), tol=tol_of,
                   budget=budget, hess=(lambda u: _op_hess(prob, u)) if p > 2 else None,
                   metric=_metric(prob), shift=ctx.stiffness)
    return SolveReport(prob.wrap(res.x), res.iterations, res.grad_norm, res.energy,
                       res.converged, "dirichlet", res.status, tol=res.tol)


def torsion(prob: Problem, **kw) -> SolveReport:
    rep = solve_dirichlet(prob, 1.0, **kw)
    rep.tag = "torsion"
    return rep


# --- first eigenpair ---------------------------------------------------------

def rayleigh_quotient(prob: Problem, u) -> float:
    v = prob.values(u)
    return prob.ctx.gagliardo_p(v) / float(np.dot(prob.w, np.abs(v) ** prob.params.p))


def first_eigenpair(prob: Problem, tol: float = 1e-10, budget: int = 500):
    """Inverse power iteration ``u <- solve(|u|^{p-2}u)``, renormalized in L^p each step.

    Returns ``(lambda_1, phi_1, report)`` with ``phi_1 > 0`` and ``max phi_1 = 1``.
    """
    p = prob.params.p
    u = prob.values(torsion(prob).solution)
    u = u / u.max()
    lam_old = rayleigh_quotient(prob, u)
    converged = False
    it = 0
    for it in range(1, budget + 1):
        rhs = np.abs(u) ** (p - 2) * u
        nxt = prob.values(solve_dirichlet(prob, rhs, tol=1e-12, u0=u).solution)
        nxt = nxt / np.max(np.abs(nxt))
        lam = rayleigh_quotient(prob, nxt)
        change = np.max(np.abs(nxt - u))
        u = nxt
        if abs(lam - lam_old) <= tol * lam and change <= 10 * tol:
            converged = True
            break
        lam_old = lam
    u = np.abs(u)
    u = u / u.max()
    phi = prob.wrap(u)
    lam1 = rayleigh_quotient(prob, phi)
    g = _op_grad(prob, u) - lam1 * prob.w * u ** (p - 1)
    rep = SolveReport(phi, it, residual_norm(prob, g), lam1, converged, "eigen", tol=tol,
                      diagnostics={"lambda_1": lam1, "min_value": float(u.min())})
    return lam1, phi, rep


# --- concave problem ---------------------------------------------------------

def solve_Q(prob: Problem, lam: float | None = None, tol: float = 1e-10, budget: int = 300) -> SolveReport:
    """Global minimizer of the concave energy, started on the optimal multiple of the torsion."""
    pr = prob.params
    lam = prob.lam if lam is None else float(lam)
    if not lam > 0:
        raise ValueError("the concave problem needs lambda > 0")
    p, q = pr.p, pr.q
    w = prob.w
    e = prob.values(torsion(prob).solution)
    t = (lam * float(np.dot(w, e**q)) / prob.ctx.gagliardo_p(e)) ** (1.0 / (p - q))
    ctx = prob.ctx

    def energy(u):
        return energy_Q(prob, u, lam).value

    def grad(u):
        return _op_grad(prob, u) - w * lam * np.maximum(u, 0.0) ** (q - 1)

    def hess(u):
        H = np.array(_op_hess(prob, u))
        up = np.maximum(u, 0.0)
        with np.errstate(divide="ignore"):
            d = np.where(up > 0, lam * (q - 1) * up ** (q - 2), 0.0)
        H[np.diag_indices_from(H)] -= w * d
        return H

    def tol_of(en, u):
        # relative to the size of the source density
        return tol * max(float(np.max(lam * np.maximum(u, 0.0) ** (q - 1))), 1e-300)

    res = minimize(energy, grad, t * e, norm=lambda g: residual_norm(prob, g),
                   tol=tol_of, budget=budget, hess=hess,
                   metric=_metric(prob), shift=ctx.stiffness)
    v = prob.wrap(res.x)
    return SolveReport(v, res.iterations, res.grad_norm, res.energy, res.converged, "qproblem",
                       res.status, tol=res.tol,
                       diagnostics={"lambda": lam, "min_value": v.min(), "max_value": v.max(),
                                    "cs0_norm": cs0_norm(v, pr.s)})


# --- monotone iteration ----------------------------------------------------

def monotone_iteration(prob: Problem, u0, rhs, cap=None, budget: int = 20000,
                       tol: float = 1e-12, blowup: float = math.inf,
                       res_tol: float = 1e-8) -> SolveReport:
    """Iterate ``u_{j+1} = solve((-Delta)_p^s u = rhs(u_j))``.

    ``rhs`` maps nodal values to nodal source values; with ``cap`` the
    argument is frozen at ``min(u, cap)``.  Stops when the sup change falls
    below ``tol * sup|u|``; the residual density is then checked against
    ``res_tol * sup|rhs|``.  Status is ``converged``, ``diverged``
    (sup u above ``blowup``) or ``inconclusive`` (budget exhausted).
    """
    u = _as_values(prob, u0).copy()
    capv = None if cap is None else _as_values(prob, cap)
    p = prob.params.p
    worst = 0.0
    violations = 0
    status = "inconclusive"
    diff = math.inf
    it = 0
    sups = []

    def src(x):
        return np.asarray(rhs(x if capv is None else np.minimum(x, capv)), dtype=float)

    for it in range(1, budget + 1):
        f = src(u)
        if p == 2.0:
            nxt = _stiff_solve(prob, prob.w * f)
        else:
            nxt = prob.values(solve_dirichlet(prob, f, tol=1e-12, u0=u).solution)
        drop = float(np.max(u - nxt))
        if drop > MONOTONE_SLACK:
            violations += 1
        worst = max(worst, drop)
        diff = float(np.max(np.abs(nxt - u)))
        u = nxt
        sups.append(float(u.max()))
        if not np.all(np.isfinite(u)) or u.max() > blowup:
            status = "diverged"
            break
        if diff <= tol * float(np.max(np.abs(u))):
            status = "converged"
            break
    if status == "inconclusive" and len(sups) > 1 and sups[-1] <= sups[-2]:
        status = "stalled"
    finite = np.all(np.isfinite(u))
    if not finite:
        u = np.nan_to_num(u, nan=0.0, posinf=1e300, neginf=-1e300)
    g = _op_grad(prob, u) - prob.w * src(u) if finite else np.full_like(u, np.inf)
    gn = residual_norm(prob, g)
    tol_abs = res_tol * max(float(np.max(np.abs(src(u)))), 1e-300) if finite else 0.0
    conv = status == "converged" and gn <= tol_abs
    if status == "converged" and not conv:
        status = "converged-iterates"
    return SolveReport(prob.wrap(u), it, gn, float("nan"), conv, "monotone", status, tol=tol_abs,
                       diagnostics={"monotone_violations": violations, "max_drop": worst,
                                    "last_change": diff, "max_value": float(np.max(u))})


# --- minimal solutions -------------------------------------------------------

def blowup_threshold(prob: Problem, factor: float = 1e3) -> float:
    """``factor`` times the weighted-sup scale of the torsion function, as a sup bound."""
    cache = prob.ctx.__dict__.setdefault("_torsion_scale", {})
    if "scale" not in cache:
        e = torsion(prob).solution
        s = prob.params.s
        cache["scale"] = cs0_norm(e, s) * float(np.max(prob.grid.d_omega)) ** s
    return factor * cache["scale"]


def subsolution_scale(prob: Problem, phi, lam: float, kmax: int = 200) -> float:
    """Largest dyadic ``eps`` such that ``eps * phi`` is a nodal subsolution for ``f_lambda``.

    The check is ``weak_apply(eps phi, e_i) <= w_i f_lambda(eps phi_i)`` at every node.
    """
    pr = prob.params
    v = prob.values(phi)
    for k in range(kmax + 1):
        eps = 2.0**-k
        g = _op_grad(prob, eps * v)
        if np.all(g <= prob.w * f_lambda(eps * v, lam, pr.q, pr.p_star)):
            return eps
    raise ValueError("no dyadic subsolution scale found")


def minimal_solution(prob: Problem, lam: float | None = None, tol: float = 1e-12,
                     budget: int = 20000, blowup_factor: float = 1e3,
                     res_tol: float = 1e-8) -> SolveReport:
    """Monotone iteration for the full nonlinearity started from the concave solution."""
    pr = prob.params
    lam = prob.lam if lam is None else float(lam)
    v = solve_Q(prob, lam)
    rhs = lambda x: f_lambda(x, lam, pr.q, pr.p_star)  # noqa: E731
    rep = monotone_iteration(prob, v.solution, rhs, budget=budget, tol=tol,
                             blowup=blowup_threshold(prob, blowup_factor), res_tol=res_tol)
    rep.tag = "minimal"
    u = rep.solution
    if rep.status in ("converged", "converged-iterates") and not rep.converged:
        # polish the last iterate; the linearization at a stable solution is invertible
        pol = newton_root(lambda x: grad_tilde(prob, x, lam),
                          lambda x: _tilde_hessian(prob, x, lam), prob.values(u),
                          norm=lambda g: residual_norm(prob, g),
                          tol=rep.tol, budget=20)
        if pol.converged and np.all(pol.x >= prob.values(v.solution) - MONOTONE_SLACK):
            u = prob.wrap(pol.x)
            rep = SolveReport(u, rep.iterations, pol.grad_norm, 0.0, True, "minimal",
                              "converged", tol=rep.tol, diagnostics=rep.diagnostics)
    if rep.status in ("converged", "converged-iterates"):
        rep.diagnostics.update(minimal_diagnostics(prob, u, lam))
        rep.energy = rep.diagnostics["energy_tilde"]
    rep.diagnostics["lambda"] = lam
    rep.diagnostics["q_solution_min"] = v.solution.min()
    return rep


def minimal_diagnostics(prob: Problem, u, lam) -> dict:
    up = prob.wrap(np.maximum(prob.values(u), 0.0))
    sem = prob.ctx.gagliardo_p(u)
    return {
        "seminorm_p": sem,
        "cs0_norm": cs0_norm(u, prob.params.s),
        "nehari_residual": nehari_residual(prob, u, lam),
        "stability_margin": stability_margin(prob, up, lam),
        "energy_tilde": energy_tilde(prob, u, lam).value,
        "min_value": float(np.min(prob.values(u))),
        "max_value": float(np.max(prob.values(u))),
    }


def _tilde_hessian(prob: Problem, u, lam):
    pr = prob.params
    H = np.array(_op_hess(prob, u))
    up = np.maximum(np.asarray(u), 0.0)
    with np.errstate(divide="ignore"):
        d = np.where(up > 0, lam * (pr.q - 1) * up ** (pr.q - 2)
                     + (pr.p_star - 1) * up ** (pr.p_star - 2), 0.0)
    H[np.diag_indices_from(H)] -= prob.w * d
    return H


# --- extremal parameter --------------------------------------------------------

CLASS = {"converged": "exists", "converged-iterates": "exists", "diverged": "diverged"}


@dataclass
class LambdaBracket:
    lo: float
    hi: float
    history: list = field(default_factory=list)
    verified: bool = True

    @property
    def rel_width(self) -> float:
        return (self.hi - self.lo) / self.lo

    def monotone(self) -> bool:
        """No existing probe lies above a diverged one."""
        ex = [h["lambda"] for h in self.history if h["class"] == "exists"]
        dv = [h["lambda"] for h in self.history if h["class"] == "diverged"]
        return not ex or not dv or max(ex) < min(dv)

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "rel_width": self.rel_width,
                "verified": self.verified, "monotone": self.monotone(),
                "probes": len(self.history), "history": self.history}


def classify(prob: Problem, lam: float, budget: int = 20000, **kw):
    rep = minimal_solution(prob, lam, budget=budget, **kw)
    cls = CLASS.get(rep.status, "inconclusive")
    if cls == "inconclusive":
        rep = minimal_solution(prob, lam, budget=4 * budget, **kw)
        cls = CLASS.get(rep.status, "inconclusive")
    return cls, rep


def estimate_Lambda(prob: Problem, lo: float | None = None, hi: float | None = None,
                    tol: float = 0.05, max_probes: int = 40, budget: int = 20000,
                    start: float = 1.0) -> LambdaBracket:
    """Bisection on lambda with the existence classification of :func:`minimal_solution`.

    Unknown endpoints are found by doubling/halving from ``start``.
    Inconclusive probes are logged and cap the search interval from above
    without counting as verified divergence.
    """
    hist = []

    def probe(lam):
        cls, rep = classify(prob, lam, budget)
        hist.append({"lambda": lam, "class": cls, "status": rep.status,
                     "iterations": rep.iterations,
                     "max_value": float(rep.diagnostics.get("max_value", float("nan")))})
        return cls

    trust = math.inf
    verified = True
    if lo is not None and probe(lo) != "exists":
        raise ValueError(f"lower endpoint {lo} does not classify as existing: {hist}")
    if hi is not None and probe(hi) != "diverged":
        raise ValueError(f"upper endpoint {hi} does not classify as diverged: {hist}")
    lam = start
    while lo is None or hi is None:
        if len(hist) >= max_probes:
            raise ValueError(f"could not bracket Lambda: {hist}")
        if lo is None and hi is None:
            cls = probe(lam)
        elif lo is None:
            lam = hi / 2 if lam >= hi else lam
            cls = probe(lam)
        else:
            lam = lo * 2
            cls = probe(lam)
        if cls == "exists":
            lo = lam
            lam = lam * 2
        elif cls == "diverged":
            hi = lam
            lam = lam / 2
        else:
            verified = False
            trust = min(trust, lam)
            lam = lam / 2
    while (min(hi, trust) - lo) / lo > tol and len(hist) < max_probes:
        mid = 0.5 * (lo + min(hi, trust))
        cls = probe(mid)
        if cls == "exists":
            lo = mid
        elif cls == "diverged":
            hi = mid
        else:
            verified = False
            trust = mid
    if trust < hi:
        verified = False
    return LambdaBracket(lo, hi, hist, verified)


def lambda_sweep(prob: Problem, lams, **kw) -> list:
    """Minimal solutions along ``lams``; rows for the bifurcation CSV."""
    rows = []
    for lam in lams:
        rep = minimal_solution(prob, lam, **kw)
        d = rep.diagnostics
        ok = rep.status in ("converged", "converged-iterates")
        rows.append({"lambda": float(lam),
                     "seminorm": d.get("seminorm_p", float("nan")) if ok else float("nan"),
                     "cs0_norm": d.get("cs0_norm", float("nan")) if ok else float("nan"),
                     "energy": rep.energy if ok else float("nan"),
                     "status": rep.status, "report": rep})
    return rows


def bifurcation_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "seminorm", "cs0_norm", "energy", "status"])
    for r in rows:
        w.writerow([f"{r['lambda']:.17g}", f"{r['seminorm']:.17g}", f"{r['cs0_norm']:.17g}",
                    f"{r['energy']:.17g}", r["status"]])
    return buf.getvalue()
