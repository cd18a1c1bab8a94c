"""Mountain-pass path, ray supremum and a deformation search for the second solution."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from ..bubbles import BubbleParams, cutoff_eta_delta, find_theta, trunc_bubble
from ..energy import Problem, SobolevEstimate, critical_level, energy_tilde, f_lambda, grad_tilde
from .core import newton_root
from .elliptic import _stiff_solve, _tilde_hessian, residual_norm
from .report import SolveReport

T0_CAP = 1e6


@dataclass
class PathProfile:
    """Energies along the special path together with the ray supremum."""

    t: np.ndarray
    energies: np.ndarray
    t_star: float
    ray_sup: float
    ray_argmax: float
    t0: float
    critical_level: float
    base_energy: float
    lam: float
    eps: float
    delta: float
    theta: float
    points: list = field(default_factory=list, repr=False)

    @property
    def below_critical(self) -> bool:
        return bool(self.ray_sup < self.critical_level)

    def to_dict(self):
        return {
            "t": self.t.tolist(), "energies": self.energies.tolist(), "t_star": self.t_star,
            "ray_sup": self.ray_sup, "ray_argmax": self.ray_argmax, "t0": self.t0,
            "critical_level": self.critical_level, "base_energy": self.base_energy,
            "below_critical": self.below_critical, "lambda": self.lam, "eps": self.eps,
            "delta": self.delta, "theta": self.theta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _cutoff(prob: Problem, delta, theta):
    pts = prob.grid.nodes
    return cutoff_eta_delta(pts if prob.grid.n == 2 else pts[:, 0], delta, theta)


def _ball_radius_limit(prob: Problem) -> float:
    return min(min(-lo, hi) for lo, hi in prob.grid.domain.bounds)


def path_profile(prob: Problem, u_lam, lam: float, eps: float, delta: float,
                 S_est: SobolevEstimate | float, samples: int = 33, theta: float | None = None,
                 t0: float = 1.0, ray_scan: int = 200) -> PathProfile:
    """Evaluate the energy along ``gamma`` and the supremum along the bubble ray.

    ``gamma(t) = eta_{2t delta} u`` on ``[0, 1/2]`` (with ``gamma(0) = u``) and
    ``eta_delta u + (2t-1) t0 u_{eps,delta}`` on ``[1/2, 1]``; ``t0`` doubles
    until the endpoint energy sits 10% below the energy of ``u``.
    """
    pr = prob.params
    if theta is None:
        theta = find_theta(pr.n, pr.s, pr.p)
    if 5.0 * theta * delta > _ball_radius_limit(prob):
        raise ValueError(f"ball of radius 5*theta*delta={5 * theta * delta:g} is not inside the domain")
    if not 0 < eps <= delta / 2:
        raise ValueError("need 0 < eps <= delta/2")
    u = prob.values(u_lam)
    ub = trunc_bubble(prob.grid.radii, BubbleParams(eps, delta, theta, pr.n, pr.s, pr.p))
    eta = _cutoff(prob, delta, theta)
    base = eta * u
    E = lambda x: energy_tilde(prob, x, lam).value  # noqa: E731
    E0 = E(u)
    while E(base + t0 * ub) >= E0 - 0.1 * abs(E0):
        t0 *= 2.0
        if t0 > T0_CAP:
            raise RuntimeError("t0 cap reached before the endpoint energy dropped")

    def gamma(t):
        if t <= 0.0:
            return u.copy()
        if t <= 0.5:
            return _cutoff(prob, 2.0 * t * delta, theta) * u
        return base + (2.0 * t - 1.0) * t0 * ub

    ts = np.linspace(0.0, 1.0, samples)
    pts = [gamma(t) for t in ts]
    en = np.array([E(x) for x in pts])

    R = np.linspace(0.0, t0, ray_scan + 1)
    ray = np.array([E(base + r * ub) for r in R])
    k = int(np.argmax(ray))
    if 0 < k < ray_scan:
        res = minimize_scalar(lambda r: -E(base + r * ub), bracket=(R[k - 1], R[k], R[k + 1]),
                              method="golden", tol=1e-10)
        r_star, sup = float(res.x), float(-res.fun)
        if sup < ray[k]:
            r_star, sup = float(R[k]), float(ray[k])
    else:
        r_star, sup = float(R[k]), float(ray[k])
    c = critical_level(prob, u, S_est, lam)
    return PathProfile(ts, en, float(ts[int(np.argmax(en))]), sup, r_star, t0, c, E0, lam,
                       eps, delta, theta, pts)


def _equidistribute(path, metric_norm):
    """Re-place interior points at equal arclength along the polygon."""
    seg = np.array([metric_norm(b - a) for a, b in zip(path[:-1], path[1:])])
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] <= 0:
        return path
    target = np.linspace(0.0, arc[-1], len(path))
    out = [path[0]]
    for s in target[1:-1]:
        j = min(int(np.searchsorted(arc, s, side="right")) - 1, len(seg) - 1)
        frac = 0.0 if seg[j] == 0 else (s - arc[j]) / seg[j]
        out.append((1 - frac) * path[j] + frac * path[j + 1])
    out.append(path[-1])
    return out


def mountain_pass_solve(prob: Problem, path: PathProfile, u_lam, lam: float | None = None,
                        budget: int = 400, tol: float = 1e-6, switch_tol: float = 1e-2,
                        reparam_every: int = 10) -> SolveReport:
    """Deform the path at its highest point, then Newton-polish the saddle candidate.

    The residual tolerance is ``tol * sup f_lambda(w)``.  The result carries
    status ``"no second solution certified"`` when it falls back onto ``u_lam``.
    """
    lam = path.lam if lam is None else float(lam)
    u = prob.values(u_lam)
    A = prob.ctx.stiffness
    mnorm = lambda v: float(np.sqrt(max(v @ (A @ v), 0.0)))  # noqa: E731
    E = lambda x: energy_tilde(prob, x, lam).value  # noqa: E731
    G = lambda x: grad_tilde(prob, x, lam)  # noqa: E731
    pr = prob.params
    scale_of = lambda x: max(float(np.max(f_lambda(x, lam, pr.q, pr.p_star))), 1e-300)  # noqa: E731

    pts = [np.array(x) for x in path.points]
    en = np.array([E(x) for x in pts])
    sweeps = 0
    rn = np.inf
    for sweeps in range(1, budget + 1):
        k = 1 + int(np.argmax(en[1:-1]))
        x = pts[k]
        g = G(x)
        rn = residual_norm(prob, g)
        if rn <= switch_tol * scale_of(x):
            break
        d = -_stiff_solve(prob, g)
        slope = float(g @ d)
        alpha = 1.0
        while alpha > 1e-12:
            xn = x + alpha * d
            enew = E(xn)
            if enew <= en[k] + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        pts[k], en[k] = xn, enew
        if sweeps % reparam_every == 0:
            pts = _equidistribute(pts, mnorm)
            en = np.array([E(p) for p in pts])
    k = 1 + int(np.argmax(en[1:-1]))
    x0 = pts[k]
    pol = newton_root(G, lambda x: _tilde_hessian(prob, x, lam), x0,
                      norm=lambda g: residual_norm(prob, g), tol=tol * scale_of(x0), budget=60)
    w = pol.x
    abs_tol = tol * scale_of(w)
    gn = residual_norm(prob, G(w))
    converged = gn <= abs_tol
    h = prob.grid.h
    dist = mnorm(w - u)
    floor = 0.1 * max(mnorm(u), h**0.5)
    level = E(w)
    distinct = dist > floor
    status = "converged" if converged else pol.status
    if converged and not distinct:
        status = "no second solution certified"
    diag = {
        "lambda": lam, "sweeps": sweeps, "deform_residual": float(rn), "distance": dist,
        "distinct_floor": floor, "min_value": float(w.min()), "max_value": float(w.max()),
        "path_max_energy": float(en.max()), "critical_level": path.critical_level,
        "base_energy": path.base_energy, "newton_iterations": pol.iterations,
    }
    return SolveReport(prob.wrap(w), sweeps + pol.iterations, float(gn), float(level),
                       bool(converged and distinct), "mountain-pass", status, tol=abs_tol,
                       diagnostics=diag)
