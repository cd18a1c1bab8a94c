"""Extremal profile, its rescalings, cut-offs and the truncated bubbles.

``U(r) = (1 + r^{p/(p-1)})^{-(n-sp)/p}`` is the exact Sobolev extremal for
p = 2 and the conjectured one otherwise; all exponent checks for p != 2 are
therefore heuristic.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .grid import GridFunction, ProblemParams
from .radial import radial_gagliardo_p, radial_lr_power, seminorm_tail_exponents


def decay_rate(n, s, p) -> float:
    """Power-law decay exponent of U at infinity, (n - sp)/(p - 1)."""
    return (n - s * p) / (p - 1)


def profile_U(r, n: int, s: float, p: float):
    r = np.abs(np.asarray(r, dtype=float))
    return (1.0 + r ** (p / (p - 1))) ** (-(n - s * p) / p)


def bubble_U_eps(r, eps: float, n: int, s: float, p: float):
    if eps <= 0:
        raise ValueError("eps must be positive")
    return eps ** (-(n - s * p) / p) * profile_U(np.asarray(r, dtype=float) / eps, n, s, p)


def find_theta(n: int, s: float, p: float, step: float = 0.01, theta_max: float = 1e3,
               radii=None) -> float:
    """Smallest lattice theta with ``2 U(theta r) <= U(r)`` for sampled r >= 1.

    The r -> inf limit is always included in the sample; the result is
    rounded up by one lattice step.
    """
    if radii is None:
        radii = np.geomspace(1.0, 1e6, 2000)
    u_r = profile_U(radii, n, s, p)
    a = decay_rate(n, s, p)
    k = 1
    while True:
        theta = 1.0 + k * step
        if theta > theta_max:
            raise ValueError("theta search lattice exhausted")
        if theta ** -a <= 0.5 and np.all(2.0 * profile_U(theta * radii, n, s, p) <= u_r):
            return round(1.0 + (k + 1) * step, 10)
        k += 1


def smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return np.clip(t**3 * (10.0 - 15.0 * t + 6.0 * t * t), 0.0, 1.0)


def cutoff_eta_delta(x, delta: float, theta: float):
    """Radial cut-off: 0 on |x| <= 2 theta delta, 1 on |x| >= 3 theta delta.

    ``x`` is an array of radii or of points (last axis = coordinates).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x**2, axis=-1)) if x.ndim == 2 else np.abs(x)
    return smoothstep5((r - 2.0 * theta * delta) / (theta * delta))


@dataclass(frozen=True)
class BubbleParams:
    eps: float
    delta: float
    theta: float
    n: int
    s: float
    p: float

    def __post_init__(self):
        if self.eps <= 0 or self.delta <= 0:
            raise ValueError("eps and delta must be positive")
        if self.theta <= 1:
            raise ValueError("theta must exceed 1")

    @classmethod
    def for_params(cls, params: ProblemParams, eps, delta, theta=None) -> "BubbleParams":
        if theta is None:
            theta = find_theta(params.n, params.s, params.p)
        return cls(eps, delta, theta, params.n, params.s, params.p)

    def U_eps(self, r):
        return bubble_U_eps(r, self.eps, self.n, self.s, self.p)

    @property
    def knots(self) -> tuple:
        return (self.delta, self.theta * self.delta)


def trunc_M(b: BubbleParams) -> float:
    hi, lo = b.U_eps(b.delta), b.U_eps(b.theta * b.delta)
    if not hi > lo:
        raise ValueError("profile is not strictly decreasing between delta and theta*delta")
    return float(hi / (hi - lo))


def trunc_G(t, b: BubbleParams):
    """Piecewise-linear truncation: 0, then slope M, then identity."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("truncation is defined for t >= 0")
    lo, hi = b.U_eps(b.theta * b.delta), b.U_eps(b.delta)
    M = trunc_M(b)
    out = np.where(t >= hi, t, M * (t - lo))
    return np.where(t <= lo, 0.0, out)


def trunc_bubble(r, b: BubbleParams):
    """``u_{eps,delta}(r) = G(U_eps(r))``, supported in the ball of radius theta*delta."""
    r = np.abs(np.asarray(r, dtype=float))
    out = trunc_G(b.U_eps(r), b)
    # exact knot values regardless of rounding in U_eps
    out = np.where(r <= b.delta, b.U_eps(r), out)
    return np.where(r >= b.theta * b.delta, 0.0, out)


def bubble_on_grid(grid, b: BubbleParams) -> GridFunction:
    return GridFunction(grid, trunc_bubble(grid.radii, b))


def cutoff_on_grid(grid, delta, theta) -> GridFunction:
    return GridFunction(grid, cutoff_eta_delta(grid.radii, delta, theta))


# --- quadrature of the bubble estimates ------------------------------------

@dataclass(frozen=True)
class ProfileNorms:
    """Full-space norms of the untruncated profile U (scale invariant)."""

    seminorm_p: float
    crit_norm: float
    error_estimate: float

    @property
    def sobolev_quotient(self):
        return self.seminorm_p, self.crit_norm


_PROFILE_CACHE: dict = {}


def profile_norms(n, s, p, rmax=1e10) -> ProfileNorms:
    key = (n, s, p, rmax)
    if key not in _PROFILE_CACHE:
        U = lambda r: profile_U(r, n, s, p)  # noqa: E731
        a = decay_rate(n, s, p)
        sem = radial_gagliardo_p(U, n, s, p, rmax, tail_exponent=seminorm_tail_exponents(n, s, p))
        p_star = n * p / (n - s * p)
        crit = radial_lr_power(U, n, p_star, rmax, tail_exponent=n / (p - 1))
        _PROFILE_CACHE[key] = ProfileNorms(sem.value, crit.value,
                                           sem.error_estimate + crit.error_estimate)
    return _PROFILE_CACHE[key]


def bubble_norms(b: BubbleParams, q: float, seminorm: bool = True) -> dict:
    """Seminorm and Lebesgue norms of ``u_{eps,delta}`` by radial quadrature.

    The seminorm dominates the cost; ``seminorm=False`` reports it as NaN.
    """
    f = lambda r: trunc_bubble(r, b)  # noqa: E731
    support = b.theta * b.delta
    kn = (b.delta,)
    p_star = b.n * b.p / (b.n - b.s * b.p)
    rmin = 1e-6 * b.eps
    sem = float("nan")
    if seminorm:
        sem = radial_gagliardo_p(f, b.n, b.s, b.p, support, knots=kn, support=support, rmin=rmin).value
    return {
        "seminorm_p": sem,
        "crit_norm": radial_lr_power(f, b.n, p_star, support, knots=kn, support=support, rmin=rmin).value,
        "p_norm": radial_lr_power(f, b.n, b.p, support, knots=kn, support=support, rmin=rmin).value,
        "q_norm": radial_lr_power(f, b.n, q, support, knots=kn, support=support, rmin=rmin).value,
    }


@dataclass(frozen=True)
class FitResult:
    fitted_exponent: float
    target_exponent: float
    rel_dev: float
    sample_range: tuple

    @classmethod
    def fit(cls, x, y, target) -> "FitResult":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        slope = float(np.polyfit(np.log(x), np.log(y), 1)[0])
        return cls(slope, float(target), abs(slope - target) / abs(target),
                   (float(x.min()), float(x.max())))

    def to_dict(self):
        return {"fitted_exponent": self.fitted_exponent, "target_exponent": self.target_exponent,
                "rel_dev": self.rel_dev, "sample_range": list(self.sample_range)}


@dataclass
class BubbleEstimates:
    params: ProblemParams
    theta: float
    delta: float
    rows: list = field(default_factory=list)
    profile: ProfileNorms | None = None
    seminorm_fit: FitResult | None = None
    crit_fit: FitResult | None = None
    q_fit: FitResult | None = None
    q_lower_ratio: tuple = ()
    scaling_defect: float = float("nan")
    heuristic: bool = False
    regime_note: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["eps", "delta", "ratio", "seminorm_p", "crit_norm", "p_norm", "q_norm"]
        w.writerow(cols)
        for row in self.rows:
            w.writerow([f"{row[c]:.17g}" for c in cols])
        return buf.getvalue()


def bubble_estimates(params: ProblemParams, delta: float = 1.0,
                     ratios=tuple(2.0 ** -k for k in range(2, 7)),
                     theta: float | None = None, q_eps_decades: int = 3,
                     seminorm: bool = True) -> BubbleEstimates:
    """Sweep ``eps/delta`` and fit the asymptotic rates of the truncated bubble.

    Seminorm excess and critical-norm deficit are measured against the
    full-space norms of U (for the normalized extremal these both equal
    ``S^{n/sp}``).  The q-norm rate is regressed against eps with delta
    held fixed.  ``q_lower_ratio`` brackets ``|u|_q^q / eps^{n-(n-sp)q/p}``
    over the sweep, and ``scaling_defect`` checks the exact dilation
    identity after shrinking eps and delta together by ``10^-q_eps_decades``.
    """
    n, s, p, q = params.n, params.s, params.p, params.q
    if max(ratios) > 0.5:
        raise ValueError("estimates need eps <= delta/2")
    if theta is None:
        theta = find_theta(n, s, p)
    res = BubbleEstimates(params, theta, delta, heuristic=(p != 2))
    res.profile = profile_norms(n, s, p) if seminorm else None
    for ratio in ratios:
        b = BubbleParams(ratio * delta, delta, theta, n, s, p)
        row = {"eps": b.eps, "delta": delta, "ratio": ratio, **bubble_norms(b, q, seminorm)}
        ref = res.profile or ProfileNorms(float("nan"), float("nan"), 0.0)
        row["seminorm_excess"] = row["seminorm_p"] - ref.seminorm_p
        row["crit_deficit"] = ref.crit_norm - row["crit_norm"]
        res.rows.append(row)
    r = np.array([row["ratio"] for row in res.rows])
    exc = np.array([row["seminorm_excess"] for row in res.rows])
    dfc = np.array([row["crit_deficit"] for row in res.rows])
    a = decay_rate(n, s, p)
    if np.all(exc > 0):
        res.seminorm_fit = FitResult.fit(r, exc, a)
    if np.all(dfc > 0):
        res.crit_fit = FitResult.fit(r, dfc, n / (p - 1))
    # q-norm against eps at fixed delta, plus the normalized lower-bound ratio
    target_q = n - (n - s * p) * q / p
    qn = np.array([row["q_norm"] for row in res.rows])
    eps = r * delta
    res.q_fit = FitResult.fit(eps, qn, target_q)
    lower = qn / eps**target_q
    res.q_lower_ratio = (float(lower.min()), float(lower.max()))
    # exact scaling identity at fixed eps/delta (a consistency check, not a rate)
    c = 10.0 ** -q_eps_decades
    b = BubbleParams(r[-1] * delta * c, delta * c, theta, n, s, p)
    scaled = bubble_norms(b, q, seminorm=False)["q_norm"]
    res.scaling_defect = abs(scaled / (qn[-1] * c**target_q) - 1.0)
    if not n > s * p * q / (q - p + 1):
        res.regime_note = "n <= spq/(q-p+1): q-norm of U diverges; fixed-delta rate differs from the lower-bound exponent"
    return res
