"""Sampled min-max upper bounds for the symmetric (genus) levels."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh
from scipy.stats import norm as _normal
from scipy.stats import qmc

from ..energy import Problem, SobolevEstimate

SPHERE_SAMPLES = 2048
SEED = 20240611


@dataclass(frozen=True)
class GenusBound:
    """``min over eps of max over the sampled sphere of I_lambda(eps * sigma)``."""

    j: int
    value: float
    eps: float
    r: float
    lam: float
    samples: int
    negative: bool

    def __float__(self):
        return self.value

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def low_modes(prob: Problem, m: int) -> np.ndarray:
    """Lowest ``m`` generalized eigenvectors of the quadratic form against the mass weights.

    Columns are orthonormal in the discrete L^2 inner product.
    """
    _, vecs = eigh(np.array(prob.ctx.stiffness), np.diag(prob.w), subset_by_index=[0, m - 1])
    # fixed sign convention so that repeated runs agree bit for bit
    for k in range(m):
        i = int(np.argmax(np.abs(vecs[:, k])))
        if vecs[i, k] < 0:
            vecs[:, k] = -vecs[:, k]
    return vecs


@lru_cache(maxsize=8)
def sphere_samples(dim: int, count: int = SPHERE_SAMPLES, seed: int = SEED) -> np.ndarray:
    """Antipodally symmetric quasi-random points on ``S^{dim-1}``, nested across ``dim``.

    Each dimension adds ``count`` fresh points (``count/2`` scrambled Sobol
    directions and their antipodes) to the set for ``dim - 1``, padded with a
    zero coordinate, so sampled maxima can only grow with the dimension.
    """
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    prev = sphere_samples(dim - 1, count, seed)
    m = max(int(np.ceil(np.log2(max(count // 2, 1)))), 0)
    z = qmc.Sobol(dim, scramble=True, seed=seed + dim).random_base2(m)
    g = _normal.ppf(np.clip(z, 1e-12, 1 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([np.hstack([prev, np.zeros((prev.shape[0], 1))]), g, -g])


def genus_level_upper(prob: Problem, j: int, r: float, lam: float | None = None,
                      S_est: SobolevEstimate | float | None = None, eps_points: int = 400,
                      samples: int = SPHERE_SAMPLES) -> GenusBound:
    """Upper bound for the j-th symmetric level from a j-dimensional mode space.

    Sphere points are normalized in the fractional seminorm and scaled by
    eps on a geometric grid of ``(0, r]``.
    """
    if j < 1:
        raise ValueError("j must be at least 1")
    if r <= 0:
        raise ValueError("r must be positive")
    pr = prob.params
    lam = pr.lam if lam is None else float(lam)
    if S_est is not None:
        S = S_est.value if isinstance(S_est, SobolevEstimate) else float(S_est)
        rmax = 0.5 * S ** (pr.n / (pr.sp * pr.p))
        if r >= rmax:
            raise ValueError(f"r={r:g} is not below the small-ball radius {rmax:g}")
    V = low_modes(prob, j)
    sig = sphere_samples(j, samples) @ V.T
    sem = np.array([prob.ctx.gagliardo_p(x) for x in sig])
    sig /= (sem ** (1.0 / pr.p))[:, None]
    a = np.abs(sig)
    lq = (a**pr.q) @ prob.w
    lc = (a**pr.p_star) @ prob.w
    eps = r * np.geomspace(1e-8, 1.0, eps_points)
    I = (eps[:, None] ** pr.p / pr.p - lam * eps[:, None] ** pr.q * lq[None, :] / pr.q
         - eps[:, None] ** pr.p_star * lc[None, :] / pr.p_star)
    worst = I.max(axis=1)
    k = int(np.argmin(worst))
    val = float(worst[k])
    return GenusBound(j, val, float(eps[k]), float(r), lam, int(sig.shape[0]), val < 0)


def genus_levels(prob: Problem, js, r: float, lam: float | None = None, **kw) -> list:
    return [genus_level_upper(prob, j, r, lam, **kw) for j in js]
