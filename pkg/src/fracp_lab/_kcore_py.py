"""Pure numpy versions of the pair-sum kernels in ``_kcore.pyx``."""

import numpy as np


def _J(t, p):
    if p == 2.0:
        return t
    return np.sign(t) * np.abs(t) ** (p - 1.0)


def _pow2(t, p):
    if p == 2.0:
        return np.ones_like(t)
    a = np.abs(t)
    with np.errstate(divide="ignore"):
        out = a ** (p - 2.0)
    out[a == 0.0] = 0.0 if p > 2.0 else 1e300
    return out


def energy(K, tau, u, p):
    D = u[:, None] - u[None, :]
    return float(np.sum(K * np.abs(D) ** p) + np.sum(tau * np.abs(u) ** p))


def gradient(K, tau, u, p):
    D = u[:, None] - u[None, :]
    return 2.0 * np.sum(K * _J(D, p), axis=1) + tau * _J(u, p)


def weak_apply(K, tau, u, v, p):
    D = u[:, None] - u[None, :]
    dv = v[:, None] - v[None, :]
    return float(np.sum(K * _J(D, p) * dv) + np.sum(tau * _J(u, p) * v))


def hessian(K, tau, u, p):
    c = p - 1.0
    if p == 2.0:
        H = -2.0 * c * K
    else:
        D = u[:, None] - u[None, :]
        H = -2.0 * c * K * _pow2(D, p)
    np.fill_diagonal(H, 0.0)
    H[np.diag_indices_from(H)] = -H.sum(axis=1) + c * tau * _pow2(u, p)
    return H
