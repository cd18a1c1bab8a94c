# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pair-sum kernels over a dense weighted kernel matrix.

All routines take ``K`` (symmetric, zero diagonal, already multiplied by the
quadrature weights) and ``tau`` (per-node exterior weight) and loop over the
upper triangle once.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()


cdef inline double _absp(double t, double p) nogil:
    cdef double a
    if p == 2.0:
        return t * t
    a = fabs(t)
    if p == 3.0:
        return a * a * a
    if p == 4.0:
        return (a * a) * (a * a)
    return pow(a, p)


cdef inline double _J(double t, double p) nogil:
    # |t|^{p-2} t
    if p == 2.0:
        return t
    if p == 3.0:
        return t * fabs(t)
    if p == 4.0:
        return t * t * t
    if t == 0.0:
        return 0.0
    if t > 0.0:
        return pow(t, p - 1.0)
    return -pow(-t, p - 1.0)


cdef inline double _pow2(double t, double p) nogil:
    # |t|^{p-2}, zero at t = 0 for p > 2
    if p == 2.0:
        return 1.0
    if p == 3.0:
        return fabs(t)
    if p == 4.0:
        return t * t
    if t == 0.0:
        return 0.0 if p > 2.0 else 1e300
    return pow(fabs(t), p - 2.0)


def energy(const double[:, ::1] K, const double[::1] tau, const double[::1] u, double p):
    cdef Py_ssize_t n = u.shape[0], i, j
    cdef double total = 0.0, row, ui
    with nogil:
        for i in range(n):
            row = 0.0
            ui = u[i]
            for j in range(i + 1, n):
                row = row + K[i, j] * _absp(ui - u[j], p)
            total = total + 2.0 * row + tau[i] * _absp(ui, p)
    return total


def gradient(const double[:, ::1] K, const double[::1] tau, const double[::1] u, double p):
    cdef Py_ssize_t n = u.shape[0], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_arr = np.zeros(n)
    cdef double[::1] g = g_arr
    cdef double t
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                t = 2.0 * K[i, j] * _J(u[i] - u[j], p)
                g[i] = g[i] + t
                g[j] = g[j] - t
            g[i] = g[i] + tau[i] * _J(u[i], p)
    return g_arr


def weak_apply(const double[:, ::1] K, const double[::1] tau, const double[::1] u,
               const double[::1] v, double p):
    cdef Py_ssize_t n = u.shape[0], i, j
    cdef double total = 0.0, row
    with nogil:
        for i in range(n):
            row = 0.0
            for j in range(i + 1, n):
                row = row + K[i, j] * _J(u[i] - u[j], p) * (v[i] - v[j])
            total = total + 2.0 * row + tau[i] * _J(u[i], p) * v[i]
    return total


def hessian(const double[:, ::1] K, const double[::1] tau, const double[::1] u, double p):
    cdef Py_ssize_t n = u.shape[0], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] H_arr = np.zeros((n, n))
    cdef double[:, ::1] H = H_arr
    cdef double c = p - 1.0, t
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                t = 2.0 * c * K[i, j] * _pow2(u[i] - u[j], p)
                H[i, j] = -t
                H[j, i] = -t
                H[i, i] = H[i, i] + t
                H[j, j] = H[j, j] + t
            H[i, i] = H[i, i] + c * tau[i] * _pow2(u[i], p)
    return H_arr
