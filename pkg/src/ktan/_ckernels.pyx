# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: fused logistic margin statistics and the sequential
SGD/SAGA recursions. Arithmetic matches _pykernels element for element."""

from libc.math cimport exp, fabs, log1p

import numpy as np

ctypedef fused idx_t:
    int
    long
    long long


cdef inline double _sigma_neg(double s) nogil:
    cdef double z = exp(-fabs(s))
    if s >= 0.0:
        return z / (1.0 + z)
    return 1.0 / (1.0 + z)


def logistic_stats(const double[::1] margins):
    """Fused pass returning (loss_sum, dcoef, weights) for logistic margins."""
    cdef Py_ssize_t n = margins.shape[0]
    dcoef_arr = np.empty(n, dtype=np.float64)
    weight_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] dcoef = dcoef_arr
    cdef double[::1] weights = weight_arr
    cdef double total = 0.0, s, z, denom
    cdef Py_ssize_t i
    for i in range(n):
        s = margins[i]
        z = exp(-fabs(s))
        denom = 1.0 + z
        if s >= 0.0:
            dcoef[i] = -(z / denom)
            total += log1p(z)
        else:
            dcoef[i] = -(1.0 / denom)
            total += log1p(z) - s
        weights[i] = z / (denom * denom)
    return total, dcoef_arr, weight_arr


def sgd_dense(const double[:, ::1] feats, const double[::1] labels,
              double[::1] x, const long long[::1] draws, double step,
              double reg):
    cdef Py_ssize_t p = x.shape[0], t, j
    cdef long long i
    cdef double s, coef, scale
    cdef double decay = 1.0 - step * reg
    for t in range(draws.shape[0]):
        i = draws[t]
        s = 0.0
        for j in range(p):
            s += feats[i, j] * x[j]
        s *= labels[i]
        coef = labels[i] * -_sigma_neg(s)
        scale = step * coef
        for j in range(p):
            x[j] = x[j] * decay - scale * feats[i, j]


def sgd_csr(const double[::1] data, const idx_t[::1] cols,
            const idx_t[::1] indptr, const double[::1] labels,
            double[::1] x, const long long[::1] draws, double step,
            double reg):
    cdef Py_ssize_t p = x.shape[0], t, j
    cdef idx_t q
    cdef long long i
    cdef double s, coef, scale
    cdef double decay = 1.0 - step * reg
    for t in range(draws.shape[0]):
        i = draws[t]
        s = 0.0
        for q in range(indptr[i], indptr[i + 1]):
            s += data[q] * x[cols[q]]
        s *= labels[i]
        coef = labels[i] * -_sigma_neg(s)
        scale = step * coef
        for j in range(p):
            x[j] = x[j] * decay
        for q in range(indptr[i], indptr[i + 1]):
            x[cols[q]] = x[cols[q]] - scale * data[q]


def saga_dense(const double[:, ::1] feats, const double[::1] labels,
               double[::1] x, double[::1] table, double[::1] avg,
               const long long[::1] draws, double step, double reg):
    cdef Py_ssize_t p = x.shape[0], t, j
    cdef long long i
    cdef double s, t_new, diff, scale2
    cdef double decay = 1.0 - step * reg
    cdef double inv_n = 1.0 / table.shape[0]
    for t in range(draws.shape[0]):
        i = draws[t]
        s = 0.0
        for j in range(p):
            s += feats[i, j] * x[j]
        s *= labels[i]
        t_new = labels[i] * -_sigma_neg(s)
        diff = t_new - table[i]
        for j in range(p):
            x[j] = x[j] * decay - step * (diff * feats[i, j] + avg[j])
        scale2 = diff * inv_n
        for j in range(p):
            avg[j] = avg[j] + scale2 * feats[i, j]
        table[i] = t_new


def saga_csr(const double[::1] data, const idx_t[::1] cols,
             const idx_t[::1] indptr, const double[::1] labels,
             double[::1] x, double[::1] table, double[::1] avg,
             const long long[::1] draws, double step, double reg):
    cdef Py_ssize_t p = x.shape[0], t, j
    cdef idx_t q
    cdef long long i
    cdef double s, t_new, diff, scale, scale2
    cdef double decay = 1.0 - step * reg
    cdef double inv_n = 1.0 / table.shape[0]
    for t in range(draws.shape[0]):
        i = draws[t]
        s = 0.0
        for q in range(indptr[i], indptr[i + 1]):
            s += data[q] * x[cols[q]]
        s *= labels[i]
        t_new = labels[i] * -_sigma_neg(s)
        diff = t_new - table[i]
        for j in range(p):
            x[j] = x[j] * decay - step * avg[j]
        scale = step * diff
        for q in range(indptr[i], indptr[i + 1]):
            x[cols[q]] = x[cols[q]] - scale * data[q]
        scale2 = diff * inv_n
        for q in range(indptr[i], indptr[i + 1]):
            avg[cols[q]] = avg[cols[q]] + scale2 * data[q]
        table[i] = t_new
