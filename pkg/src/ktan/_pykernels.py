"""Pure-Python/numpy fallback for the compiled kernels.

Mirrors the arithmetic of ``_ckernels`` operation for operation so the two
backends agree to floating-point noise (elementwise transcendentals may differ
by an ulp between numpy's vectorized exp and libm). The stochastic loops keep
the exact per-element update order of the compiled code.
"""

import math

import numpy as np


def logistic_stats(margins):
    """Single fused pass over margins s = y * <a, x>.

    Returns (loss_sum, dcoef, weights) where loss_sum = sum log(1 + exp(-s))
    in the sign-stable form, dcoef = sigma(s) - 1, and weights =
    sigma(s) * (1 - sigma(s)).
    """
    s = np.asarray(margins, dtype=np.float64)
    z = np.exp(-np.abs(s))
    denom = 1.0 + z
    # sigma(-s): z/(1+z) for s >= 0, 1/(1+z) for s < 0
    sig_neg = np.where(s >= 0.0, z, 1.0) / denom
    loss = np.log1p(z) + np.where(s >= 0.0, 0.0, -s)
    dcoef = -sig_neg
    weights = z / (denom * denom)
    return float(loss.sum()), dcoef, weights


def _sigma_neg(s):
    # scalar sigma(-s), same branch structure as the array form
    z = math.exp(-abs(s))
    if s >= 0.0:
        return z / (1.0 + z)
    return 1.0 / (1.0 + z)


def sgd_dense(feats, labels, x, draws, step, reg):
    """Run len(draws) single-sample SGD steps in place on x (dense rows)."""
    decay = 1.0 - step * reg
    for i in draws:
        row = feats[i]
        s = labels[i] * float(row @ x)
        coef = labels[i] * -_sigma_neg(s)
        x *= decay
        x -= (step * coef) * row


def sgd_csr(data, cols, indptr, labels, x, draws, step, reg):
    """CSR-row variant of sgd_dense; the regularizer decay touches all of x."""
    decay = 1.0 - step * reg
    for i in draws:
        lo, hi = indptr[i], indptr[i + 1]
        vals = data[lo:hi]
        idx = cols[lo:hi]
        s = labels[i] * float(vals @ x[idx])
        coef = labels[i] * -_sigma_neg(s)
        x *= decay
        x[idx] -= (step * coef) * vals


def saga_dense(feats, labels, x, table, avg, draws, step, reg):
    """Run len(draws) SAGA steps in place on (x, table, avg).

    table[i] holds the margin derivative of sample i at its last evaluation
    (the per-sample gradient is table[i] * feats[i]); avg is the running mean
    of the stored per-sample gradients.
    """
    decay = 1.0 - step * reg
    inv_n = 1.0 / table.shape[0]
    for i in draws:
        row = feats[i]
        s = labels[i] * float(row @ x)
        t_new = labels[i] * -_sigma_neg(s)
        diff = t_new - table[i]
        x *= decay
        x -= step * (diff * row + avg)
        avg += (diff * inv_n) * row
        table[i] = t_new


def saga_csr(data, cols, indptr, labels, x, table, avg, draws, step, reg):
    """CSR-row variant of saga_dense."""
    decay = 1.0 - step * reg
    inv_n = 1.0 / table.shape[0]
    for i in draws:
        lo, hi = indptr[i], indptr[i + 1]
        vals = data[lo:hi]
        idx = cols[lo:hi]
        s = labels[i] * float(vals @ x[idx])
        t_new = labels[i] * -_sigma_neg(s)
        diff = t_new - table[i]
        x *= decay
        x -= step * avg
        x[idx] -= (step * diff) * vals
        avg[idx] += (diff * inv_n) * vals
        table[i] = t_new
