"""Symmetric eigendecompositions and the truncated regularized inverse.

The solver approximates a curvature matrix H by keeping its top-k eigenpairs
and replacing the tail with the regularizer:

    H_hat = U_k diag(s_1..s_k) U_k^T + r * I

whose inverse has the closed form

    H_hat^{-1} = U_k [ (S_k + r I)^{-1} - r^{-1} I ] U_k^T + r^{-1} I,

applied in O(p k) with two projections and diagonal scalings. The relative
step error this introduces is bounded by the truncation ratio
epsilon = (first discarded eigenvalue) / r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericError, ValidationError

__all__ = [
    "SymEigPair",
    "TruncatedEig",
    "TruncatedInverse",
    "RandEigParams",
    "full_sym_eig",
    "select_rank",
    "randomized_truncated_eig",
    "apply_inverse",
    "truncation_epsilon",
    "chol_solve",
]


def chol_solve(mat, rhs):
    """Solve mat @ x = rhs for symmetric positive definite mat (Cholesky)."""
    try:
        factor = scipy.linalg.cho_factor(mat, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(f"matrix not positive definite: {exc}")
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


@dataclass(frozen=True)
class SymEigPair:
    """Full symmetric eigendecomposition, eigenvalues non-increasing."""

    eigvals: np.ndarray
    eigvecs: np.ndarray  # columns are eigenvectors, aligned with eigvals

    def __post_init__(self):
        vals, vecs = self.eigvals, self.eigvecs
        if vals.ndim != 1 or vecs.ndim != 2 or vecs.shape[1] != vals.shape[0]:
            raise ValidationError("eigvals/eigvecs shapes are inconsistent")
        if np.any(np.diff(vals) > 1e-12 * max(1.0, float(np.abs(vals).max()))):
            raise ValidationError("eigvals must be non-increasing")


@dataclass(frozen=True)
class TruncatedEig:
    """Leading eigenpairs of a PSD operator plus the first discarded value.

    eigvals are strictly positive and non-increasing; basis columns are
    orthonormal; next_eig estimates the (k+1)-th eigenvalue and is 0 when
    nothing was discarded.
    """

    eigvals: np.ndarray
    basis: np.ndarray
    next_eig: float

    def __post_init__(self):
        vals, basis = self.eigvals, self.basis
        if vals.ndim != 1 or basis.ndim != 2 or basis.shape[1] != vals.shape[0]:
            raise ValidationError("factor shapes are inconsistent")
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(basis))):
            raise ValidationError("factors must be finite")
        if not np.isfinite(self.next_eig) or self.next_eig < 0:
            raise ValidationError("next_eig must be finite and >= 0")
        if vals.shape[0] > 0:
            if np.any(vals <= 0):
                raise ValidationError("retained eigenvalues must be positive")
            if np.any(np.diff(vals) > 1e-12 * float(vals[0])):
                raise ValidationError("eigenvalues must be non-increasing")
            if self.next_eig > float(vals[-1]) * (1 + 1e-10) + 1e-300:
                raise ValidationError("next_eig exceeds the smallest kept value")
            gram = basis.T @ basis
            if np.abs(gram - np.eye(vals.shape[0])).max() > 1e-6:
                raise ValidationError("basis columns must be orthonormal")

    @property
    def k(self):
        return int(self.eigvals.shape[0])

    @property
    def dim(self):
        return int(self.basis.shape[0])


@dataclass(frozen=True)
class TruncatedInverse:
    """The closed-form inverse of (U_k S_k U_k^T + shift * I)."""

    factors: TruncatedEig
    shift: float

    def __post_init__(self):
        if not (np.isfinite(self.shift) and self.shift > 0):
            raise ValidationError("shift must be a positive scalar")

    def apply(self, rhs):
        """H_hat^{-1} @ rhs for a vector or column block; cost O(p k)."""
        rhs = np.asarray(rhs, dtype=np.float64)
        if rhs.shape[0] != self.factors.dim:
            raise ValidationError(
                f"operand leading dim {rhs.shape[0]} != {self.factors.dim}"
            )
        if not np.all(np.isfinite(rhs)):
            raise ValidationError("operand must be finite")
        out = rhs / self.shift
        if self.factors.k:
            proj = self.factors.basis.T @ rhs
            bracket = 1.0 / (self.factors.eigvals + self.shift) - 1.0 / self.shift
            if rhs.ndim == 2:
                out = out + self.factors.basis @ (bracket[:, None] * proj)
            else:
                out = out + self.factors.basis @ (bracket * proj)
        return out

    def forward(self, rhs):
        """The surrogate operator itself: (U_k S_k U_k^T + shift I) @ rhs."""
        rhs = np.asarray(rhs, dtype=np.float64)
        out = self.shift * rhs
        if self.factors.k:
            proj = self.factors.basis.T @ rhs
            if rhs.ndim == 2:
                out = out + self.factors.basis @ (self.factors.eigvals[:, None] * proj)
            else:
                out = out + self.factors.basis @ (self.factors.eigvals * proj)
        return out


@dataclass(frozen=True)
class RandEigParams:
    """Knobs of the randomized range-finder eigensolver."""

    block0: int = 16
    oversample: int = 10
    power_iters: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.block0 < 1 or self.oversample < 0 or self.power_iters < 0:
            raise ValidationError("invalid randomized-eig parameters")


def full_sym_eig(mat):
    """Dense symmetric eigendecomposition, eigenvalues sorted descending.

    LAPACK's tridiagonalize-then-solve path; deterministic for fixed input.
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
        raise ValidationError("input must be a square matrix of order >= 1")
    if not np.all(np.isfinite(mat)):
        raise ValidationError("input must be finite")
    scale = max(1.0, float(np.abs(mat).max()))
    if np.abs(mat - mat.T).max() > 1e-12 * scale:
        raise ValidationError("input must be symmetric")
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    return SymEigPair(eigvals=vals[::-1].copy(), eigvecs=vecs[:, ::-1].copy())


def select_rank(eigvals, threshold):
    """Smallest k with eigvals[k] <= threshold (0-indexed), else len(eigvals).

    Equality truncates: a discarded eigenvalue may sit exactly at the
    threshold. eigvals must be non-increasing; threshold must be positive.
    """
    eigvals = np.asarray(eigvals, dtype=np.float64)
    if eigvals.ndim != 1:
        raise ValidationError("eigvals must be 1-d")
    if not (np.isfinite(threshold) and threshold > 0):
        raise ValidationError("threshold must be a positive scalar")
    if eigvals.shape[0] == 0:
        return 0
    slack = 1e-12 * max(1.0, float(np.abs(eigvals).max()))
    if np.any(np.diff(eigvals) > slack):
        raise ValidationError("eigvals must be non-increasing")
    below = np.nonzero(eigvals <= threshold)[0]
    return int(below[0]) if below.size else int(eigvals.shape[0])


def _empty_factors(dim, next_eig=0.0):
    return TruncatedEig(
        eigvals=np.empty(0), basis=np.empty((dim, 0)), next_eig=float(next_eig)
    )


def truncated_from_dense(pair, threshold):
    """Truncate a full eigendecomposition at the threshold rule."""
    vals = np.maximum(pair.eigvals, 0.0)
    k = select_rank(vals, threshold)
    if k == 0:
        return _empty_factors(pair.eigvecs.shape[0], vals[0] if vals.size else 0.0)
    next_eig = float(vals[k]) if k < vals.shape[0] else 0.0
    return TruncatedEig(
        eigvals=vals[:k].copy(), basis=pair.eigvecs[:, :k].copy(), next_eig=next_eig
    )


def randomized_truncated_eig(hvp, dim, threshold, params=None, dense_matrix=None):
    """Truncated eigendecomposition of a PSD operator given only its action.

    Range finder with oversampled Gaussian probes and a few power iterations,
    then Rayleigh-Ritz; the block doubles until the threshold rank cut lands
    inside the trusted (non-cushion) part of the block. Ritz values can only
    underestimate the true eigenvalues, which the oversampling cushion and
    power iterations keep small. next_eig is the (k+1)-th Ritz value.

    Deterministic for fixed (seed, params). When the block reaches dim
    without a trusted cut, falls back to the dense decomposition if
    dense_matrix was supplied, else reports the Ritz factors as-is.
    """
    params = params if params is not None else RandEigParams()
    if dim < 1:
        raise ValidationError("operator dimension must be >= 1")
    if not (np.isfinite(threshold) and threshold > 0):
        raise ValidationError("threshold must be a positive scalar")
    rng = np.random.default_rng(params.seed)
    block = min(params.block0, dim)
    while True:
        width = min(block + params.oversample, dim)
        probes = rng.standard_normal((dim, width))
        sampled = np.asarray(hvp(probes))
        if sampled.shape != (dim, width):
            raise ValidationError("operator returned a wrong-shaped block")
        if not np.all(np.isfinite(sampled)):
            raise NumericError("operator returned non-finite values")
        if not sampled.any():
            return _empty_factors(dim)
        basis = np.linalg.qr(sampled)[0]
        for _ in range(params.power_iters):
            sampled = np.asarray(hvp(basis))
            if not np.all(np.isfinite(sampled)):
                raise NumericError("operator returned non-finite values")
            basis = np.linalg.qr(sampled)[0]
        small = basis.T @ np.asarray(hvp(basis))
        small = (small + small.T) / 2.0
        ritz, rot = np.linalg.eigh(small)
        ritz = np.maximum(ritz[::-1], 0.0)
        rot = rot[:, ::-1]
        k = select_rank(ritz, threshold)
        if k <= block or width == dim:
            break
        block = min(2 * block, dim)
    if width == dim and k > block and dense_matrix is not None:
        return truncated_from_dense(full_sym_eig(dense_matrix), threshold)
    if k == 0:
        return _empty_factors(dim, ritz[0] if ritz.size else 0.0)
    vectors = basis @ rot[:, :k]
    next_eig = float(ritz[k]) if k < width else 0.0
    return TruncatedEig(eigvals=ritz[:k].copy(), basis=vectors, next_eig=next_eig)


def apply_inverse(factors, shift, rhs):
    """(U_k S_k U_k^T + shift I)^{-1} @ rhs via the closed form."""
    return TruncatedInverse(factors=factors, shift=shift).apply(rhs)


def truncation_epsilon(factors, shift):
    """Relative step-error bound of the truncation: next_eig / shift."""
    if not (np.isfinite(shift) and shift > 0):
        raise ValidationError("shift must be a positive scalar")
    return float(factors.next_eig) / float(shift)
