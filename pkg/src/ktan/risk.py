"""Sample storage and the subsampled regularized risk for linear models.

A Dataset is an ordered sample store; the risk over the first n rows is
    R_n(x) = (1/n) * sum_{i<=n} loss(y_i * <a_i, x>) + (reg/2) * ||x||^2
with reg = c * V_n, where V_n is the statistical accuracy of the n-sample
subsample (1/n or 1/sqrt(n)). Nested subsample levels share their prefix, so
growing n reuses every sample already seen.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import CapabilityError, NumericError, ValidationError

__all__ = [
    "Sample",
    "Dataset",
    "Schedule",
    "RiskConfig",
    "RiskView",
    "WorkMeter",
    "GradientCache",
    "LogisticLoss",
    "LOGISTIC",
]


@dataclass(frozen=True)
class Sample:
    """One labeled feature vector. Accessor type; storage lives in Dataset."""

    features: np.ndarray
    label: float

    def __post_init__(self):
        if self.label not in (-1.0, 1.0):
            raise ValidationError(f"label must be +/-1, got {self.label}")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("sample features must be finite")


class Schedule(Enum):
    """Statistical accuracy of an n-sample average."""

    INV_N = "inv_n"
    INV_SQRT_N = "inv_sqrt_n"

    def accuracy(self, n):
        if n < 1:
            raise ValidationError("sample count must be >= 1")
        if self is Schedule.INV_N:
            return 1.0 / n
        return 1.0 / math.sqrt(n)


class LogisticLoss:
    """Binary logistic loss of the margin s = y * <a, x>.

    The three-function contract (value, dvalue, weight) is what the risk
    assembly consumes; stats() fuses all three in one pass and is what the
    kernel backends accelerate. curvature_bound is the global bound on
    weight(), giving the gradient-Lipschitz constant max ||a||^2 / 4.
    """

    curvature_bound = 0.25

    @staticmethod
    def value(margins):
        s = np.asarray(margins, dtype=np.float64)
        z = np.exp(-np.abs(s))
        return np.log1p(z) + np.where(s >= 0.0, 0.0, -s)

    @staticmethod
    def dvalue(margins):
        # sigma(s) - 1, always in (-1, 0)
        s = np.asarray(margins, dtype=np.float64)
        z = np.exp(-np.abs(s))
        return -(np.where(s >= 0.0, z, 1.0) / (1.0 + z))

    @staticmethod
    def weight(margins):
        # sigma(s) * (1 - sigma(s)), in (0, 1/4]
        s = np.asarray(margins, dtype=np.float64)
        z = np.exp(-np.abs(s))
        return z / (1.0 + z) ** 2

    @staticmethod
    def stats(margins):
        """(loss_sum, dvalue array, weight array) in one pass."""
        return kernels.logistic_stats(np.ascontiguousarray(margins, dtype=np.float64))


LOGISTIC = LogisticLoss()


class Dataset:
    """Ordered, immutable sample store with nested-prefix semantics.

    The first m rows are the level-m subsample for every m <= count, so risks
    at different levels share samples. order_seed records which permutation
    produced this order (0 = source order). Arrays are frozen on construction;
    instances are safe to share across threads.
    """

    def __init__(self, features, labels, order_seed=0):
        labels = np.array(labels, dtype=np.float64)
        if sp.issparse(features):
            features = features.tocsr().astype(np.float64)
            features.sort_indices()
            self._sparse = True
        else:
            features = np.array(features, dtype=np.float64, order="C")
            if features.ndim != 2:
                raise ValidationError("dense features must be a 2-d array")
            self._sparse = False
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise ValidationError("labels must be 1-d with one entry per row")
        if features.shape[0] == 0:
            raise ValidationError("dataset must contain at least one sample")
        if features.shape[1] == 0:
            raise ValidationError("feature dimension must be >= 1")
        bad = ~np.isin(labels, (-1.0, 1.0))
        if bad.any():
            raise ValidationError(
                f"labels must be +/-1 ({int(bad.sum())} offending entries)"
            )
        if self._sparse:
            if not np.all(np.isfinite(features.data)):
                raise ValidationError("features must be finite")
            sq = np.asarray(features.multiply(features).sum(axis=1)).ravel()
        else:
            if not np.all(np.isfinite(features)):
                raise ValidationError("features must be finite")
            sq = np.einsum("ij,ij->i", features, features)
        self.features = features
        self.labels = labels
        self.order_seed = int(order_seed)
        self._row_sq = sq
        # running max of squared row norms: smoothness constant per prefix
        self._prefix_max_sq = np.maximum.accumulate(sq)
        labels.flags.writeable = False
        sq.flags.writeable = False
        if self._sparse:
            for arr in (features.data, features.indices, features.indptr):
                arr.flags.writeable = False
        else:
            features.flags.writeable = False

    @classmethod
    def from_samples(cls, samples, dim=None, order_seed=0):
        """Build from Sample objects (dense storage)."""
        samples = list(samples)
        if not samples:
            raise ValidationError("dataset must contain at least one sample")
        p = dim if dim is not None else max(len(s.features) for s in samples)
        feats = np.zeros((len(samples), p))
        labels = np.empty(len(samples))
        for i, s in enumerate(samples):
            v = np.asarray(s.features, dtype=np.float64)
            if v.shape[0] > p:
                raise ValidationError(f"sample {i} exceeds dim {p}")
            feats[i, : v.shape[0]] = v
            labels[i] = s.label
        return cls(feats, labels, order_seed=order_seed)

    @property
    def count(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def is_sparse(self):
        return self._sparse

    def sample(self, i):
        """Materialize row i as a Sample (dense features)."""
        if self._sparse:
            row = self.features.getrow(i).toarray().ravel()
        else:
            row = np.array(self.features[i])
        return Sample(row, float(self.labels[i]))

    def rows(self, n):
        """The level-n feature block (first n rows)."""
        if not 1 <= n <= self.count:
            raise ValidationError(f"prefix size {n} outside [1, {self.count}]")
        return self.features[:n]

    def row_norms_sq(self):
        return self._row_sq

    def smoothness(self, n, curvature_bound=0.25):
        """Gradient-Lipschitz constant of the level-n data term."""
        if not 1 <= n <= self.count:
            raise ValidationError(f"prefix size {n} outside [1, {self.count}]")
        return curvature_bound * float(self._prefix_max_sq[n - 1])

    def fingerprint(self):
        """Content hash (sha256 hex) covering shape, labels and features."""
        h = hashlib.sha256()
        h.update(f"{self.count},{self.dim},{int(self._sparse)}".encode())
        h.update(self.labels.tobytes())
        if self._sparse:
            h.update(self.features.indptr.tobytes())
            h.update(self.features.indices.tobytes())
            h.update(self.features.data.tobytes())
        else:
            h.update(self.features.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class RiskConfig:
    """Regularization strength, accuracy schedule and loss family."""

    c: float = 1.0
    schedule: Schedule = Schedule.INV_N
    loss: LogisticLoss = LOGISTIC
    dense_hessian_cap: int = 4096

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValidationError("c must be a positive finite scalar")
        if self.dense_hessian_cap < 1:
            raise ValidationError("dense_hessian_cap must be >= 1")


class WorkMeter:
    """Thread-safe cumulative count of per-sample gradient evaluations."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def tick(self, n):
        if n < 0:
            raise ValidationError("meter ticks must be non-negative")
        with self._lock:
            self._count += int(n)

    @property
    def count(self):
        return self._count


class GradientCache:
    """Per-sample gradient terms cached at one evaluation point.

    Keyed to the exact contents of x. Stores the margin-derivative
    coefficient of every row evaluated so far (the per-sample gradient is
    coef_i * a_i), so extending the prefix at the same x only evaluates the
    new rows. Any change of x resets the cache.
    """

    def __init__(self):
        self._x = None
        self._coef = None
        self._filled = 0

    @property
    def filled(self):
        return self._filled

    def matches(self, x):
        return (
            self._x is not None
            and self._x.shape == x.shape
            and np.array_equal(self._x, x)
        )

    def reset(self, x):
        self._x = np.array(x, dtype=np.float64)
        self._coef = None
        self._filled = 0

    def extend(self, coefs):
        coefs = np.asarray(coefs, dtype=np.float64)
        if self._coef is None:
            self._coef = coefs.copy()
        else:
            self._coef = np.concatenate([self._coef, coefs])
        self._filled = self._coef.shape[0]

    def coefs(self, n):
        if self._coef is None or n > self._filled:
            raise ValidationError(f"cache holds {self._filled} rows, need {n}")
        return self._coef[:n]


class RiskView:
    """The regularized risk over the first n rows of a dataset.

    Immutable; safe to share across threads. Gradient evaluations optionally
    tick a WorkMeter with the number of per-sample gradients computed fresh.
    """

    def __init__(self, dataset, n, config=None):
        config = config if config is not None else RiskConfig()
        if not 1 <= n <= dataset.count:
            raise ValidationError(
                f"prefix size {n} outside [1, {dataset.count}]"
            )
        self.dataset = dataset
        self.n = int(n)
        self.config = config

    @property
    def dim(self):
        return self.dataset.dim

    @property
    def accuracy(self):
        """V_n of the schedule."""
        return self.config.schedule.accuracy(self.n)

    @property
    def regularizer(self):
        """Strong-convexity modulus c * V_n."""
        return self.config.c * self.accuracy

    def data_smoothness(self):
        """Gradient-Lipschitz constant M of the data term."""
        return self.dataset.smoothness(self.n, self.config.loss.curvature_bound)

    def smoothness(self):
        """Gradient-Lipschitz constant of the full risk: M + c * V_n."""
        return self.data_smoothness() + self.regularizer

    def _check_x(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValidationError(f"x must have shape ({self.dim},)")
        if not np.all(np.isfinite(x)):
            raise ValidationError("x must be finite")
        return x

    def _margins(self, x, lo=0):
        feats = self.dataset.features[lo : self.n]
        raw = feats @ x
        m = self.dataset.labels[lo : self.n] * raw
        if not np.all(np.isfinite(m)):
            raise NumericError("margins overflowed")
        return m

    def value(self, x):
        """R_n(x). Not metered (no per-sample gradients are formed)."""
        x = self._check_x(x)
        losses = self.config.loss.value(self._margins(x))
        total = float(losses.sum()) / self.n
        out = total + 0.5 * self.regularizer * float(x @ x)
        if not np.isfinite(out):
            raise NumericError("risk value overflowed")
        return out

    def grad(self, x, meter=None, cache=None):
        """Gradient of R_n at x.

        Ticks `meter` with the number of per-sample gradient terms computed
        fresh: n without a cache, only the new rows when `cache` already
        holds this x.
        """
        x = self._check_x(x)
        y = self.dataset.labels
        if cache is not None:
            if not cache.matches(x):
                cache.reset(x)
            fresh = self.n - cache.filled
            if fresh > 0:
                lo = cache.filled
                _, dco, _ = self.config.loss.stats(self._margins(x, lo=lo))
                cache.extend(y[lo : self.n] * dco)
            if meter is not None:
                meter.tick(max(fresh, 0))
            coef = cache.coefs(self.n)
        else:
            _, dco, _ = self.config.loss.stats(self._margins(x))
            coef = y[: self.n] * dco
            if meter is not None:
                meter.tick(self.n)
        feats = self.dataset.rows(self.n)
        data_part = np.asarray(feats.T @ coef).ravel() / self.n
        out = data_part + self.regularizer * x
        if not np.all(np.isfinite(out)):
            raise NumericError("gradient overflowed")
        return out

    def _weights(self, x):
        _, _, w = self.config.loss.stats(self._margins(x))
        return w

    def data_hessian(self, x):
        """Dense curvature matrix of the data term (regularizer NOT added)."""
        x = self._check_x(x)
        if self.dim > self.config.dense_hessian_cap:
            raise CapabilityError(
                f"dense Hessian needs dim <= {self.config.dense_hessian_cap}; "
                "use data_hessian_vec"
            )
        w = self._weights(x)
        scaled = np.sqrt(w / self.n)
        feats = self.dataset.rows(self.n)
        if self.dataset.is_sparse:
            half = feats.multiply(scaled[:, None]).tocsr()
            hess = (half.T @ half).toarray()
        else:
            half = feats * scaled[:, None]
            hess = half.T @ half
        return (hess + hess.T) / 2.0

    def hessian(self, x):
        """Dense Hessian of the full risk: data term + c * V_n * I."""
        hess = self.data_hessian(x)
        hess[np.diag_indices_from(hess)] += self.regularizer
        return hess

    def data_hessian_operator(self, x):
        """Matrix-free action of the data curvature; accepts vector or block."""
        x = self._check_x(x)
        w = self._weights(x)
        feats = self.dataset.rows(self.n)
        inv_n = 1.0 / self.n

        def apply(v):
            v = np.asarray(v, dtype=np.float64)
            if v.shape[0] != self.dim:
                raise ValidationError(f"operand must have leading dim {self.dim}")
            t = feats @ v
            t = t * w[:, None] if v.ndim == 2 else t * w
            return np.asarray(feats.T @ t) * inv_n

        return apply

    def data_hessian_vec(self, x, v):
        """data_hessian(x) @ v without materializing the matrix."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValidationError(f"v must have shape ({self.dim},)")
        if not np.all(np.isfinite(v)):
            raise ValidationError("v must be finite")
        return self.data_hessian_operator(x)(v)
