"""Backend dispatch for the hot-loop kernels.

The compiled extension is preferred when importable; set KTAN_PURE_PYTHON=1
to force the numpy fallback (selection happens at import time). Both backends
expose the same functions: logistic_stats, sgd_dense, sgd_csr, saga_dense,
saga_csr.
"""

import os

from . import _pykernels as pure
from .errors import CapabilityError

try:
    from . import _ckernels as compiled
except ImportError:
    compiled = None

if os.environ.get("KTAN_PURE_PYTHON", "") not in ("", "0") or compiled is None:
    active = pure
else:
    active = compiled


def backend_name():
    """Name of the backend in use: 'compiled' or 'pure'."""
    return "pure" if active is pure else "compiled"


def get_backend(name):
    """Fetch a backend module by name (benchmarks compare them directly)."""
    if name == "pure":
        return pure
    if name == "compiled":
        if compiled is None:
            raise CapabilityError("compiled kernel extension is not available")
        return compiled
    raise CapabilityError(f"unknown kernel backend {name!r}")


def logistic_stats(margins):
    return active.logistic_stats(margins)


def sgd_dense(feats, labels, x, draws, step, reg):
    return active.sgd_dense(feats, labels, x, draws, step, reg)


def sgd_csr(data, cols, indptr, labels, x, draws, step, reg):
    return active.sgd_csr(data, cols, indptr, labels, x, draws, step, reg)


def saga_dense(feats, labels, x, table, avg, draws, step, reg):
    return active.saga_dense(feats, labels, x, table, avg, draws, step, reg)


def saga_csr(data, cols, indptr, labels, x, table, avg, draws, step, reg):
    return active.saga_csr(data, cols, indptr, labels, x, table, avg, draws, step, reg)
