"""Comparison solvers: full-gradient descent, single-sample SGD, SAGA, the
exact-inverse adaptive Newton baseline, and the high-precision Newton oracle
used to measure suboptimality.

All of them emit the shared TraceRecord schema. First-order methods tick the
gradient meter once per iteration and record samples_cum the same way (the
processed-gradients plot axis); the second-order baselines inherit the
solver's per-attempt accounting.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import OracleError, SolverError, ValidationError
from . import kernels
from .linalg import chol_solve
from .risk import RiskView, WorkMeter
from .solver import Backend, SolverConfig, damped_newton_step, run
from .trace import TraceRecord

__all__ = [
    "BaselineConfig",
    "BaselineResult",
    "OracleResult",
    "gd_run",
    "sgd_run",
    "saga_run",
    "newton_oracle",
    "adanewton_run",
]

DIVERGENCE_NORM = 1e8


@dataclass(frozen=True)
class BaselineConfig:
    """Shared knobs of the first-order baselines.

    step_size = None picks a method default (1/L for full-gradient descent,
    1/(2L) for SGD, 1/(3L) for SAGA, with L the risk's gradient-Lipschitz
    constant). The budget is max_iters when set; otherwise the stochastic
    methods run passes * n iterations and full-gradient descent runs 100.
    tol, when set, stops early once the full gradient norm (measured at
    checkpoints) drops below it.
    """

    step_size: float | None = None
    passes: float = 2.0
    max_iters: int | None = None
    tol: float | None = None
    seed: int = 0
    record_every: int | None = None
    keep_iterates: bool = True

    def __post_init__(self):
        if self.step_size is not None and not (
            np.isfinite(self.step_size) and self.step_size > 0
        ):
            raise ValidationError("step_size must be positive")
        if not (np.isfinite(self.passes) and self.passes >= 0):
            raise ValidationError("passes must be >= 0")
        if self.max_iters is not None and self.max_iters < 0:
            raise ValidationError("max_iters must be >= 0")
        if self.tol is not None and self.tol <= 0:
            raise ValidationError("tol must be positive")
        if self.record_every is not None and self.record_every < 1:
            raise ValidationError("record_every must be >= 1")


@dataclass(frozen=True)
class BaselineResult:
    """Final iterate, trace, and (optionally) the checkpoint iterates."""

    x: np.ndarray
    trace: list
    iterates: list
    grad_evals_cum: int
    wall_ms: int


@dataclass(frozen=True)
class OracleResult:
    """High-precision minimizer with its certificate."""

    x: np.ndarray
    grad_norm: float
    iters: int


def gd_run(view, config=None):
    """Full-gradient descent with step 1/(M + c V_n).

    Default budget 100 iterations; ticks n gradient evaluations per
    iteration. The trace's grad_norm at row t is measured at the point the
    step departed from; iterates[0] is the start, iterates[t] the point
    after t steps.
    """
    config = config if config is not None else BaselineConfig()
    iters = config.max_iters if config.max_iters is not None else 100
    step = config.step_size if config.step_size is not None else 1.0 / view.smoothness()
    meter = WorkMeter()
    start = time.perf_counter()
    x = np.zeros(view.dim)
    trace = []
    iterates = [x.copy()] if config.keep_iterates else []
    samples = 0
    for it in range(1, iters + 1):
        g = view.grad(x, meter=meter)
        gnorm = float(np.linalg.norm(g))
        x = x - step * g
        samples += view.n
        trace.append(
            TraceRecord(
                stage=it,
                attempt=1,
                n=view.n,
                samples_cum=samples,
                grad_evals_cum=meter.count,
                wall_ms=int((time.perf_counter() - start) * 1000),
                grad_norm=gnorm,
            )
        )
        if config.keep_iterates:
            iterates.append(x.copy())
        if config.tol is not None and gnorm <= config.tol:
            break
    return BaselineResult(
        x=x,
        trace=trace,
        iterates=iterates,
        grad_evals_cum=meter.count,
        wall_ms=int((time.perf_counter() - start) * 1000),
    )


def _stochastic_run(view, config, method):
    if view.dataset.is_sparse:
        feats = view.dataset.rows(view.n)
        data, cols, indptr = feats.data, feats.indices, feats.indptr
    else:
        feats = np.ascontiguousarray(view.dataset.rows(view.n))
    labels = np.ascontiguousarray(view.dataset.labels[: view.n])
    n = view.n
    smooth = view.smoothness()
    if config.step_size is not None:
        step = config.step_size
    else:
        step = 1.0 / (2.0 * smooth) if method == "sgd" else 1.0 / (3.0 * smooth)
    reg = view.regularizer
    budget = (
        config.max_iters
        if config.max_iters is not None
        else int(config.passes * n)
    )
    every = (
        config.record_every
        if config.record_every is not None
        else max(1, budget // 50)
    )
    rng = np.random.default_rng(config.seed)
    meter = WorkMeter()
    x = np.zeros(view.dim)
    if method == "saga":
        table = np.zeros(n)
        avg = np.zeros(view.dim)
    trace = []
    iterates = [x.copy()] if config.keep_iterates else []
    done = 0
    checkpoint = 0
    start = time.perf_counter()
    paused = 0.0
    while done < budget:
        take = min(every, budget - done)
        draws = rng.integers(0, n, size=take, dtype=np.int64)
        if method == "sgd":
            if view.dataset.is_sparse:
                kernels.sgd_csr(data, cols, indptr, labels, x, draws, step, reg)
            else:
                kernels.sgd_dense(feats, labels, x, draws, step, reg)
        else:
            if view.dataset.is_sparse:
                kernels.saga_csr(
                    data, cols, indptr, labels, x, table, avg, draws, step, reg
                )
            else:
                kernels.saga_dense(feats, labels, x, table, avg, draws, step, reg)
        done += take
        meter.tick(take)
        checkpoint += 1
        # checkpoint diagnostics pause the wall clock (not part of the method)
        t_diag = time.perf_counter()
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            raise SolverError(f"{method} diverged after {done} iterations",
                              trace=trace)
        gnorm = float(np.linalg.norm(view.grad(x)))
        wall = int((t_diag - start - paused) * 1000)
        trace.append(
            TraceRecord(
                stage=checkpoint,
                attempt=1,
                n=n,
                samples_cum=done,
                grad_evals_cum=meter.count,
                wall_ms=wall,
                grad_norm=gnorm,
            )
        )
        if config.keep_iterates:
            iterates.append(x.copy())
        paused += time.perf_counter() - t_diag
        if config.tol is not None and gnorm <= config.tol:
            break
    return BaselineResult(
        x=x,
        trace=trace,
        iterates=iterates,
        grad_evals_cum=meter.count,
        wall_ms=int((time.perf_counter() - start - paused) * 1000),
    )


def sgd_run(view, config=None):
    """Single-sample stochastic gradient descent, uniform with replacement.

    Update: x <- x - step * (dloss_i * a_i + reg * x). Ticks the gradient
    meter once per iteration; trace rows are written every record_every
    iterations (default: ~50 checkpoints over the budget).
    """
    return _stochastic_run(view, config if config is not None else BaselineConfig(), "sgd")


def saga_run(view, config=None):
    """SAGA with a scalar-per-sample stored gradient table.

    The per-sample gradient is (margin derivative) * a_i, so the table keeps
    one scalar per sample plus one running-average vector: memory O(n + p).
    Table starts at zero (stored gradients all zero).
    """
    return _stochastic_run(view, config if config is not None else BaselineConfig(), "saga")


def newton_oracle(view, tol=1e-12, max_iters=200, x0=None):
    """High-precision minimizer of the view's risk via damped Newton.

    Armijo-backtracked Newton iterations until ||grad|| <= tol. Near the
    optimum the Armijo test drowns in floating-point noise (objective
    decrements fall below the resolution of the value itself), so once the
    Newton decrement certifies the quadratic basin the step is taken
    undamped. Deterministic; raises OracleError if max_iters is exhausted.
    """
    if not (np.isfinite(tol) and tol > 0):
        raise ValidationError("tol must be positive")
    x = np.zeros(view.dim) if x0 is None else np.array(x0, dtype=np.float64)
    for it in range(max_iters + 1):
        g = view.grad(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return OracleResult(x=x, grad_norm=gnorm, iters=it)
        if it == max_iters:
            break
        direction = chol_solve(view.hessian(x), g)
        if float(g @ direction) < 0.0625:  # decrement^2 < (1/4)^2
            x = x - direction
        else:
            x, _ = damped_newton_step(view, x, grad=g)
    raise OracleError(
        f"oracle did not reach {tol:.1e} in {max_iters} iterations "
        f"(achieved {gnorm:.3e})"
    )


def adanewton_run(dataset, risk_config=None, solver_config=None):
    """Exact-inverse adaptive Newton baseline: the solver with rho0 = 0 and
    the dense backend (every eigenpair kept, same code path)."""
    solver_config = solver_config if solver_config is not None else SolverConfig()
    forced = replace(solver_config, rho0=0.0, eig_backend=Backend.DENSE)
    return run(dataset, risk_config, forced)
