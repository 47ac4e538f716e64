"""Adaptive sample-size truncated Newton solve loop.

Starting from a warm start that solves a small subsample to its statistical
accuracy, each stage grows the subsample by a factor alpha and takes ONE
truncated Newton step: the data curvature is approximated by its eigenpairs
above rho * (regularizer), the closed-form inverse is applied to the fresh
gradient, and the exit test ||grad R_n(x)|| < sqrt(2 c) * V_n certifies the
new level. Failed stages backtrack (alpha *= beta, rho *= delta) and, past
max_backtracks, fall into a damped-Newton safeguard at frozen n.

Work accounting: samples_cum ticks the attempt's n once per attempt (the
plot-axis meter); the WorkMeter behind grad_evals_cum ticks every per-sample
gradient evaluated fresh, including warm start and exit tests, with cache
reuse between a stage's exit test and the next stage's gradient.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    InitializationError,
    NumericError,
    SolverError,
    StageError,
    ValidationError,
)
from .linalg import (
    RandEigParams,
    TruncatedEig,
    apply_inverse,
    chol_solve,
    full_sym_eig,
    randomized_truncated_eig,
    truncated_from_dense,
    truncation_epsilon,
)
from .risk import GradientCache, RiskConfig, RiskView, WorkMeter
from .trace import TraceRecord

__all__ = [
    "Backend",
    "SolverConfig",
    "SolverState",
    "StepResult",
    "AccuracyCheck",
    "StageOutcome",
    "RunResult",
    "init_seed",
    "ktan_step",
    "accuracy_check",
    "damped_newton_step",
    "run",
]


class Backend(Enum):
    """How the truncated eigendecomposition is computed."""

    DENSE = "dense"
    RANDOMIZED = "randomized"


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the solve loop.

    alpha0 (> 1) grows the subsample per stage; rho0 in [0, 1] sets the
    truncation threshold rho * c * V_n (0 keeps every eigenpair: the exact
    adaptive Newton mode); beta, delta in (0, 1) shrink alpha and rho on a
    failed exit test; m0 is the warm-start subsample size. max_samples, when
    set, stops the run before an attempt would push samples_cum past it.
    """

    alpha0: float = 2.0
    rho0: float = 0.1
    beta: float = 0.5
    delta: float = 0.5
    m0: int = 124
    max_backtracks: int = 10
    eig_backend: Backend = Backend.DENSE
    seed: int = 0
    eig: RandEigParams = RandEigParams()
    init_max_iters: int = 1000
    safeguard_max_iters: int = 100
    max_samples: int | None = None

    def __post_init__(self):
        if isinstance(self.eig_backend, str):
            object.__setattr__(self, "eig_backend", Backend(self.eig_backend))
        if not (np.isfinite(self.alpha0) and self.alpha0 > 1):
            raise ValidationError("alpha0 must exceed 1")
        if not (np.isfinite(self.rho0) and 0.0 <= self.rho0 <= 1.0):
            raise ValidationError("rho0 must lie in [0, 1]")
        for name in ("beta", "delta"):
            v = getattr(self, name)
            if not (np.isfinite(v) and 0.0 < v < 1.0):
                raise ValidationError(f"{name} must lie in (0, 1)")
        if self.m0 < 1:
            raise ValidationError("m0 must be >= 1")
        if self.max_backtracks < 0:
            raise ValidationError("max_backtracks must be >= 0")
        if self.init_max_iters < 1 or self.safeguard_max_iters < 1:
            raise ValidationError("iteration caps must be >= 1")
        if self.max_samples is not None and self.max_samples < 0:
            raise ValidationError("max_samples must be >= 0")


@dataclass
class SolverState:
    """Mutable bookkeeping of one run; owned by a single run() call."""

    x: np.ndarray
    m: int
    n: int
    samples_cum: int = 0
    grad_evals_cum: int = 0
    wall_ms: int = 0
    trace: list = field(default_factory=list)


@dataclass(frozen=True)
class StepResult:
    """One truncated Newton step: the new point plus what the truncation did."""

    x_next: np.ndarray
    k: int
    epsilon: float
    grad_norm: float


@dataclass(frozen=True)
class AccuracyCheck:
    """Exit-test outcome: strict pass flag, the gradient norm it measured,
    and the strong-convexity suboptimality bound ||g||^2 / (2 c V_n)."""

    passed: bool
    grad_norm: float
    subopt_bound: float


@dataclass(frozen=True)
class StageOutcome:
    """One accepted stage: the m -> n move and the step that achieved it."""

    stage: int
    m: int
    n: int
    x_m: np.ndarray
    x_n: np.ndarray
    k: int
    epsilon: float
    alpha_used: float
    rho_used: float
    grad_norm: float
    backtracks: int
    safeguarded: bool


@dataclass(frozen=True)
class RunResult:
    """Final iterate plus the full audit trail of the run."""

    x: np.ndarray
    converged: bool
    state: SolverState
    stages: list
    iterates: list
    init_iters: int

    @property
    def trace(self):
        return self.state.trace

    @property
    def samples_cum(self):
        return self.state.samples_cum

    @property
    def grad_evals_cum(self):
        return self.state.grad_evals_cum


def accuracy_check(view, x, meter=None, cache=None):
    """Exit test at the view's level: ||grad R_n(x)|| < sqrt(2 c) * V_n.

    The inequality is strict; equality fails. Also reports the implied
    suboptimality bound ||g||^2 / (2 c V_n).
    """
    g = view.grad(x, meter=meter, cache=cache)
    gnorm = float(np.linalg.norm(g))
    v_n = view.accuracy
    c = view.config.c
    return AccuracyCheck(
        passed=gnorm < math.sqrt(2.0 * c) * v_n,
        grad_norm=gnorm,
        subopt_bound=gnorm**2 / (2.0 * c * v_n),
    )


def _exact_factors(view, x):
    # keep every strictly positive eigenpair; zero modes contribute nothing
    # to the closed-form inverse, so this equals the full-rank operator
    pair = full_sym_eig(view.data_hessian(x))
    vals = np.maximum(pair.eigvals, 0.0)
    keep = vals > 0.0
    return TruncatedEig(
        eigvals=vals[keep].copy(),
        basis=pair.eigvecs[:, keep].copy(),
        next_eig=0.0,
    )


def ktan_step(view, x, rho, *, backend=Backend.DENSE, eig_params=None,
              meter=None, cache=None):
    """One truncated Newton step from x at the view's subsample level.

    Computes g = grad R_n(x), truncates the data curvature at threshold
    rho * c * V_n (rho = 0 keeps everything and requires the dense backend),
    and applies the closed-form regularized inverse. Returns the new point,
    the realized rank k, the truncation ratio epsilon, and ||g||.
    """
    backend = Backend(backend)
    if not (np.isfinite(rho) and 0.0 <= rho <= 1.0):
        raise ValidationError("rho must lie in [0, 1]")
    g = view.grad(x, meter=meter, cache=cache)
    reg = view.regularizer
    try:
        if rho == 0.0:
            if backend is not Backend.DENSE:
                raise ValidationError(
                    "rho = 0 keeps the full spectrum; use the dense backend"
                )
            factors = _exact_factors(view, x)
        elif backend is Backend.DENSE:
            factors = truncated_from_dense(
                full_sym_eig(view.data_hessian(x)), rho * reg
            )
        else:
            factors = randomized_truncated_eig(
                view.data_hessian_operator(x),
                view.dim,
                rho * reg,
                params=eig_params,
            )
    except NumericError as exc:
        raise StageError(f"eigendecomposition failed: {exc}")
    direction = apply_inverse(factors, reg, g)
    x_next = x - direction
    if not np.all(np.isfinite(x_next)):
        raise NumericError("truncated Newton step produced non-finite values")
    return StepResult(
        x_next=x_next,
        k=factors.k,
        epsilon=truncation_epsilon(factors, reg),
        grad_norm=float(np.linalg.norm(g)),
    )


def damped_newton_step(view, x, grad=None):
    """One exact Newton step with Armijo backtracking (0.25, 0.5) on the
    view's risk. Returns (new point, step size taken)."""
    g = view.grad(x) if grad is None else grad
    direction = chol_solve(view.hessian(x), g)
    slope = float(g @ direction)
    fx = view.value(x)
    t = 1.0
    while view.value(x - t * direction) > fx - 0.25 * t * slope:
        t *= 0.5
        if t < 2.0**-40:
            raise NumericError("line search failed to find descent")
    return x - t * direction, t


def init_seed(dataset, risk_config=None, config=None, meter=None, cache=None):
    """Warm start: gradient descent on the m0-subsample risk from zero.

    Steps with 1/(M + c V_m0) until the entry test
    ||grad R_m0(x)|| < sqrt(2 c) * V_m0 passes; raises InitializationError
    (reporting the norm achieved) if init_max_iters is exhausted. Returns
    (x, iterations used). Ticks the gradient meter; does not touch the
    samples axis.
    """
    risk_config = risk_config if risk_config is not None else RiskConfig()
    config = config if config is not None else SolverConfig()
    if config.m0 > dataset.count:
        raise ValidationError(
            f"m0 = {config.m0} exceeds dataset size {dataset.count}"
        )
    view = RiskView(dataset, config.m0, risk_config)
    step = 1.0 / view.smoothness()
    target = math.sqrt(2.0 * risk_config.c) * view.accuracy
    x = np.zeros(dataset.dim)
    for it in range(config.init_max_iters + 1):
        g = view.grad(x, meter=meter, cache=cache)
        gnorm = float(np.linalg.norm(g))
        if gnorm < target:
            return x, it
        if it == config.init_max_iters:
            break
        x = x - step * g
    raise InitializationError(
        f"warm start did not reach {target:.3e} in {config.init_max_iters} "
        f"iterations (achieved {gnorm:.3e})",
        achieved_grad_norm=gnorm,
    )


def _eig_params_for(config, stage, attempt):
    # decorrelate probe draws across stages/attempts, deterministically
    mix = config.seed * 1_000_003 + stage * 1_009 + attempt
    return replace(config.eig, seed=mix)


def run(dataset, risk_config=None, config=None):
    """Full adaptive solve from warm start to the complete dataset.

    Returns a RunResult; every attempt (including backtracks and safeguard
    iterations) appends a TraceRecord and a matching entry in
    result.iterates. Raises SolverError (trace attached) if a stage's
    safeguard cannot pass the exit test, and InitializationError if the warm
    start fails.
    """
    risk_config = risk_config if risk_config is not None else RiskConfig()
    config = config if config is not None else SolverConfig()
    meter = WorkMeter()
    start = time.perf_counter()

    def wall():
        return int((time.perf_counter() - start) * 1000.0)

    anchor = GradientCache()  # keyed at the current stage's start point
    trial = GradientCache()  # keyed at the latest trial point
    x0, init_iters = init_seed(
        dataset, risk_config, config, meter=meter, cache=anchor
    )
    state = SolverState(x=x0, m=config.m0, n=config.m0)
    stages = []
    iterates = []

    def finish(converged):
        state.grad_evals_cum = meter.count
        state.wall_ms = wall()
        return RunResult(
            x=state.x,
            converged=converged,
            state=state,
            stages=stages,
            iterates=iterates,
            init_iters=init_iters,
        )

    def record(stage, attempt, n, gnorm, k, eps, alpha, rho, point):
        state.trace.append(
            TraceRecord(
                stage=stage,
                attempt=attempt,
                n=n,
                samples_cum=state.samples_cum,
                grad_evals_cum=meter.count,
                wall_ms=wall(),
                grad_norm=gnorm,
                k=k,
                epsilon=eps,
                alpha_used=alpha,
                rho_used=rho,
            )
        )
        iterates.append(None if point is None else point.copy())

    stage_idx = 0
    while state.m < dataset.count:
        stage_idx += 1
        x_m = state.x
        m = state.m
        alpha = config.alpha0
        rho = config.rho0
        attempt = 0
        backtracks = 0
        accepted = None
        while accepted is None:
            attempt += 1
            n = max(min(math.floor(alpha * m), dataset.count), m + 1)
            if (
                config.max_samples is not None
                and state.samples_cum + n > config.max_samples
            ):
                return finish(False)
            view = RiskView(dataset, n, risk_config)
            state.n = n
            try:
                step = ktan_step(
                    view,
                    x_m,
                    rho,
                    backend=config.eig_backend,
                    eig_params=_eig_params_for(config, stage_idx, attempt),
                    meter=meter,
                    cache=anchor,
                )
            except StageError:
                state.samples_cum += n  # the attempt's gradient was spent
                record(stage_idx, attempt, n, math.inf, None, None, alpha,
                       rho, None)
            else:
                state.samples_cum += n
                check = accuracy_check(view, step.x_next, meter=meter,
                                       cache=trial)
                record(stage_idx, attempt, n, check.grad_norm, step.k,
                       step.epsilon, alpha, rho, step.x_next)
                if check.passed:
                    accepted = StageOutcome(
                        stage=stage_idx,
                        m=m,
                        n=n,
                        x_m=x_m.copy(),
                        x_n=step.x_next.copy(),
                        k=step.k,
                        epsilon=step.epsilon,
                        alpha_used=alpha,
                        rho_used=rho,
                        grad_norm=check.grad_norm,
                        backtracks=backtracks,
                        safeguarded=False,
                    )
                    break
            backtracks += 1
            if backtracks > config.max_backtracks:
                accepted = _safeguard(
                    view, x_m, m, stage_idx, attempt, alpha, state, meter,
                    trial, config, record,
                )
                break
            alpha *= config.beta
            rho *= config.delta
        state.x = accepted.x_n
        state.m = accepted.n
        stages.append(accepted)
        anchor, trial = trial, anchor  # reuse the exit-test gradient terms
    return finish(True)


def _safeguard(view, x_m, m, stage_idx, attempt, alpha, state, meter, trial,
               config, record):
    """Frozen-n fallback: damped Newton until the exit test passes."""
    n = view.n
    x_cur = x_m
    for _ in range(config.safeguard_max_iters):
        attempt += 1
        g = view.grad(x_cur, meter=meter)
        x_cur, _ = damped_newton_step(view, x_cur, grad=g)
        state.samples_cum += n
        check = accuracy_check(view, x_cur, meter=meter, cache=trial)
        record(stage_idx, attempt, n, check.grad_norm, view.dim, 0.0, alpha,
               0.0, x_cur)
        if check.passed:
            return StageOutcome(
                stage=stage_idx,
                m=m,
                n=n,
                x_m=x_m.copy(),
                x_n=x_cur.copy(),
                k=view.dim,
                epsilon=0.0,
                alpha_used=alpha,
                rho_used=0.0,
                grad_norm=check.grad_norm,
                backtracks=config.max_backtracks + 1,
                safeguarded=True,
            )
    raise SolverError(
        f"safeguard failed to reach accuracy at n = {n} within "
        f"{config.safeguard_max_iters} damped Newton iterations",
        trace=state.trace,
    )
