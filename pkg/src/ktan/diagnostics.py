"""Numeric evaluators for the method's convergence certificates.

Every bound the analysis provides is evaluated here as a pure function of
measured or plugged-in scalars, so a run can be audited stage by stage:
growth condition (is the warm start inside the quadratic region of the larger
subsample?), single-step condition (does one truncated step reach statistical
accuracy?), the warm-start suboptimality inflation bound, the one-step
suboptimality and decrement recursions, and the decrement/suboptimality
sandwich. None of these feed back into the solver's control flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, OracleError, ValidationError
from .linalg import chol_solve
from .risk import RiskView

__all__ = [
    "inflation_factor",
    "growth_condition_lhs",
    "single_step_condition_lhs",
    "subopt_recursion_rhs",
    "decrement_recursion_rhs",
    "subopt_lower",
    "subopt_upper",
    "simple_growth_lhs",
    "simple_truncation_lhs",
    "suggested_c_min",
    "suggested_rho",
    "newton_decrement",
    "stage_subopt",
    "theory_report",
    "DiagnosticsReport",
    "QUADRATIC_REGION",
]

# Newton decrement below this marks the quadratic convergence region.
QUADRATIC_REGION = 0.25


def _positive(name, v):
    if not (np.isfinite(v) and v > 0):
        raise ValidationError(f"{name} must be a positive scalar")
    return float(v)


def _nonneg(name, v):
    if not (np.isfinite(v) and v >= 0):
        raise ValidationError(f"{name} must be a non-negative scalar")
    return float(v)


def inflation_factor(c, opt_norm, alpha):
    """Bound multiplier K on warm-start suboptimality across levels.

    A point within accuracy V_m of the level-m risk is within K * V_m of the
    level-n risk (n = alpha * m, inverse-n schedule):
    K = 3 + (2 + c * ||x*||^2 / 2) * (1 - 1/alpha).
    """
    c = _positive("c", c)
    opt_norm = _nonneg("opt_norm", opt_norm)
    if not (np.isfinite(alpha) and alpha > 1):
        raise ValidationError("alpha must exceed 1")
    return 3.0 + (2.0 + c * opt_norm**2 / 2.0) * (1.0 - 1.0 / alpha)


def growth_condition_lhs(m, n, c, v_m, v_n, smoothness_m, opt_norm):
    """LHS of the sample-growth condition; the warm start stays in the
    quadratic region of the level-n risk when this is <= 1/4.

    sqrt(2 (M + c V_m) V_m / (c V_n)) + 2 (n - m) / (n sqrt(c))
    + ((2 + sqrt(2)) sqrt(c) + c ||x*||) (V_m - V_n) / sqrt(c V_n)
    """
    if not m < n:
        raise ValidationError("need m < n")
    c = _positive("c", c)
    v_m, v_n = _positive("v_m", v_m), _positive("v_n", v_n)
    smoothness_m = _nonneg("smoothness_m", smoothness_m)
    opt_norm = _nonneg("opt_norm", opt_norm)
    t1 = math.sqrt(2.0 * (smoothness_m + c * v_m) * v_m / (c * v_n))
    t2 = 2.0 * (n - m) / (n * math.sqrt(c))
    t3 = ((2.0 + math.sqrt(2.0)) * math.sqrt(c) + c * opt_norm) * (v_m - v_n)
    t3 /= math.sqrt(c * v_n)
    return t1 + t2 + t3


def subopt_recursion_rhs(subopt, epsilon):
    """One truncated step maps level-n suboptimality S to at most

    16/(3-e)^4 * [ 36 (1+e)^2 S^2 + 30 e (1+e) S^{3/2} + 6 e^2 S ]

    (e = truncation ratio; e = 0 recovers the pure Newton recursion
    (64/9) S^2). Valid inside the quadratic region.
    """
    subopt = _nonneg("subopt", subopt)
    epsilon = _nonneg("epsilon", epsilon)
    if epsilon >= 3.0:
        raise ValidationError("epsilon must be < 3")
    lead = 16.0 / (3.0 - epsilon) ** 4
    poly = (
        36.0 * (1.0 + epsilon) ** 2 * subopt**2
        + 30.0 * epsilon * (1.0 + epsilon) * subopt**1.5
        + 6.0 * epsilon**2 * subopt
    )
    return lead * poly


def single_step_condition_lhs(k_factor, rho, v_m):
    """LHS of the single-step sufficiency condition: one truncated step from
    a K*V_m-suboptimal warm start lands within V_n when this is <= V_n.

    Identical polynomial to subopt_recursion_rhs evaluated at S = K * V_m
    and epsilon = rho.
    """
    k_factor = _positive("k_factor", k_factor)
    v_m = _positive("v_m", v_m)
    return subopt_recursion_rhs(k_factor * v_m, rho)


def decrement_recursion_rhs(decrement, epsilon):
    """One truncated step maps Newton decrement d to at most

    ((1+e) d^2 + e d) / (1 - (1+e) d)^2,

    defined for (1+e) d < 1; e = 0 recovers d^2/(1-d)^2.
    """
    decrement = _nonneg("decrement", decrement)
    epsilon = _nonneg("epsilon", epsilon)
    contracted = (1.0 + epsilon) * decrement
    if contracted >= 1.0:
        raise ValidationError("(1 + epsilon) * decrement must be < 1")
    return ((1.0 + epsilon) * decrement**2 + epsilon * decrement) / (
        1.0 - contracted
    ) ** 2


def subopt_lower(decrement):
    """Suboptimality is at least decrement^2 / 6 inside the quadratic region."""
    return _nonneg("decrement", decrement) ** 2 / 6.0


def subopt_upper(decrement):
    """Suboptimality is at most decrement^2 inside the quadratic region."""
    return _nonneg("decrement", decrement) ** 2


def simple_growth_lhs(smoothness, c, alpha):
    """Schedule-free simplification of the growth condition (valid for large
    m with V_m <= alpha V_n): sqrt(2 alpha M / c) + 2(alpha-1)/(alpha sqrt(c)),
    to be <= 1/4."""
    smoothness = _nonneg("smoothness", smoothness)
    c = _positive("c", c)
    if not (np.isfinite(alpha) and alpha > 1):
        raise ValidationError("alpha must exceed 1")
    return math.sqrt(2.0 * alpha * smoothness / c) + 2.0 * (alpha - 1.0) / (
        alpha * math.sqrt(c)
    )


def simple_truncation_lhs(k_factor, rho):
    """Simplified single-step condition: 96 K rho^2 / (3 - rho)^2, to be
    <= 1/alpha."""
    k_factor = _positive("k_factor", k_factor)
    rho = _nonneg("rho", rho)
    if rho >= 3.0:
        raise ValidationError("rho must be < 3")
    return 96.0 * k_factor * rho**2 / (3.0 - rho) ** 2


def suggested_c_min(smoothness):
    """Regularization constant above which the suggested (alpha=2) pair
    satisfies the simplified growth condition: 16 (2 sqrt(M) + 1)^2."""
    smoothness = _nonneg("smoothness", smoothness)
    return 16.0 * (2.0 * math.sqrt(smoothness) + 1.0) ** 2


def suggested_rho(c, opt_norm):
    """Truncation factor of the suggested pair: 9/(21 sqrt(c ||x*||^2 + 16) + 3)."""
    c = _positive("c", c)
    opt_norm = _nonneg("opt_norm", opt_norm)
    return 9.0 / (21.0 * math.sqrt(c * opt_norm**2 + 16.0) + 3.0)


def _decrement_from(grad, hess):
    # sqrt(g^T H^{-1} g) with H symmetric positive definite
    d = chol_solve(hess, grad)
    val = float(grad @ d)
    return math.sqrt(max(val, 0.0))


def _cg_solve(matvec, rhs, rtol=1e-10, max_iters=None):
    n = rhs.shape[0]
    max_iters = max_iters if max_iters is not None else 20 * n
    x = np.zeros_like(rhs)
    r = rhs.copy()
    p = r.copy()
    rs = float(r @ r)
    target = rtol * math.sqrt(rs)
    if math.sqrt(rs) == 0.0:
        return x
    for _ in range(max_iters):
        ap = matvec(p)
        denom = float(p @ ap)
        if denom <= 0:
            raise NumericError("conjugate gradient met non-positive curvature")
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        if math.sqrt(rs_new) <= target:
            return x
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise NumericError("conjugate gradient stagnated")


def newton_decrement(view, x):
    """Newton decrement sqrt(g^T H^{-1} g) of the view's risk at x.

    Diagnostic only; the solve uses a dense Cholesky below the dense-Hessian
    cap and matrix-free conjugate gradient above it. Not metered.
    """
    g = view.grad(x)
    if view.dim <= view.config.dense_hessian_cap:
        return _decrement_from(g, view.hessian(x))
    hvp = view.data_hessian_operator(x)
    reg = view.regularizer
    d = _cg_solve(lambda v: hvp(v) + reg * v, g)
    return math.sqrt(max(float(g @ d), 0.0))


def stage_subopt(view, x, xstar):
    """Suboptimality R_n(x) - R_n(xstar) against an oracle minimizer.

    Raises on values below -1e-12 (the oracle is then inconsistent with the
    view); small negative noise above that is clamped to 0.
    """
    gap = view.value(x) - view.value(xstar)
    if gap < -1e-12:
        raise OracleError(
            f"suboptimality {gap:.3e} < -1e-12; oracle solution inconsistent"
        )
    return max(gap, 0.0)


@dataclass(frozen=True)
class DiagnosticsReport:
    """Every convergence certificate of one stage (m -> n), evaluated.

    Measured quantities use the dataset; plug-in quantities use opt_norm_used
    (callers substitute an oracle norm when they have one). *_ok booleans
    compare each condition to its own threshold.
    """

    m: int
    n: int
    v_m: float
    v_n: float
    alpha: float
    rho: float
    epsilon_used: float
    opt_norm_used: float
    decrement_before: float
    in_quadratic_region: bool
    inflation_factor: float
    warm_start_subopt_bound: float
    growth_condition_lhs: float
    growth_condition_ok: bool
    single_step_condition_lhs: float
    single_step_condition_ok: bool
    simple_growth_lhs: float
    simple_growth_ok: bool
    simple_truncation_lhs: float
    simple_truncation_ok: bool
    subopt_recursion_bound: float
    decrement_recursion_bound: float
    subopt_lower: float
    subopt_upper: float


def theory_report(
    dataset,
    x_m,
    m,
    n,
    risk_config,
    rho,
    opt_norm=None,
    *,
    epsilon=None,
    warm_subopt=None,
):
    """Evaluate every stage certificate for the step from level m to level n.

    opt_norm is the plug-in for the unknown minimizer norm (defaults to
    ||x_m||; audits substitute an oracle value). epsilon defaults to rho (its
    upper bound); warm_subopt, when supplied (a measured S_n(x_m)), replaces
    the warm-start bound K * V_m in the suboptimality recursion. Pure
    function; never drives solver control flow.
    """
    if not 1 <= m < n <= dataset.count:
        raise ValidationError("need 1 <= m < n <= dataset size")
    x_m = np.asarray(x_m, dtype=np.float64)
    opt_norm = float(np.linalg.norm(x_m)) if opt_norm is None else float(opt_norm)
    eps = float(rho) if epsilon is None else float(epsilon)
    view_n = RiskView(dataset, n, risk_config)
    view_m = RiskView(dataset, m, risk_config)
    c = risk_config.c
    v_m, v_n = view_m.accuracy, view_n.accuracy
    alpha = n / m
    k_factor = inflation_factor(c, opt_norm, alpha)
    lam = newton_decrement(view_n, x_m)
    growth = growth_condition_lhs(
        m, n, c, v_m, v_n, view_m.data_smoothness(), opt_norm
    )
    single = single_step_condition_lhs(k_factor, rho, v_m)
    sg = simple_growth_lhs(view_n.data_smoothness(), c, alpha)
    st = simple_truncation_lhs(k_factor, rho)
    warm = k_factor * v_m if warm_subopt is None else float(warm_subopt)
    lam_bound = (
        decrement_recursion_rhs(lam, eps)
        if (1.0 + eps) * lam < 1.0
        else math.inf
    )
    return DiagnosticsReport(
        m=int(m),
        n=int(n),
        v_m=v_m,
        v_n=v_n,
        alpha=alpha,
        rho=float(rho),
        epsilon_used=eps,
        opt_norm_used=opt_norm,
        decrement_before=lam,
        in_quadratic_region=lam < QUADRATIC_REGION,
        inflation_factor=k_factor,
        warm_start_subopt_bound=k_factor * v_m,
        growth_condition_lhs=growth,
        growth_condition_ok=growth <= 0.25,
        single_step_condition_lhs=single,
        single_step_condition_ok=single <= v_n,
        simple_growth_lhs=sg,
        simple_growth_ok=sg <= 0.25,
        simple_truncation_lhs=st,
        simple_truncation_ok=st <= 1.0 / alpha,
        subopt_recursion_bound=subopt_recursion_rhs(warm, eps),
        decrement_recursion_bound=lam_bound,
        subopt_lower=subopt_lower(lam),
        subopt_upper=subopt_upper(lam),
    )
