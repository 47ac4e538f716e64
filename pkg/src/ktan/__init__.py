"""Adaptive sample-size truncated Newton solver for regularized logistic ERM.

The solve loop grows a nested subsample geometrically and takes one
truncated Newton step per stage: curvature is kept only above a threshold
tied to the regularizer, the closed-form low-rank inverse is applied to the
fresh gradient, and a gradient-norm test certifies statistical accuracy at
the new level. Hot per-sample kernels run through a compiled extension when
available, with a pure NumPy fallback selected at import.
"""

from ._version import __version__
from .baselines import (
    BaselineConfig,
    BaselineResult,
    OracleResult,
    adanewton_run,
    gd_run,
    newton_oracle,
    saga_run,
    sgd_run,
)
from .data import (
    SpectrumDecay,
    SyntheticSpec,
    normalize_rows,
    parse_dataset_arg,
    parse_libsvm,
    permute_order,
    synthesize,
    write_libsvm,
)
from .diagnostics import (
    DiagnosticsReport,
    decrement_recursion_rhs,
    growth_condition_lhs,
    inflation_factor,
    newton_decrement,
    simple_growth_lhs,
    simple_truncation_lhs,
    single_step_condition_lhs,
    stage_subopt,
    subopt_lower,
    subopt_recursion_rhs,
    subopt_upper,
    suggested_c_min,
    suggested_rho,
    theory_report,
)
from .errors import (
    CapabilityError,
    InitializationError,
    KtanError,
    NumericError,
    OracleError,
    ParseError,
    SolverError,
    StageError,
    ValidationError,
)
from .kernels import backend_name
from .linalg import (
    RandEigParams,
    SymEigPair,
    TruncatedEig,
    TruncatedInverse,
    apply_inverse,
    full_sym_eig,
    randomized_truncated_eig,
    select_rank,
    truncated_from_dense,
    truncation_epsilon,
)
from .risk import (
    LOGISTIC,
    Dataset,
    GradientCache,
    LogisticLoss,
    RiskConfig,
    RiskView,
    Sample,
    Schedule,
    WorkMeter,
)
from .solver import (
    AccuracyCheck,
    Backend,
    RunResult,
    SolverConfig,
    SolverState,
    StageOutcome,
    StepResult,
    accuracy_check,
    damped_newton_step,
    init_seed,
    ktan_step,
    run,
)
from .trace import TRACE_COLUMNS, TraceRecord, read_trace, write_trace

__all__ = [
    "__version__",
    # risk
    "Dataset",
    "Sample",
    "Schedule",
    "RiskConfig",
    "RiskView",
    "WorkMeter",
    "GradientCache",
    "LogisticLoss",
    "LOGISTIC",
    # linalg
    "SymEigPair",
    "TruncatedEig",
    "TruncatedInverse",
    "RandEigParams",
    "full_sym_eig",
    "select_rank",
    "truncated_from_dense",
    "randomized_truncated_eig",
    "apply_inverse",
    "truncation_epsilon",
    # solver
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
    # diagnostics
    "DiagnosticsReport",
    "theory_report",
    "newton_decrement",
    "stage_subopt",
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
    # baselines
    "BaselineConfig",
    "BaselineResult",
    "OracleResult",
    "gd_run",
    "sgd_run",
    "saga_run",
    "newton_oracle",
    "adanewton_run",
    # data
    "SpectrumDecay",
    "SyntheticSpec",
    "synthesize",
    "parse_libsvm",
    "write_libsvm",
    "permute_order",
    "normalize_rows",
    "parse_dataset_arg",
    # trace
    "TraceRecord",
    "TRACE_COLUMNS",
    "write_trace",
    "read_trace",
    # kernels
    "backend_name",
    # errors
    "KtanError",
    "ValidationError",
    "NumericError",
    "CapabilityError",
    "ParseError",
    "InitializationError",
    "StageError",
    "SolverError",
    "OracleError",
]
