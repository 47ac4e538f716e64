"""Command-line harness: solve, compare, check, and oracle subcommands.

CSV traces are the output interface (plotting is out of scope). Every trace
file written to disk gets a JSON manifest sidecar recording the argv, the
resolved configuration, the dataset fingerprint and the library version, so
a run can be reproduced; with --deterministic the reproduction is
byte-identical (wall_ms is zeroed, it being the one nondeterministic column).

Exit codes: 0 success, 1 usage/validation/parse problems, 2 runtime failures
(divergence, failed line searches, oracle caps).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ._version import __version__
from .baselines import (
    BaselineConfig,
    adanewton_run,
    gd_run,
    newton_oracle,
    saga_run,
    sgd_run,
)
from .data import normalize_rows, parse_dataset_arg, permute_order
from .diagnostics import newton_decrement, stage_subopt, suggested_rho, theory_report
from .errors import (
    CapabilityError,
    InitializationError,
    NumericError,
    OracleError,
    ParseError,
    SolverError,
    ValidationError,
)
from .kernels import backend_name
from .risk import RiskConfig, RiskView, Schedule
from .solver import SolverConfig, run
from .trace import TRACE_COLUMNS, write_trace

__all__ = [
    "RunManifest",
    "main",
    "build_parser",
    "cmd_solve",
    "cmd_compare",
    "cmd_check",
    "cmd_oracle",
]

USAGE_EXIT = 1
RUNTIME_EXIT = 2

_USAGE_ERRORS = (ValidationError, ParseError, CapabilityError)
_RUNTIME_ERRORS = (NumericError, SolverError, InitializationError, OracleError)


class _MissingFlag(ValidationError):
    """A required option was given neither on the CLI nor in the config file."""


class _UsageExit(Exception):
    """Raised by the parser instead of sys.exit on bad arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise _UsageExit(message)


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility sidecar written next to each trace file."""

    command_line: list
    resolved_config: dict
    dataset_fingerprint: str
    seeds: dict
    started: str
    finished: str
    version: str
    kernel_backend: str

    def write(self, trace_path):
        path = Path(str(trace_path) + ".manifest.json")
        path.write_text(
            json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)
            + "\n"
        )
        return path


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# converters applied to config-file values; CLI values arrive already typed
_CONVERTERS = {
    "data": str,
    "dim": int,
    "normalize": _parse_bool,
    "permute_seed": int,
    "c": float,
    "schedule": str,
    "alpha0": float,
    "rho0": str,
    "beta": float,
    "delta": float,
    "m0": int,
    "max_backtracks": int,
    "backend": str,
    "seed": int,
    "deterministic": _parse_bool,
    "out": str,
    "with_oracle": _parse_bool,
    "solvers": str,
    "budget_grads": int,
    "budget_ms": int,
    "sgd_step": float,
    "saga_step": float,
    "passes": float,
    "parallel": _parse_bool,
    "out_dir": str,
    "at_stage": int,
    "all_stages": _parse_bool,
    "n": int,
    "tol": float,
}


def read_config_file(path):
    """Parse a `key = value` config file; '#' starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            key, sep, value = body.partition("=")
            if not sep:
                raise ParseError("expected key = value", line_number=line_no)
            key = key.strip().replace("-", "_")
            value = value.strip()
            if key not in _CONVERTERS:
                raise ParseError(f"unknown config key {key!r}",
                                 line_number=line_no)
            out[key] = (value, line_no)
    return out


class Options:
    """Merged option view: CLI flags > config file > caller defaults.

    Every resolved value is recorded, so the manifest can state the exact
    configuration a run used.
    """

    def __init__(self, args):
        self._args = vars(args)
        self.resolved = {}
        cfg = self._args.get("config")
        self._file = read_config_file(cfg) if cfg else {}

    def get(self, key, default=None):
        value = self._args.get(key)
        if value is None and key in self._file:
            text, line_no = self._file[key]
            try:
                value = _CONVERTERS[key](text)
            except ValueError:
                raise ParseError(f"bad value for {key!r}: {text!r}",
                                 line_number=line_no)
        if value is None:
            value = default
        self.resolved[key] = value
        return value


def _utcnow():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _load_dataset(opt):
    """Resolve --data/--dim/--normalize/--permute-seed into a Dataset."""
    arg = opt.get("data")
    if arg is None:
        raise _MissingFlag("--data is required (flag or config-file entry)")
    dataset, truth = parse_dataset_arg(arg, dim=opt.get("dim"))
    if opt.get("normalize", False):
        dataset = normalize_rows(dataset)
    pseed = opt.get("permute_seed", 0)
    if pseed:
        dataset = permute_order(dataset, pseed)
    return dataset, truth


def _risk_config(opt):
    kwargs = {}
    c = opt.get("c")
    if c is not None:
        kwargs["c"] = c
    sched = opt.get("schedule")
    if sched is not None:
        kwargs["schedule"] = Schedule(sched)
    return RiskConfig(**kwargs)


def _resolve_rho0(opt, dataset, risk_config, oracle_x=None):
    """rho0 is a float or the literal 'suggested' (needs an oracle norm)."""
    raw = opt.get("rho0")
    if raw is None:
        return None
    text = str(raw).strip().lower()
    if text == "suggested":
        if oracle_x is None:
            view = RiskView(dataset, dataset.count, risk_config)
            oracle_x = newton_oracle(view).x
        rho = suggested_rho(risk_config.c, float(np.linalg.norm(oracle_x)))
        opt.resolved["rho0"] = rho
        return rho
    try:
        rho = float(text)
    except ValueError:
        raise ValidationError(f"--rho0 must be a float or 'suggested', got {raw!r}")
    opt.resolved["rho0"] = rho  # manifest records the typed value
    return rho


def _solver_config(opt, rho0, **extra):
    kwargs = {}
    for key in ("alpha0", "beta", "delta", "m0", "max_backtracks", "seed"):
        value = opt.get(key)
        if value is not None:
            kwargs[key] = value
    backend = opt.get("backend")
    if backend is not None:
        kwargs["eig_backend"] = backend
    if rho0 is not None:
        kwargs["rho0"] = rho0
    kwargs.update(extra)
    return SolverConfig(**kwargs)


def _strip_wall(rows):
    for rec in rows:
        rec.wall_ms = 0
    return rows


def _fill_stage_subopts(dataset, risk_config, rows, points, tol=1e-12):
    """Post-pass: solve each visited level to the oracle and fill subopt.

    Oracles chain warm starts through increasing n, so the whole pass costs
    a handful of Newton iterations per level.
    """
    levels = sorted({rec.n for rec, pt in zip(rows, points) if pt is not None})
    xstar = {}
    warm = None
    for n in levels:
        view = RiskView(dataset, n, risk_config)
        warm = newton_oracle(view, tol=tol, x0=warm).x
        xstar[n] = warm
    for rec, pt in zip(rows, points):
        if pt is not None:
            view = RiskView(dataset, rec.n, risk_config)
            rec.subopt = stage_subopt(view, pt, xstar[rec.n])
    return xstar


def _summarize_run(result, file=None):
    # resolve the stream at call time so redirection works
    file = file if file is not None else sys.stderr
    state = result.state
    print(
        f"converged={result.converged} stages={len(result.stages)} "
        f"n_final={state.m} samples_cum={state.samples_cum} "
        f"grad_evals_cum={state.grad_evals_cum} wall_ms={state.wall_ms} "
        f"init_iters={result.init_iters}",
        file=file,
    )


def _manifest(args, opt, dataset, started):
    seeds = {
        "seed": opt.resolved.get("seed"),
        "permute_seed": opt.resolved.get("permute_seed"),
    }
    resolved = {
        k: (v.name.lower() if hasattr(v, "name") else v)
        for k, v in sorted(opt.resolved.items())
    }
    return RunManifest(
        command_line=list(getattr(args, "_argv", [])),
        resolved_config=resolved,
        dataset_fingerprint=dataset.fingerprint(),
        seeds=seeds,
        started=started,
        finished=_utcnow(),
        version=__version__,
        kernel_backend=backend_name(),
    )


def cmd_solve(args):
    """Run the adaptive solve and emit its trace CSV (plus manifest)."""
    opt = Options(args)
    started = _utcnow()
    dataset, _ = _load_dataset(opt)
    risk_config = _risk_config(opt)
    rho0 = _resolve_rho0(opt, dataset, risk_config)
    config = _solver_config(opt, rho0)
    result = run(dataset, risk_config, config)
    rows = result.trace
    if opt.get("with_oracle", False):
        _fill_stage_subopts(dataset, risk_config, rows, result.iterates)
    if opt.get("deterministic", False):
        _strip_wall(rows)
    out = opt.get("out")
    if out is None:
        write_trace(rows, sys.stdout)
    else:
        write_trace(rows, out)
        _manifest(args, opt, dataset, started).write(out)
    _summarize_run(result)
    return 0


def cmd_oracle(args):
    """Solve one subsample level to high precision and print the minimizer."""
    opt = Options(args)
    dataset, _ = _load_dataset(opt)
    risk_config = _risk_config(opt)
    n = opt.get("n", dataset.count)
    if not 1 <= n <= dataset.count:
        raise ValidationError(
            f"--n must lie in [1, {dataset.count}], got {n}"
        )
    view = RiskView(dataset, n, risk_config)
    res = newton_oracle(view, tol=opt.get("tol", 1e-12))
    out = opt.get("out")
    if out is None:
        _write_oracle(res, sys.stdout)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            _write_oracle(res, fh)
    print(f"n={n} grad_norm={res.grad_norm:.3e} iters={res.iters}",
          file=sys.stderr)
    return 0


def _write_oracle(res, dest):
    for v in res.x:
        dest.write(f"{v:.17g}\n")
    dest.write(f"# grad_norm = {res.grad_norm:.17g}\n")


_COMPARE_SOLVERS = ("ktan", "adanewton", "sgd", "saga", "gd")


def _compare_one(name, dataset, risk_config, solver_config, opt, budget):
    """Run one competitor; returns (rows, points aligned with rows)."""
    if name in ("ktan", "adanewton"):
        cfg = (
            replace(solver_config, max_samples=budget)
            if budget is not None
            else solver_config
        )
        runner = run if name == "ktan" else adanewton_run
        result = runner(dataset, risk_config, cfg)
        return result.trace, result.iterates
    view = RiskView(dataset, dataset.count, risk_config)
    if name == "gd":
        iters = budget // dataset.count if budget is not None else None
        config = BaselineConfig(max_iters=iters, seed=opt.get("seed", 0))
        result = gd_run(view, config)
    else:
        config = BaselineConfig(
            step_size=opt.get(f"{name}_step"),
            passes=opt.get("passes", 2.0),
            max_iters=budget,
            seed=opt.get("seed", 0),
        )
        result = (sgd_run if name == "sgd" else saga_run)(view, config)
    # iterates[0] is the start; row t pairs with the point after its work
    return result.trace, result.iterates[1:]


def cmd_compare(args):
    """Race the solver against its baselines under a shared work budget.

    Writes one CSV per solver plus a merged long-format CSV (leading solver
    column); suboptimality in every trace is measured against one shared
    full-data oracle, so the files plot directly against samples_cum or
    wall_ms.
    """
    opt = Options(args)
    started = _utcnow()
    dataset, _ = _load_dataset(opt)
    risk_config = _risk_config(opt)
    names = [
        s.strip()
        for s in opt.get("solvers", ",".join(_COMPARE_SOLVERS)).split(",")
        if s.strip()
    ]
    for name in names:
        if name not in _COMPARE_SOLVERS:
            raise ValidationError(
                f"unknown solver {name!r}; choose from {', '.join(_COMPARE_SOLVERS)}"
            )
    budget = opt.get("budget_grads")
    budget_ms = opt.get("budget_ms")
    deterministic = opt.get("deterministic", False)
    out_dir = Path(opt.get("out_dir", "compare_out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    results = {}
    if budget == 0:
        for name in names:
            results[name] = []
    else:
        view_full = RiskView(dataset, dataset.count, risk_config)
        oracle = newton_oracle(view_full)
        rho0 = _resolve_rho0(opt, dataset, risk_config, oracle_x=oracle.x)
        solver_config = _solver_config(opt, rho0)

        def work(name):
            rows, points = _compare_one(
                name, dataset, risk_config, solver_config, opt, budget
            )
            for rec, pt in zip(rows, points):
                if pt is not None:
                    rec.subopt = stage_subopt(view_full, pt, oracle.x)
            if budget_ms is not None:
                rows = [r for r in rows if r.wall_ms <= budget_ms]
            if deterministic:
                _strip_wall(rows)
            # each worker owns its trace file
            write_trace(rows, out_dir / f"{name}.csv")
            return rows

        if opt.get("parallel", False):
            with ThreadPoolExecutor(max_workers=len(names)) as pool:
                futures = {name: pool.submit(work, name) for name in names}
                for name in names:
                    results[name] = futures[name].result()
        else:
            for name in names:
                results[name] = work(name)

    if budget == 0:
        for name in names:
            write_trace([], out_dir / f"{name}.csv")

    merged = out_dir / "comparison.csv"
    with open(merged, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("solver",) + TRACE_COLUMNS)
        for name in names:
            for rec in results[name]:
                writer.writerow([name] + rec.to_row())

    manifest = _manifest(args, opt, dataset, started)
    for name in names:
        manifest.write(out_dir / f"{name}.csv")
    manifest.write(merged)
    for name in names:
        rows = results[name]
        tail = rows[-1] if rows else None
        summary = (
            "no rows"
            if tail is None
            else f"samples_cum={tail.samples_cum} subopt="
            + ("" if tail.subopt is None else f"{tail.subopt:.3e}")
        )
        print(f"{name}: {summary}", file=sys.stderr)
    return 0


def _fmt_field(value):
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def cmd_check(args):
    """Run the solver, then audit every accepted stage against the theory.

    Emits one field=value block per stage: the full certificate report, the
    oracle-measured suboptimalities and decrements, and per-bound verdicts.
    The summary counts how many stages satisfied (a) the quadratic-region
    entry, (b) the sample-growth condition, (c) the single-step condition,
    and (d) the empirical suboptimality recursion. Bound violations are
    reported facts, not errors: the exit code stays 0.
    """
    opt = Options(args)
    dataset, _ = _load_dataset(opt)
    risk_config = _risk_config(opt)
    rho0 = _resolve_rho0(opt, dataset, risk_config)
    config = _solver_config(opt, rho0)
    result = run(dataset, risk_config, config)
    stages = result.stages
    if not stages:
        print("no stages: the warm-start level already covers the dataset")
        return 0
    at = opt.get("at_stage")
    opt.get("all_stages")  # recorded for the manifest; all-stages is default
    if at is not None and not any(st.stage == at for st in stages):
        raise ValidationError(
            f"--at-stage {at} out of range; run has stages 1..{stages[-1].stage}"
        )

    # chained oracles: each accepted level warm-starts the next
    xstar = {}
    warm = None
    for st in stages:
        view = RiskView(dataset, st.n, risk_config)
        warm = newton_oracle(view, x0=warm).x
        xstar[st.n] = warm
    opt_norm = float(np.linalg.norm(warm))

    counts = {"region": 0, "growth": 0, "single_step": 0, "recursion": 0}
    for st in stages:
        view = RiskView(dataset, st.n, risk_config)
        s_warm = stage_subopt(view, st.x_m, xstar[st.n])
        s_step = stage_subopt(view, st.x_n, xstar[st.n])
        lam_after = newton_decrement(view, st.x_n)
        report = theory_report(
            dataset,
            st.x_m,
            st.m,
            st.n,
            risk_config,
            st.rho_used,
            opt_norm=opt_norm,
            epsilon=st.epsilon,
            warm_subopt=s_warm,
        )
        recursion_ok = s_step <= report.subopt_recursion_bound
        decrement_ok = lam_after <= report.decrement_recursion_bound
        counts["region"] += report.in_quadratic_region
        counts["growth"] += report.growth_condition_ok
        counts["single_step"] += report.single_step_condition_ok
        counts["recursion"] += recursion_ok
        if at is not None and st.stage != at:
            continue
        print(f"stage={st.stage}")
        for f in dataclasses.fields(report):
            print(f"{f.name}={_fmt_field(getattr(report, f.name))}")
        print(f"measured_warm_subopt={_fmt_field(s_warm)}")
        print(f"measured_step_subopt={_fmt_field(s_step)}")
        print(f"measured_decrement_after={_fmt_field(lam_after)}")
        print(f"subopt_recursion_ok={recursion_ok}")
        print(f"decrement_recursion_ok={decrement_ok}")
        print(f"safeguarded={st.safeguarded}")
        print(f"backtracks={st.backtracks}")
        print()
    total = len(stages)
    print(
        f"summary: stages={total} converged={result.converged} "
        f"region_ok={counts['region']}/{total} "
        f"growth_ok={counts['growth']}/{total} "
        f"single_step_ok={counts['single_step']}/{total} "
        f"recursion_ok={counts['recursion']}/{total}"
    )
    if result.converged and min(counts.values()) < total:
        print(
            "note: unmet conditions flag guarantee preconditions, "
            "not solver failure; this run converged"
        )
    return 0


def _add_data_flags(parser):
    parser.add_argument(
        "--data",
        help="libsvm path or synth:n=...,p=...[,decay=geo:0.5][,noise=0][,seed=0][,scale=3]",
    )
    parser.add_argument("--dim", type=int,
                        help="declare the feature dimension (libsvm files)")
    parser.add_argument("--normalize", action="store_true", default=None,
                        help="scale every sample to unit norm")
    parser.add_argument("--permute-seed", type=int, dest="permute_seed",
                        help="global shuffle fixing the subsample order (0 keeps file order)")
    parser.add_argument("--config",
                        help="`key = value` file merged below CLI flags")


def _add_solver_flags(parser):
    parser.add_argument("--c", type=float, help="regularization strength")
    parser.add_argument("--schedule", choices=("inv_n", "inv_sqrt_n"),
                        help="statistical accuracy V_n")
    parser.add_argument("--alpha0", type=float, help="sample growth factor")
    parser.add_argument("--rho0",
                        help="truncation threshold factor, or 'suggested'")
    parser.add_argument("--beta", type=float, help="alpha backtrack factor")
    parser.add_argument("--delta", type=float, help="rho backtrack factor")
    parser.add_argument("--m0", type=int, help="warm-start subsample size")
    parser.add_argument("--max-backtracks", type=int, dest="max_backtracks")
    parser.add_argument("--backend", choices=("dense", "randomized"),
                        help="eigendecomposition backend")
    parser.add_argument("--seed", type=int, help="randomized-backend seed")
    parser.add_argument("--deterministic", action="store_true", default=None,
                        help="zero wall_ms so reruns are byte-identical")


def build_parser():
    parser = _Parser(prog="ktan",
                     description="adaptive truncated-Newton logistic solver")
    sub = parser.add_subparsers(dest="command",
                                metavar="{solve,compare,check,oracle}")

    solve = sub.add_parser("solve", help="run the solver, emit a trace CSV")
    _add_data_flags(solve)
    _add_solver_flags(solve)
    solve.add_argument("--out", help="trace CSV path (default: stdout)")
    solve.add_argument("--with-oracle", action="store_true", default=None,
                       dest="with_oracle",
                       help="fill the subopt column via per-level oracles")
    solve.set_defaults(func=cmd_solve)

    compare = sub.add_parser(
        "compare", help="race solvers under a shared work budget"
    )
    _add_data_flags(compare)
    _add_solver_flags(compare)
    compare.add_argument("--solvers",
                         help=f"comma list from {{{','.join(_COMPARE_SOLVERS)}}}")
    compare.add_argument("--budget-grads", type=int, dest="budget_grads",
                         help="per-sample gradient budget (samples_cum axis)")
    compare.add_argument("--budget-ms", type=int, dest="budget_ms",
                         help="keep only trace rows within this wall-clock window")
    compare.add_argument("--sgd-step", type=float, dest="sgd_step")
    compare.add_argument("--saga-step", type=float, dest="saga_step")
    compare.add_argument("--passes", type=float,
                         help="stochastic budget in data passes when no --budget-grads")
    compare.add_argument("--parallel", action="store_true", default=None,
                         help="one worker thread per solver")
    compare.add_argument("--out-dir", dest="out_dir",
                         help="directory for the trace CSVs (default compare_out)")
    compare.set_defaults(func=cmd_compare)

    check = sub.add_parser(
        "check", help="audit each stage against its convergence certificates"
    )
    _add_data_flags(check)
    _add_solver_flags(check)
    check.add_argument("--at-stage", type=int, dest="at_stage",
                       help="report a single stage")
    check.add_argument("--all-stages", action="store_true", default=None,
                       dest="all_stages", help="report every stage (default)")
    check.set_defaults(func=cmd_check)

    oracle = sub.add_parser(
        "oracle", help="solve one subsample level to high precision"
    )
    _add_data_flags(oracle)
    oracle.add_argument("--c", type=float, help="regularization strength")
    oracle.add_argument("--schedule", choices=("inv_n", "inv_sqrt_n"))
    oracle.add_argument("--n", type=int, help="subsample level (default: all)")
    oracle.add_argument("--tol", type=float,
                        help="gradient-norm target (default 1e-12)")
    oracle.add_argument("--out", help="minimizer path (default: stdout)")
    oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    """CLI entry point; returns the exit code instead of raising."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit:
        return USAGE_EXIT
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return USAGE_EXIT
    args._argv = argv
    try:
        return args.func(args)
    except _MissingFlag as exc:
        print(f"usage: see `ktan {args.command} --help`", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
