"""Comparison solvers: descent, convergence, unbiasedness, oracle contract."""

import numpy as np
import pytest

from ktan import kernels
from ktan.baselines import (
    BaselineConfig,
    adanewton_run,
    gd_run,
    newton_oracle,
    saga_run,
    sgd_run,
)
from ktan.data import SyntheticSpec, synthesize
from ktan.errors import OracleError, SolverError, ValidationError
from ktan.risk import RiskConfig, RiskView
from ktan.solver import SolverConfig, run


@pytest.fixture(scope="module")
def synth():
    ds, _ = synthesize(SyntheticSpec(n_samples=512, dim=10, seed=3))
    return ds


@pytest.fixture(scope="module")
def view(synth):
    return RiskView(synth, synth.count, RiskConfig(c=1.0))


@pytest.fixture(scope="module")
def fstar(view):
    return view.value(newton_oracle(view).x)


def test_gd_descends(view, fstar):
    res = gd_run(view, BaselineConfig(max_iters=200))
    assert view.value(res.x) - fstar < 5e-3
    norms = [r.grad_norm for r in res.trace]
    assert norms[-1] < norms[0]
    # objective decreases monotonically at step 1/L
    vals = [view.value(x) for x in res.iterates]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
    # accounting: one full gradient per iteration on both axes
    assert res.trace[-1].samples_cum == 200 * view.n
    assert res.grad_evals_cum == 200 * view.n
    assert len(res.iterates) == len(res.trace) + 1


def test_gd_stops_at_tol(view):
    res = gd_run(view, BaselineConfig(max_iters=500, tol=1e-2))
    assert res.trace[-1].grad_norm <= 1e-2
    assert len(res.trace) < 500


def test_sgd_and_saga_converge(view, fstar):
    sgd = sgd_run(view, BaselineConfig(passes=20, seed=0))
    saga = saga_run(view, BaselineConfig(passes=20, seed=0))
    sgd_gap = view.value(sgd.x) - fstar
    saga_gap = view.value(saga.x) - fstar
    assert sgd_gap < 0.2          # constant step: stalls at its noise floor
    assert saga_gap < 1e-5        # variance reduction: keeps contracting
    assert saga_gap < sgd_gap
    # accounting: one per-sample gradient per iteration
    assert sgd.trace[-1].samples_cum == 20 * view.n
    assert sgd.grad_evals_cum == 20 * view.n


def test_stochastic_runs_are_seeded(view):
    a = sgd_run(view, BaselineConfig(passes=2, seed=42))
    b = sgd_run(view, BaselineConfig(passes=2, seed=42))
    c = sgd_run(view, BaselineConfig(passes=2, seed=43))
    assert np.array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)


def test_record_every_checkpoints(view):
    res = sgd_run(view, BaselineConfig(max_iters=20, record_every=7, seed=1))
    assert [r.samples_cum for r in res.trace] == [7, 14, 20]
    bare = sgd_run(
        view,
        BaselineConfig(max_iters=20, record_every=7, seed=1, keep_iterates=False),
    )
    assert bare.iterates == []
    assert np.array_equal(bare.x, res.x)


def test_divergence_raises(view):
    with pytest.raises(SolverError):
        sgd_run(view, BaselineConfig(step_size=1e6, passes=1, seed=0))
    with pytest.raises(SolverError):
        saga_run(view, BaselineConfig(step_size=1e6, passes=1, seed=0))


def test_saga_update_is_unbiased(synth):
    # freeze an arbitrary mid-run state, then enumerate every possible draw:
    # the average one-step direction must equal the full regularized gradient
    view = RiskView(synth, 64, RiskConfig(c=1.0))
    feats = np.ascontiguousarray(synth.rows(64))
    labels = np.ascontiguousarray(synth.labels[:64])
    step, reg = 0.01, view.regularizer
    x = np.zeros(view.dim)
    table = np.zeros(64)
    avg = np.zeros(view.dim)
    warm = np.random.default_rng(7).integers(0, 64, size=200, dtype=np.int64)
    kernels.saga_dense(feats, labels, x, table, avg, warm, step, reg)
    # invariant the kernel maintains: avg tracks the stored-gradient mean
    assert np.allclose(avg, (table[:, None] * feats).mean(axis=0), atol=1e-12)
    directions = np.zeros(view.dim)
    for i in range(64):
        xi = x.copy()
        kernels.saga_dense(
            feats, labels, xi, table.copy(), avg.copy(),
            np.array([i], dtype=np.int64), step, reg,
        )
        directions += (x - xi) / step
    assert np.allclose(directions / 64, view.grad(x), atol=1e-12)


def test_newton_oracle_contract(view):
    star = newton_oracle(view)
    assert star.grad_norm <= 1e-12
    # idempotence: restarting at the solution returns it unchanged
    again = newton_oracle(view, x0=star.x)
    assert again.iters == 0
    assert np.array_equal(again.x, star.x)
    with pytest.raises(ValidationError):
        newton_oracle(view, tol=0.0)
    with pytest.raises(OracleError):
        newton_oracle(view, max_iters=0)


def test_adanewton_is_rho_zero_dense_run(synth):
    rc = RiskConfig(c=1.0)
    # whatever rho/backend is requested, the baseline forces the exact mode
    requested = SolverConfig(m0=64, rho0=0.7, eig_backend="randomized", seed=5)
    base = adanewton_run(synth, rc, requested)
    exact = run(synth, rc, SolverConfig(m0=64, rho0=0.0, seed=5))
    assert base.converged and exact.converged
    assert len(base.trace) == len(exact.trace)
    for rb, re_ in zip(base.trace, exact.trace):
        assert rb.grad_norm == re_.grad_norm
        assert rb.epsilon == 0.0
    for xb, xe in zip(base.iterates, exact.iterates):
        assert np.array_equal(xb, xe)


def test_baseline_config_validation():
    with pytest.raises(ValidationError):
        BaselineConfig(step_size=0.0)
    with pytest.raises(ValidationError):
        BaselineConfig(passes=-1)
    with pytest.raises(ValidationError):
        BaselineConfig(max_iters=-1)
    with pytest.raises(ValidationError):
        BaselineConfig(tol=0.0)
    with pytest.raises(ValidationError):
        BaselineConfig(record_every=0)
