"""Compiled-vs-pure kernel parity and backend selection."""

import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from ktan import _pykernels as pure
from ktan import kernels


def _compiled_or_skip():
    if kernels.compiled is None:
        pytest.skip("compiled extension not built")
    return kernels.compiled


def test_logistic_stats_matches_pure():
    comp = _compiled_or_skip()
    rng = np.random.default_rng(0)
    for trial in range(30):
        margins = rng.standard_normal(rng.integers(1, 400)) * 10.0 ** rng.integers(-2, 3)
        ls_c, dc_c, w_c = comp.logistic_stats(margins)
        ls_p, dc_p, w_p = pure.logistic_stats(margins)
        assert np.allclose(dc_c, dc_p, rtol=1e-15, atol=0)
        assert np.allclose(w_c, w_p, rtol=1e-15, atol=1e-300)
        assert ls_c == pytest.approx(ls_p, rel=1e-13)


def test_logistic_stats_extreme_margins():
    # +-800 overflows a naive exp; the stable form must stay finite
    comp = _compiled_or_skip()
    margins = np.array([-800.0, -50.0, -1.0, 0.0, 1.0, 50.0, 800.0])
    for impl in (comp, pure):
        loss_sum, dcoef, weights = impl.logistic_stats(margins)
        assert np.isfinite(loss_sum)
        assert np.all(np.isfinite(dcoef)) and np.all(np.isfinite(weights))
        assert np.all(dcoef <= 0.0) and np.all(dcoef >= -1.0)
        assert np.all(weights >= 0.0) and np.all(weights <= 0.25)
    # margin -800 contributes ~ +800 to the loss, margin +800 ~ 0
    assert pure.logistic_stats(margins)[0] > 800.0


def _random_problem(rng, n=64, p=7, sparse=False):
    feats = rng.standard_normal((n, p))
    if sparse:
        feats[rng.random((n, p)) < 0.6] = 0.0
    labels = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    draws = rng.integers(0, n, size=200, dtype=np.int64)
    return feats, labels, draws


@pytest.mark.parametrize("method", ["sgd", "saga"])
def test_dense_kernels_match_pure(method):
    comp = _compiled_or_skip()
    rng = np.random.default_rng(7)
    for trial in range(10):
        feats, labels, draws = _random_problem(rng)
        step, reg = 0.05, 0.3
        x_c = np.zeros(feats.shape[1])
        x_p = np.zeros(feats.shape[1])
        if method == "sgd":
            comp.sgd_dense(feats, labels, x_c, draws, step, reg)
            pure.sgd_dense(feats, labels, x_p, draws, step, reg)
        else:
            t_c = np.zeros(len(labels)); a_c = np.zeros(feats.shape[1])
            t_p = np.zeros(len(labels)); a_p = np.zeros(feats.shape[1])
            comp.saga_dense(feats, labels, x_c, t_c, a_c, draws, step, reg)
            pure.saga_dense(feats, labels, x_p, t_p, a_p, draws, step, reg)
            assert np.allclose(t_c, t_p, rtol=1e-12, atol=1e-15)
            assert np.allclose(a_c, a_p, rtol=1e-9, atol=1e-14)
        assert np.allclose(x_c, x_p, rtol=1e-9, atol=1e-13)


@pytest.mark.parametrize("method", ["sgd", "saga"])
def test_csr_kernels_match_dense(method):
    # the sparse kernels must agree with their dense counterparts on the
    # same draws, since they implement the same recursion
    import scipy.sparse as sp

    comp = _compiled_or_skip()
    rng = np.random.default_rng(21)
    for trial in range(6):
        feats, labels, draws = _random_problem(rng, sparse=True)
        csr = sp.csr_matrix(feats)
        step, reg = 0.04, 0.5
        x_d = np.zeros(feats.shape[1])
        x_s = np.zeros(feats.shape[1])
        if method == "sgd":
            comp.sgd_dense(feats, labels, x_d, draws, step, reg)
            comp.sgd_csr(csr.data, csr.indices, csr.indptr, labels, x_s,
                         draws, step, reg)
        else:
            t_d = np.zeros(len(labels)); a_d = np.zeros(feats.shape[1])
            t_s = np.zeros(len(labels)); a_s = np.zeros(feats.shape[1])
            comp.saga_dense(feats, labels, x_d, t_d, a_d, draws, step, reg)
            comp.saga_csr(csr.data, csr.indices, csr.indptr, labels, x_s,
                          t_s, a_s, draws, step, reg)
            assert np.allclose(t_d, t_s, rtol=1e-12, atol=1e-15)
        assert np.allclose(x_d, x_s, rtol=1e-9, atol=1e-13)


def test_kernels_accept_readonly_inputs():
    comp = _compiled_or_skip()
    rng = np.random.default_rng(3)
    feats, labels, draws = _random_problem(rng, n=16, p=4)
    feats.flags.writeable = False
    labels.flags.writeable = False
    x = np.zeros(4)
    comp.sgd_dense(feats, labels, x, draws, 0.05, 0.1)
    assert np.all(np.isfinite(x))


def test_backend_selection_and_env_override():
    assert kernels.backend_name() in ("pure", "compiled")
    assert kernels.get_backend("pure") is pure
    # the env switch is honored at import time in a fresh interpreter
    code = (
        "from ktan import kernels; "
        "print(kernels.backend_name())"
    )
    env = dict(os.environ, KTAN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.stdout.strip() == "pure"


def test_get_backend_unknown_name():
    from ktan.errors import CapabilityError

    with pytest.raises(CapabilityError):
        kernels.get_backend("gpu")
