"""Synthetic generation, libsvm parsing, and dataset transforms."""

import io

import numpy as np
import pytest

from ktan.data import (
    SpectrumDecay,
    SyntheticSpec,
    normalize_rows,
    parse_dataset_arg,
    parse_libsvm,
    permute_order,
    synthesize,
    write_libsvm,
)
from ktan.errors import ParseError, ValidationError
from ktan.risk import Dataset


# ------------------------------------------------------------------ synthetic


def test_decay_values():
    geo = SpectrumDecay.geometric(0.5)
    assert np.allclose(geo.values(4), [1.0, 0.5, 0.25, 0.125])
    pw = SpectrumDecay.power(2.0)
    assert np.allclose(pw.values(3), [1.0, 0.25, 1.0 / 9.0])
    with pytest.raises(ValidationError):
        SpectrumDecay.geometric(0.0)
    with pytest.raises(ValidationError):
        SpectrumDecay.geometric(1.5)
    with pytest.raises(ValidationError):
        SpectrumDecay.power(-1.0)
    with pytest.raises(ValidationError):
        SpectrumDecay("cauchy", 1.0)


def test_synthesize_deterministic():
    spec = SyntheticSpec(n_samples=100, dim=8, seed=11)
    ds_a, th_a = synthesize(spec)
    ds_b, th_b = synthesize(spec)
    assert np.array_equal(ds_a.features, ds_b.features)
    assert np.array_equal(ds_a.labels, ds_b.labels)
    assert np.array_equal(th_a, th_b)
    ds_c, _ = synthesize(SyntheticSpec(n_samples=100, dim=8, seed=12))
    assert not np.array_equal(ds_a.features, ds_c.features)


def test_synthesize_truth_norm_is_scale():
    for scale in (0.5, 1.0, 3.0):
        _, theta = synthesize(
            SyntheticSpec(n_samples=50, dim=6, seed=2, ground_truth_scale=scale)
        )
        assert np.linalg.norm(theta) == pytest.approx(scale, rel=1e-12)


def test_synthesize_label_noise():
    base = SyntheticSpec(n_samples=400, dim=5, seed=9)
    noisy = SyntheticSpec(n_samples=400, dim=5, seed=9, label_noise=0.3)
    ds0, _ = synthesize(base)
    ds1, _ = synthesize(noisy)
    assert np.array_equal(ds0.features, ds1.features)  # noise touches labels only
    flips = int((ds0.labels != ds1.labels).sum())
    assert 0 < flips < 400
    assert flips == pytest.approx(400 * 0.3, abs=60)


def test_synthetic_spec_validation():
    with pytest.raises(ValidationError):
        SyntheticSpec(n_samples=0, dim=3)
    with pytest.raises(ValidationError):
        SyntheticSpec(n_samples=10, dim=0)
    with pytest.raises(ValidationError):
        SyntheticSpec(n_samples=10, dim=3, label_noise=0.5)
    with pytest.raises(ValidationError):
        SyntheticSpec(n_samples=10, dim=3, label_noise=-0.1)
    with pytest.raises(ValidationError):
        SyntheticSpec(n_samples=10, dim=3, ground_truth_scale=-1.0)


# --------------------------------------------------------------------- libsvm


def test_parse_libsvm_basic():
    text = """\
# comment line

+1 1:0.5 3:-2.0
-1 2:1.25
0 1:3.0
1 4:0.125
"""
    ds = parse_libsvm(io.StringIO(text))
    assert ds.is_sparse
    assert ds.count == 4
    assert ds.dim == 4
    assert np.array_equal(ds.labels, [1.0, -1.0, -1.0, 1.0])
    dense = ds.features.toarray()
    assert dense[0, 0] == 0.5 and dense[0, 2] == -2.0
    assert dense[1, 1] == 1.25
    assert dense[3, 3] == 0.125


def test_parse_libsvm_accepts_path(tmp_path):
    path = tmp_path / "toy.svm"
    path.write_text("+1 1:1.0\n-1 2:2.0\n")
    ds = parse_libsvm(path)
    assert ds.count == 2


def test_parse_libsvm_line_numbered_errors():
    cases = [
        ("+1 1:0.5\n+1 2:1.0 2:2.0\n", "line 2", "not increasing"),
        ("+1 0:0.5\n", "line 1", "must be >= 1"),
        ("+1 1:0.5\n-1 1:abc\n", "line 2", "bad feature value"),
        ("+1 1:inf\n", "line 1", "non-finite"),
        ("+2 1:0.5\n", "line 1", "not in"),
        ("+1 1:0.5\nx 1:1.0\n", "line 2", "bad label"),
        ("+1 1\n", "line 1", "expected index:value"),
        ("+1 a:1.0\n", "line 1", "bad feature index"),
    ]
    for text, where, what in cases:
        with pytest.raises(ParseError) as info:
            parse_libsvm(io.StringIO(text))
        assert where in str(info.value)
        assert what in str(info.value)
    with pytest.raises(ParseError):
        parse_libsvm(io.StringIO("# only comments\n"))


def test_parse_libsvm_dim_override():
    ds = parse_libsvm(io.StringIO("+1 1:1.0\n"), dim=5)
    assert ds.dim == 5
    with pytest.raises(ValidationError):
        parse_libsvm(io.StringIO("+1 3:1.0\n"), dim=2)


def test_libsvm_round_trip_exact():
    rng = np.random.default_rng(17)
    feats = rng.standard_normal((20, 6))
    feats[rng.random((20, 6)) < 0.4] = 0.0
    feats[0] = 0.0
    feats[0, 2] = np.pi  # full-precision value must survive the text form
    labels = np.where(rng.random(20) < 0.5, -1.0, 1.0)
    ds = Dataset(feats, labels)
    buf = io.StringIO()
    write_libsvm(ds, buf)
    back = parse_libsvm(io.StringIO(buf.getvalue()), dim=6)
    assert np.array_equal(back.features.toarray(), feats)
    assert np.array_equal(back.labels, labels)


def test_libsvm_round_trip_sparse_storage(tmp_path):
    ds, _ = synthesize(SyntheticSpec(n_samples=30, dim=4, seed=5))
    path = tmp_path / "round.svm"
    write_libsvm(ds, path)
    back = parse_libsvm(path)
    assert np.allclose(back.features.toarray(), ds.features)
    assert np.array_equal(back.labels, ds.labels)


# ----------------------------------------------------------------- transforms


def test_permute_order_identity_and_shuffle():
    ds, _ = synthesize(SyntheticSpec(n_samples=40, dim=3, seed=1))
    same = permute_order(ds, 0)
    assert np.array_equal(same.features, ds.features)
    assert same.order_seed == 0
    mixed = permute_order(ds, 9)
    assert mixed.order_seed == 9
    assert not np.array_equal(mixed.features, ds.features)
    # content preserved as a multiset of rows
    key = lambda f: np.lexsort(f.T)
    assert np.array_equal(mixed.features[key(mixed.features)],
                          ds.features[key(ds.features)])
    again = permute_order(ds, 9)
    assert np.array_equal(mixed.features, again.features)


def test_normalize_rows_dense_and_sparse():
    import scipy.sparse as sp

    feats = np.array([[3.0, 4.0], [0.0, 0.0], [0.0, 2.0]])
    labels = np.array([1.0, -1.0, 1.0])
    with pytest.warns(UserWarning, match="dropped 1"):
        out = normalize_rows(Dataset(feats, labels))
    assert out.count == 2
    assert np.allclose(np.sqrt(out.row_norms_sq()), 1.0)
    assert np.array_equal(out.labels, [1.0, 1.0])
    with pytest.warns(UserWarning, match="dropped 1"):
        sout = normalize_rows(Dataset(sp.csr_matrix(feats), labels))
    assert np.allclose(sout.features.toarray(), out.features)
    with pytest.raises(ValidationError):
        normalize_rows(Dataset(np.zeros((2, 2)), [1.0, -1.0]))


# ------------------------------------------------------------ CLI data string


def test_parse_dataset_arg_synth():
    ds, theta = parse_dataset_arg(
        "synth:n=50,p=4,decay=geo:0.6,noise=0.1,seed=3,scale=2.0"
    )
    assert ds.count == 50 and ds.dim == 4
    assert np.linalg.norm(theta) == pytest.approx(2.0, rel=1e-12)
    direct, direct_theta = synthesize(
        SyntheticSpec(
            n_samples=50, dim=4, decay=SpectrumDecay.geometric(0.6),
            label_noise=0.1, seed=3, ground_truth_scale=2.0,
        )
    )
    assert np.array_equal(ds.features, direct.features)
    assert np.array_equal(theta, direct_theta)
    ds2, _ = parse_dataset_arg("synth:n=20,p=3,decay=pow:1.5")
    assert ds2.dim == 3


def test_parse_dataset_arg_errors(tmp_path):
    for bad in (
        "synth:",
        "synth:n=10",                 # missing p
        "synth:n=10,p=3,decay=geo",   # no param
        "synth:n=10,p=3,decay=exp:2", # unknown kind
        "synth:n=10,p=3,q=4",         # unknown key
        "synth:n=ten,p=3",            # bad int
        "synth:n 10,p=3",             # not key=value
    ):
        with pytest.raises(ValidationError):
            parse_dataset_arg(bad)
    with pytest.raises(ValidationError):
        parse_dataset_arg(str(tmp_path / "missing.svm"))
    path = tmp_path / "ok.svm"
    path.write_text("+1 1:1.0\n-1 1:-1.0\n")
    ds, theta = parse_dataset_arg(str(path))
    assert theta is None
    assert ds.count == 2
