"""Dataset ingestion, synthesis, normalization and ordering.

The text format is the usual svmlight/libsvm interchange: one sample per
line, `<label> <index>:<value> ...` with 1-based strictly increasing indices.
The synthetic generator draws Gaussian features whose population second
moment has a prescribed eigenvalue decay, so the curvature truncation has
structure to exploit; labels come from a logistic model at a planted
coefficient vector.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import ParseError, ValidationError
from .risk import Dataset

__all__ = [
    "SpectrumDecay",
    "SyntheticSpec",
    "synthesize",
    "parse_libsvm",
    "write_libsvm",
    "permute_order",
    "normalize_rows",
    "parse_dataset_arg",
]


@dataclass(frozen=True)
class SpectrumDecay:
    """Eigenvalue profile of the synthetic feature covariance.

    geometric(rate): eigenvalue j is rate**j (rate in (0, 1]);
    power(exponent): eigenvalue j is (j + 1)**-exponent.
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in ("geometric", "power"):
            raise ValidationError(f"unknown decay kind {self.kind!r}")
        if self.kind == "geometric" and not 0.0 < self.param <= 1.0:
            raise ValidationError("geometric rate must lie in (0, 1]")
        if self.kind == "power" and self.param < 0.0:
            raise ValidationError("power exponent must be >= 0")

    @classmethod
    def geometric(cls, rate):
        return cls("geometric", float(rate))

    @classmethod
    def power(cls, exponent):
        return cls("power", float(exponent))

    def values(self, dim):
        j = np.arange(dim, dtype=np.float64)
        if self.kind == "geometric":
            return self.param**j
        return (j + 1.0) ** -self.param


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic logistic-classification dataset."""

    n_samples: int
    dim: int
    decay: SpectrumDecay = SpectrumDecay.geometric(0.5)
    label_noise: float = 0.0
    seed: int = 0
    ground_truth_scale: float = 1.0

    def __post_init__(self):
        if self.n_samples < 1 or self.dim < 1:
            raise ValidationError("n_samples and dim must be >= 1")
        if not 0.0 <= self.label_noise < 0.5:
            raise ValidationError("label_noise must lie in [0, 0.5)")
        if not (np.isfinite(self.ground_truth_scale) and self.ground_truth_scale >= 0):
            raise ValidationError("ground_truth_scale must be >= 0")


def synthesize(spec):
    """Generate (Dataset, ground_truth) from a SyntheticSpec.

    Features are rows of G diag(sqrt(lam)) Q^T with G standard Gaussian and Q
    a seeded random rotation, so the population second moment is Q diag(lam)
    Q^T with the requested spectrum. The planted coefficient vector points
    along the sqrt(lam)-weighted directions (signal lives where the data has
    variance) with norm ground_truth_scale; labels are logistic draws at that
    vector, then flipped with probability label_noise. Deterministic per seed.
    """
    rng = np.random.default_rng(spec.seed)
    lam = spec.decay.values(spec.dim)
    root = np.sqrt(lam)
    raw = rng.standard_normal((spec.dim, spec.dim))
    q, r = np.linalg.qr(raw)
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)  # fix QR sign convention
    direction = root * rng.standard_normal(spec.dim)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        direction = root.copy()
        norm = np.linalg.norm(direction)
    theta = spec.ground_truth_scale * (q @ direction) / norm
    gauss = rng.standard_normal((spec.n_samples, spec.dim))
    feats = (gauss * root) @ q.T
    margins = feats @ theta
    labels = np.where(rng.random(spec.n_samples) < expit(margins), 1.0, -1.0)
    if spec.label_noise > 0.0:
        flips = rng.random(spec.n_samples) < spec.label_noise
        labels = np.where(flips, -labels, labels)
    return Dataset(feats, labels, order_seed=spec.seed), theta


def _parse_label(token, line_no):
    try:
        val = float(token)
    except ValueError:
        raise ParseError(f"bad label {token!r}", line_number=line_no)
    if val in (1.0,):
        return 1.0
    if val in (-1.0, 0.0):
        return -1.0
    raise ParseError(
        f"label {token!r} not in {{-1, 0, +1}}", line_number=line_no
    )


def parse_libsvm(source, dim=None):
    """Parse svmlight/libsvm text into a Dataset (sparse storage).

    source is a path, an open text file, or an iterable of lines. Labels map
    {+1, 1} -> +1 and {-1, 0} -> -1. Indices are 1-based and must be strictly
    increasing within a line. Blank lines and lines starting with '#' are
    skipped. dim, when given, must cover the largest index seen (declaring
    trailing unseen features is legal).
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return parse_libsvm(fh, dim=dim)
    labels = []
    indptr = [0]
    indices = []
    values = []
    max_index = 0
    for line_no, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        labels.append(_parse_label(tokens[0], line_no))
        prev = 0
        for token in tokens[1:]:
            idx_text, sep, val_text = token.partition(":")
            if not sep:
                raise ParseError(
                    f"expected index:value, got {token!r}", line_number=line_no
                )
            try:
                idx = int(idx_text)
            except ValueError:
                raise ParseError(
                    f"bad feature index {idx_text!r}", line_number=line_no
                )
            if idx < 1:
                raise ParseError(
                    f"feature index {idx} must be >= 1", line_number=line_no
                )
            if idx <= prev:
                raise ParseError(
                    f"feature index {idx} not increasing (after {prev})",
                    line_number=line_no,
                )
            try:
                val = float(val_text)
            except ValueError:
                raise ParseError(
                    f"bad feature value {val_text!r}", line_number=line_no
                )
            if not math.isfinite(val):
                raise ParseError(
                    f"non-finite feature value {val_text!r}", line_number=line_no
                )
            indices.append(idx - 1)
            values.append(val)
            prev = idx
        indptr.append(len(indices))
        max_index = max(max_index, prev)
    if not labels:
        raise ParseError("no samples found", line_number=1)
    if dim is None:
        dim = max_index
    elif dim < max_index:
        raise ValidationError(
            f"declared dim {dim} below largest index {max_index}"
        )
    if dim < 1:
        raise ParseError("no feature indices seen and no dim given",
                         line_number=1)
    mat = sp.csr_matrix(
        (
            np.asarray(values, dtype=np.float64),
            np.asarray(indices, dtype=np.int32),
            np.asarray(indptr, dtype=np.int32),
        ),
        shape=(len(labels), dim),
    )
    return Dataset(mat, np.asarray(labels), order_seed=0)


def write_libsvm(dataset, dest):
    """Write a Dataset in svmlight/libsvm text form.

    Values serialize with repr (shortest round-tripping form), so
    parse_libsvm(write_libsvm(ds)) reproduces every stored value exactly.
    """
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            write_libsvm(dataset, fh)
            return
    feats = dataset.features
    for i in range(dataset.count):
        label = "+1" if dataset.labels[i] > 0 else "-1"
        if dataset.is_sparse:
            lo, hi = feats.indptr[i], feats.indptr[i + 1]
            cols = feats.indices[lo:hi]
            vals = feats.data[lo:hi]
        else:
            cols = np.nonzero(feats[i])[0]
            vals = feats[i, cols]
        cells = [label]
        # plain-float repr: numpy scalar repr is not parseable text
        cells.extend(f"{c + 1}:{float(v)!r}" for c, v in zip(cols, vals))
        dest.write(" ".join(cells) + "\n")


def permute_order(dataset, seed):
    """Apply one global seeded shuffle fixing the nested-subsample order.

    seed = 0 keeps the source order (identity convention). The permutation is
    what makes every prefix an exchangeable subsample of the data.
    """
    if seed == 0:
        return Dataset(dataset.features, dataset.labels, order_seed=0)
    perm = np.random.default_rng(seed).permutation(dataset.count)
    return Dataset(
        dataset.features[perm], dataset.labels[perm], order_seed=seed
    )


def normalize_rows(dataset):
    """Scale every sample to unit Euclidean norm (curvature bound M = 1/4).

    Zero-feature samples cannot be normalized; they are dropped with a
    warning. All-zero datasets are rejected.
    """
    norms = np.sqrt(dataset.row_norms_sq())
    keep = norms > 0.0
    dropped = int((~keep).sum())
    if dropped == dataset.count:
        raise ValidationError("every sample has zero features")
    if dropped:
        warnings.warn(f"dropped {dropped} zero-feature samples")
    feats = dataset.features[keep]
    scale = 1.0 / norms[keep]
    if dataset.is_sparse:
        feats = sp.diags(scale).dot(feats).tocsr()
    else:
        feats = feats * scale[:, None]
    return Dataset(feats, dataset.labels[keep], order_seed=dataset.order_seed)


def _parse_synth_string(text):
    spec_kwargs = {}
    body = text[len("synth:"):]
    if not body:
        raise ValidationError("empty synthetic spec")
    for item in body.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"expected key=value in synth spec: {item!r}")
        key = key.strip()
        value = value.strip()
        try:
            if key == "n":
                spec_kwargs["n_samples"] = int(value)
            elif key == "p":
                spec_kwargs["dim"] = int(value)
            elif key == "decay":
                kind, sep2, param = value.partition(":")
                if not sep2:
                    raise ValidationError(
                        f"decay needs kind:param, got {value!r}"
                    )
                if kind in ("geo", "geometric"):
                    spec_kwargs["decay"] = SpectrumDecay.geometric(float(param))
                elif kind in ("pow", "power"):
                    spec_kwargs["decay"] = SpectrumDecay.power(float(param))
                else:
                    raise ValidationError(f"unknown decay kind {kind!r}")
            elif key == "noise":
                spec_kwargs["label_noise"] = float(value)
            elif key == "seed":
                spec_kwargs["seed"] = int(value)
            elif key == "scale":
                spec_kwargs["ground_truth_scale"] = float(value)
            else:
                raise ValidationError(f"unknown synth key {key!r}")
        except ValueError:
            raise ValidationError(f"bad value for synth key {key!r}: {value!r}")
    if "n_samples" not in spec_kwargs or "dim" not in spec_kwargs:
        raise ValidationError("synth spec needs at least n= and p=")
    return SyntheticSpec(**spec_kwargs)


def parse_dataset_arg(text, dim=None):
    """Resolve a CLI data argument.

    `synth:n=...,p=...[,decay=geo:0.5][,noise=0.05][,seed=7][,scale=3]`
    generates a dataset (returning its planted coefficients); anything else
    is a libsvm path. Returns (dataset, ground_truth_or_None).
    """
    if text.startswith("synth:"):
        dataset, truth = synthesize(_parse_synth_string(text))
        return dataset, truth
    path = Path(text)
    if not path.exists():
        raise ValidationError(f"dataset file not found: {text}")
    return parse_libsvm(path, dim=dim), None
