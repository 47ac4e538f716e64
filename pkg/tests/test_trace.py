"""Trace CSV schema and exact round-tripping."""

import io

import numpy as np
import pytest

from ktan.errors import ParseError
from ktan.trace import TRACE_COLUMNS, TraceRecord, read_trace, write_trace


def _random_records(rng, count):
    out = []
    samples = 0
    evals = 0
    for i in range(count):
        n = int(rng.integers(1, 1000))
        samples += n
        evals += n + int(rng.integers(0, n))
        out.append(
            TraceRecord(
                stage=i + 1,
                attempt=int(rng.integers(1, 4)),
                n=n,
                samples_cum=samples,
                grad_evals_cum=evals,
                wall_ms=int(rng.integers(0, 10_000)),
                grad_norm=float(np.exp(rng.uniform(-40, 3))),
                k=None if rng.random() < 0.2 else int(rng.integers(0, 50)),
                epsilon=None if rng.random() < 0.2 else float(rng.uniform(0, 1)),
                alpha_used=float(rng.uniform(1, 4)),
                rho_used=float(rng.uniform(0, 0.2)),
                subopt=None if rng.random() < 0.5 else float(np.exp(rng.uniform(-50, 0))),
            )
        )
    return out


def test_round_trip_exact():
    rng = np.random.default_rng(0)
    records = _random_records(rng, 200)
    buf = io.StringIO()
    write_trace(records, buf)
    back = read_trace(buf.getvalue())
    assert back == records  # dataclass equality: every field, exact floats


def test_round_trip_via_path(tmp_path):
    records = _random_records(np.random.default_rng(1), 10)
    path = tmp_path / "trace.csv"
    write_trace(records, path)
    assert read_trace(path) == records
    first_line = path.read_text().splitlines()[0]
    assert first_line == ",".join(TRACE_COLUMNS)


def test_seventeen_digit_floats():
    rec = TraceRecord(
        stage=1, attempt=1, n=1, samples_cum=1, grad_evals_cum=1, wall_ms=0,
        grad_norm=np.pi * 1e-13,
    )
    row = rec.to_row()
    assert float(row[6]) == rec.grad_norm  # shortest-exact serialization
    assert row[7] == ""  # absent optionals stay empty cells


def test_read_trace_errors():
    with pytest.raises(ParseError):
        read_trace("")  # no header
    with pytest.raises(ParseError) as info:
        read_trace("a,b\n")
    assert "unexpected header" in str(info.value)
    header = ",".join(TRACE_COLUMNS)
    with pytest.raises(ParseError) as info:
        read_trace(header + "\n1,1,5\n")
    assert "line 2" in str(info.value)
    with pytest.raises(ParseError) as info:
        read_trace(header + "\n1,1,5,5,5,0,oops,,,,,\n")
    assert "bad grad_norm" in str(info.value)
    # blank trailing line is tolerated
    good = header + "\n1,1,5,5,5,0,0.25,,,,,\n\n"
    assert len(read_trace(good)) == 1


def test_write_is_deterministic_text():
    records = _random_records(np.random.default_rng(2), 25)
    a, b = io.StringIO(), io.StringIO()
    write_trace(records, a)
    write_trace(records, b)
    assert a.getvalue() == b.getvalue()
    assert a.getvalue().endswith("\n")
