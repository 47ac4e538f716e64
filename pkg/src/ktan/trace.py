"""Convergence trace records and their CSV serialization.

One record per solver attempt (or per checkpoint for the stochastic
baselines). Floats serialize with 17 significant digits so traces round-trip
exactly; wall_ms is the only column excluded from determinism guarantees.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ParseError

__all__ = ["TraceRecord", "TRACE_COLUMNS", "write_trace", "read_trace"]

TRACE_COLUMNS = (
    "stage",
    "attempt",
    "n",
    "samples_cum",
    "grad_evals_cum",
    "wall_ms",
    "grad_norm",
    "k",
    "epsilon",
    "alpha_used",
    "rho_used",
    "subopt",
)


@dataclass
class TraceRecord:
    """One attempt's worth of progress bookkeeping."""

    stage: int
    attempt: int
    n: int
    samples_cum: int
    grad_evals_cum: int
    wall_ms: int
    grad_norm: float
    k: int | None = None
    epsilon: float | None = None
    alpha_used: float | None = None
    rho_used: float | None = None
    subopt: float | None = None

    def to_row(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(f"{v:.17g}")
            else:
                out.append(str(int(v)))
        return out


def _parse_cell(name, text, line_no):
    if text == "":
        return None
    try:
        if name in ("stage", "attempt", "n", "samples_cum", "grad_evals_cum",
                    "wall_ms", "k"):
            return int(text)
        return float(text)
    except ValueError:
        raise ParseError(f"bad {name} value {text!r}", line_number=line_no)


def write_trace(records, dest):
    """Write records as CSV to a path or text file object."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_trace(records, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in records:
        writer.writerow(rec.to_row())


def read_trace(source):
    """Read a trace CSV from a path, text file object, or string content."""
    # newline-free non-empty strings are paths; anything else is content
    if isinstance(source, Path) or (
        isinstance(source, str) and source and "\n" not in source
    ):
        with open(source, "r", newline="") as fh:
            return read_trace(fh)
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty trace file", line_number=1)
    if tuple(header) != TRACE_COLUMNS:
        raise ParseError(f"unexpected header {header!r}", line_number=1)
    records = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(TRACE_COLUMNS):
            raise ParseError(
                f"expected {len(TRACE_COLUMNS)} cells, got {len(row)}",
                line_number=line_no,
            )
        vals = {
            name: _parse_cell(name, cell, line_no)
            for name, cell in zip(TRACE_COLUMNS, row)
        }
        records.append(TraceRecord(**vals))
    return records
