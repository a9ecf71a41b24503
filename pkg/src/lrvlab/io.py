"""CSV input and output for series and tables.

Files follow RFC 4180 with one column per coordinate.  A first line with
any non-numeric cell is taken as a header.  Missing values are rejected.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .exceptions import DataError

__all__ = ["read_series", "parse_series", "format_series", "write_series"]

_MISSING = {"", "na", "nan", "n/a", "null", "none", "."}


def _number(cell: str):
    try:
        return float(cell)
    except ValueError:
        return None


def parse_series(text: str):
    """Parse CSV text into ``(data, header)``; ``header`` is ``None`` when absent.

    Blank lines are skipped.  Errors report the 1-based line and column.
    """
    reader = csv.reader(io.StringIO(text))
    rows = [(reader.line_num, r) for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("no data rows")
    header = None
    first = [c.strip() for c in rows[0][1]]
    if any(c.lower() not in _MISSING and _number(c) is None for c in first):
        header = first
        rows = rows[1:]
    if not rows:
        raise DataError("header without data rows")
    width = len(header) if header is not None else len(rows[0][1])
    data = np.empty((len(rows), width))
    for r, (line, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(f"expected {width} fields, found {len(row)}", row=line)
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell.lower() in _MISSING:
                raise DataError("missing value", row=line, column=c + 1)
            value = _number(cell)
            if value is None or not math.isfinite(value):
                raise DataError(f"non-numeric or non-finite value {cell!r}", row=line, column=c + 1)
            data[r, c] = value
    return data, header


def read_series(path):
    """Read a CSV file (``-`` is not special here); see :func:`parse_series`."""
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_series(text)


def format_series(data, header=None) -> str:
    """CSV text with ``repr`` floats, so re-reading reproduces the values bit for bit."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in arr:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_series(path, data, header=None):
    Path(path).write_text(format_series(data, header), encoding="utf-8")
