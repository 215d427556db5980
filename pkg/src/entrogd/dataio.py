"""CSV ingestion and emission.

Columns are auto-detected: integer when every cell parses as a plain
integer literal, float when every cell parses as a float, otherwise the
offending cell is reported by row and column. Values round-trip exactly
through the text forms written here.
"""

from __future__ import annotations

import csv
from typing import Sequence

import numpy as np

from .bitmatrix import KIND_FLOAT, KIND_FLOAT_RAW, KIND_INT


class IngestError(ValueError):
    """A CSV cell could not be parsed as numeric data."""


def load_csv(
    path,
    kinds: Sequence[str | None] | None = None,
    precision: int = 64,
) -> tuple[list[np.ndarray], list[str], list[str]]:
    """Read a headered CSV into numeric columns.

    Returns (columns, names, kinds). `kinds` entries may force "int",
    "float", or "float_raw" per column; None auto-detects. `precision`
    32 parses into 32-bit dtypes (for data that originated as 32-bit).
    """
    if precision not in (32, 64):
        raise ValueError("precision must be 32 or 64")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            names = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if not rows:
        raise IngestError(f"{path}: no data rows")
    d = len(names)
    for i, row in enumerate(rows):
        if len(row) != d:
            raise IngestError(f"{path}: row {i + 1} has {len(row)} cells, expected {d}")
    if kinds is None:
        kinds = [None] * d
    if len(kinds) != d:
        raise IngestError(f"{path}: {d} columns but {len(kinds)} kind overrides")

    int_dtype = np.int32 if precision == 32 else np.int64
    float_dtype = np.float32 if precision == 32 else np.float64
    columns: list[np.ndarray] = []
    out_kinds: list[str] = []
    for j in range(d):
        cells = [row[j].strip() for row in rows]
        kind = kinds[j]
        if kind is None:
            kind = KIND_INT
            for cell in cells:
                try:
                    int(cell)
                except ValueError:
                    kind = KIND_FLOAT
                    break
        if kind == KIND_INT:
            values = np.empty(len(cells), dtype=int_dtype)
            info = np.iinfo(int_dtype)
            for i, cell in enumerate(cells):
                try:
                    v = int(cell)
                except ValueError:
                    raise IngestError(
                        f"{path}: non-integer cell {cell!r} at row {i + 1}, column {names[j]!r}"
                    ) from None
                if not info.min <= v <= info.max:
                    raise IngestError(
                        f"{path}: integer {cell!r} at row {i + 1}, column {names[j]!r} "
                        f"exceeds {precision}-bit range"
                    )
                values[i] = v
        elif kind in (KIND_FLOAT, KIND_FLOAT_RAW):
            values = np.empty(len(cells), dtype=float_dtype)
            for i, cell in enumerate(cells):
                try:
                    values[i] = float_dtype(cell)
                except ValueError:
                    raise IngestError(
                        f"{path}: non-numeric cell {cell!r} at row {i + 1}, column {names[j]!r}"
                    ) from None
        else:
            raise IngestError(f"{path}: unknown kind override {kind!r} for column {names[j]!r}")
        columns.append(values)
        out_kinds.append(kind)
    return columns, names, out_kinds


def _format_value(value) -> str:
    if isinstance(value, (np.floating, float)):
        return np.format_float_positional(value, unique=True, trim="0")
    return str(int(value))


def write_csv(path, columns: Sequence[np.ndarray], names: Sequence[str]) -> None:
    """Write columns under a header; floats use shortest exact text."""
    if len(columns) != len(names):
        raise ValueError("one name per column required")
    n = len(columns[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names))
        for i in range(n):
            writer.writerow([_format_value(col[i]) for col in columns])


def tables_equal(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> tuple[bool, tuple[int, int] | None]:
    """Element-wise bit-exact comparison; returns (equal, first mismatch)."""
    if len(a) != len(b):
        return False, None
    for j, (ca, cb) in enumerate(zip(a, b)):
        if len(ca) != len(cb):
            return False, (0, j)
        if np.issubdtype(ca.dtype, np.floating) or np.issubdtype(cb.dtype, np.floating):
            fa = np.asarray(ca, dtype=np.float64)
            fb = np.asarray(cb, dtype=np.float64)
            same = fa.view(np.uint64) == fb.view(np.uint64)
        else:
            same = np.asarray(ca) == np.asarray(cb)
        if not same.all():
            return False, (int(np.flatnonzero(~same)[0]), j)
    return True, None
