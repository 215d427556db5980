"""Fixed-width binary chunk rendering of numeric tables.

A table of n rows and d numeric columns becomes n chunks of l_c bits:
columns concatenated in input order, most significant bit first within
each column. Integer columns are shifted by their minimum so every stored
code is unsigned. Float columns are scaled by the smallest power of ten
(up to 10^9) that makes every value integral; columns that cannot be
scaled that way fall back to reinterpreting their IEEE-754 bits as
unsigned integers, which stays lossless at the cost of compressibility.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

KIND_INT = "int"
KIND_FLOAT = "float"
KIND_FLOAT_RAW = "float_raw"
KINDS = (KIND_INT, KIND_FLOAT, KIND_FLOAT_RAW)

MAX_DECIMAL_SCALE = 9
SCALE_TOLERANCE = 1e-12

_U64 = np.uint64
_MASK64 = (1 << 64) - 1


class QuantizeError(ValueError):
    """Input cannot be rendered as fixed-width chunks."""


class IntegrityError(ValueError):
    """Stored data contradicts its declared parameters."""

    def __init__(self, message: str, section: str | None = None):
        super().__init__(message if section is None else f"{section}: {message}")
        self.section = section


@dataclass(frozen=True)
class ColumnParams:
    """Reversal metadata for one column of the chunk view.

    kind: "int" (offset-shifted integers), "float" (fixed-point,
    value * 10^decimal_scale - offset), or "float_raw" (IEEE-754 bits
    minus offset). offset is the column minimum in the encoded domain.
    """

    kind: str
    decimal_scale: int
    offset: int
    bit_width: int
    original_precision: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown column kind {self.kind!r}")
        if not 0 <= self.decimal_scale <= MAX_DECIMAL_SCALE:
            raise ValueError(f"decimal_scale {self.decimal_scale} out of range")
        if not 1 <= self.bit_width <= 64:
            raise ValueError(f"bit_width {self.bit_width} out of range")
        if self.original_precision not in (32, 64):
            raise ValueError(f"original_precision must be 32 or 64, got {self.original_precision}")

    @property
    def quantum(self) -> float:
        """Original-domain value of one least-significant quantized unit."""
        if self.kind == KIND_INT:
            return 1.0
        if self.kind == KIND_FLOAT:
            return 10.0 ** -self.decimal_scale
        return float("nan")  # raw bit patterns carry no metric unit


class QuantizedMatrix:
    """n rows of d columns as unsigned codes, plus per-column metadata.

    The chunk view is derived: bit position p (0-based, in [0, chunk_width))
    belongs to exactly one column and maps to one bit of its code.
    """

    def __init__(self, codes: np.ndarray, params: Sequence[ColumnParams]):
        # Column-major so per-column bit extraction touches contiguous memory.
        codes = np.asfortranarray(codes, dtype=np.uint64)
        if codes.ndim != 2:
            raise ValueError("codes must be 2-D (rows x columns)")
        n, d = codes.shape
        if n < 1 or d < 1:
            raise ValueError("need at least one row and one column")
        params = tuple(params)
        if len(params) != d:
            raise ValueError(f"{d} columns but {len(params)} ColumnParams")
        for j, p in enumerate(params):
            if p.bit_width < 64 and int(codes[:, j].max()) >> p.bit_width:
                raise IntegrityError(
                    f"column {j} holds a value wider than bit_width {p.bit_width}",
                    section="params",
                )
        self.codes = codes
        self.params = params
        widths = np.array([p.bit_width for p in params], dtype=np.int64)
        bounds = np.concatenate(([0], np.cumsum(widths)))
        self.widths = widths
        self.column_starts = bounds[:-1]
        self.chunk_width = int(bounds[-1])
        self._pos_col = np.repeat(np.arange(d), widths)
        self._pos_shift = (bounds[1:][self._pos_col] - 1 - np.arange(self.chunk_width)).astype(np.uint64)

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def d(self) -> int:
        return self.codes.shape[1]

    def column_of(self, position: int) -> int:
        """Column index owning chunk bit `position`."""
        return int(self._pos_col[position])

    def bit_column(self, position: int) -> np.ndarray:
        """Values of chunk bit `position` across all rows, as uint8."""
        if not 0 <= position < self.chunk_width:
            raise ValueError(f"bit position {position} out of range [0, {self.chunk_width})")
        col = self._pos_col[position]
        shift = self._pos_shift[position]
        return ((self.codes[:, col] >> shift) & _U64(1)).astype(np.uint8)

    def bit_columns(self, positions: Sequence[int]) -> np.ndarray:
        """(n, len(positions)) uint8 matrix of the requested chunk bits."""
        if len(positions) == 0:
            return np.zeros((self.n, 0), dtype=np.uint8)
        return np.stack([self.bit_column(p) for p in positions], axis=1)

    def with_rows_appended(self, extra_codes: np.ndarray) -> "QuantizedMatrix":
        """New matrix with `extra_codes` rows stacked below, same params."""
        extra = np.asarray(extra_codes, dtype=np.uint64)
        if extra.ndim != 2 or extra.shape[1] != self.d:
            raise ValueError("appended rows must match column count")
        return QuantizedMatrix(np.vstack([self.codes, extra]), self.params)


@dataclass
class BitStats:
    """Per-bit-position statistics over the n rows of a matrix."""

    n: int
    ones: np.ndarray        # count of 1s per position
    p: np.ndarray           # ones / n
    entropy: np.ndarray     # binary entropy of p, 0 at p in {0, 1}
    is_constant: np.ndarray
    column: np.ndarray      # owning column index per position

    @property
    def chunk_width(self) -> int:
        return len(self.ones)


def _normalize_table(table) -> list[np.ndarray]:
    if isinstance(table, np.ndarray):
        if table.ndim != 2:
            raise QuantizeError("array tables must be 2-D")
        columns = [np.ascontiguousarray(table[:, j]) for j in range(table.shape[1])]
    else:
        columns = [np.ascontiguousarray(c) for c in table]
    if not columns:
        raise QuantizeError("table has no columns")
    n = len(columns[0])
    if n < 1:
        raise QuantizeError("table has no rows")
    for j, c in enumerate(columns):
        if c.ndim != 1:
            raise QuantizeError(f"column {j} is not 1-D")
        if len(c) != n:
            raise QuantizeError(f"column {j} has {len(c)} rows, expected {n}")
    return columns


def _infer_kind(values: np.ndarray, j: int) -> str:
    if np.issubdtype(values.dtype, np.integer) or np.issubdtype(values.dtype, np.bool_):
        return KIND_INT
    if np.issubdtype(values.dtype, np.floating):
        return KIND_FLOAT
    raise QuantizeError(f"column {j} has unsupported dtype {values.dtype}")


def _quantize_int(values: np.ndarray, j: int) -> tuple[np.ndarray, ColumnParams]:
    if np.issubdtype(values.dtype, np.floating):
        if not np.all(np.isfinite(values)):
            row = int(np.flatnonzero(~np.isfinite(values))[0])
            raise QuantizeError(f"non-finite value at row {row}, column {j}")
        rounded = np.round(values)
        if not np.array_equal(rounded, values):
            row = int(np.flatnonzero(rounded != values)[0])
            raise QuantizeError(f"non-integral value at row {row}, column {j} for int column")
        if np.any(np.abs(values) >= 2.0 ** 63):
            raise QuantizeError(f"column {j}: integer magnitude exceeds 64-bit range")
        values = values.astype(np.int64)
    if values.dtype == np.uint64 and values.size and int(values.max()) > np.iinfo(np.int64).max:
        raise QuantizeError(f"column {j}: unsigned values exceed the signed 64-bit range")
    precision = 32 if values.dtype.itemsize <= 4 else 64
    v = values.astype(np.int64)
    offset = int(v.min())
    span = int(v.max()) - offset
    codes = v.astype(np.uint64) - _U64(offset & _MASK64)
    width = max(1, span.bit_length())
    return codes, ColumnParams(KIND_INT, 0, offset, width, precision)


def _quantize_float(values: np.ndarray, j: int, force_raw: bool = False) -> tuple[np.ndarray, ColumnParams]:
    precision = 32 if values.dtype == np.float32 else 64
    if values.dtype not in (np.float32, np.float64):
        values = values.astype(np.float64)
    finite = np.isfinite(values)
    if not finite.all():
        row = int(np.flatnonzero(~finite)[0])
        raise QuantizeError(f"non-finite value at row {row}, column {j}")
    # -0.0 would normalize to +0.0 under fixed-point coding; keep its bits.
    has_negzero = bool(np.any((values == 0) & np.signbit(values)))
    if not force_raw and not has_negzero:
        work = values.astype(np.float64)
        for k in range(MAX_DECIMAL_SCALE + 1):
            scaled = work * (10.0 ** k)
            nearest = np.round(scaled)
            if np.max(np.abs(scaled - nearest)) > SCALE_TOLERANCE:
                continue
            if np.any(np.abs(nearest) >= 2.0 ** 63):
                break
            ints = nearest.astype(np.int64)
            rebuilt = ints.astype(np.float64) / (10.0 ** k)
            if precision == 32:
                rebuilt = rebuilt.astype(np.float32)
            if not np.array_equal(rebuilt, values.astype(rebuilt.dtype)):
                continue
            offset = int(ints.min())
            span = int(ints.max()) - offset
            if span.bit_length() > 64:
                break
            codes = ints.astype(np.uint64) - _U64(offset & _MASK64)
            return codes, ColumnParams(KIND_FLOAT, k, offset, max(1, span.bit_length()), precision)
    if precision == 32:
        bits = values.astype(np.float32).view(np.uint32).astype(np.uint64)
    else:
        bits = values.astype(np.float64).view(np.uint64)
    offset = int(bits.min())
    span = int(bits.max()) - offset
    codes = bits - _U64(offset)
    return codes, ColumnParams(KIND_FLOAT_RAW, 0, offset, max(1, span.bit_length()), precision)


def quantize_dataset(table, kinds: Sequence[str | None] | None = None) -> QuantizedMatrix:
    """Render a numeric table as a QuantizedMatrix, exactly invertibly.

    `table` is a 2-D array or a sequence of equal-length 1-D columns.
    `kinds` optionally forces "int", "float", or "float_raw" per column;
    None entries (or a None list) auto-detect from the dtype.
    """
    columns = _normalize_table(table)
    d = len(columns)
    if kinds is None:
        kinds = [None] * d
    if len(kinds) != d:
        raise QuantizeError(f"{d} columns but {len(kinds)} kind overrides")
    coded = []
    params = []
    for j, (col, kind) in enumerate(zip(columns, kinds)):
        if kind is None:
            kind = _infer_kind(col, j)
        if kind == KIND_INT:
            codes, p = _quantize_int(col, j)
        elif kind == KIND_FLOAT:
            codes, p = _quantize_float(col.astype(col.dtype if np.issubdtype(col.dtype, np.floating) else np.float64), j)
        elif kind == KIND_FLOAT_RAW:
            if not np.issubdtype(col.dtype, np.floating):
                col = col.astype(np.float64)
            codes, p = _quantize_float(col, j, force_raw=True)
        else:
            raise QuantizeError(f"unknown kind override {kind!r} for column {j}")
        coded.append(codes)
        params.append(p)
    return QuantizedMatrix(np.stack(coded, axis=1), params)


def dequantize(matrix: QuantizedMatrix) -> list[np.ndarray]:
    """Invert quantize_dataset; returns one array per column, bit-exactly.

    Integer columns come back as int64; float columns as float32/float64
    per their recorded precision.
    """
    out = []
    for j, p in enumerate(matrix.params):
        codes = matrix.codes[:, j]
        if p.bit_width < 64 and int(codes.max()) >> p.bit_width:
            raise IntegrityError(
                f"column {j} stores a value wider than bit_width {p.bit_width}",
                section="params",
            )
        shifted = codes + _U64(p.offset & _MASK64)
        if p.kind == KIND_INT:
            out.append(shifted.view(np.int64).copy())
        elif p.kind == KIND_FLOAT:
            vals = shifted.view(np.int64).astype(np.float64) / (10.0 ** p.decimal_scale)
            out.append(vals.astype(np.float32) if p.original_precision == 32 else vals)
        else:
            if p.original_precision == 32:
                out.append(shifted.astype(np.uint32).view(np.float32).copy())
            else:
                out.append(shifted.view(np.float64).copy())
    return out


def bit_stats(matrix: QuantizedMatrix) -> BitStats:
    """Ones count, probability, and binary entropy per chunk bit position."""
    l_c = matrix.chunk_width
    n = matrix.n
    ones = np.empty(l_c, dtype=np.int64)
    for pos in range(l_c):
        ones[pos] = int(matrix.bit_column(pos).sum())
    p = ones / n
    entropy = np.zeros(l_c, dtype=np.float64)
    interior = (ones > 0) & (ones < n)
    pi = p[interior]
    entropy[interior] = -(pi * np.log2(pi) + (1.0 - pi) * np.log2(1.0 - pi))
    return BitStats(
        n=n,
        ones=ones,
        p=p,
        entropy=entropy,
        is_constant=~interior,
        column=matrix._pos_col.copy(),
    )
