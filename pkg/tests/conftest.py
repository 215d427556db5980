import numpy as np
import pytest

from entrogd import ColumnParams, QuantizedMatrix

DATA_FILES = [
    "sensor_float.csv",
    "counters_int.csv",
    "mixed.csv",
    "single_row.csv",
    "all_same.csv",
]


@pytest.fixture
def data_dir(request):
    return request.path.parent / "data"


def int_matrix(values, width=None) -> QuantizedMatrix:
    """Single-column matrix from already-quantized codes (offset 0)."""
    values = np.asarray(values, dtype=np.uint64)
    if width is None:
        width = max(1, int(values.max()).bit_length())
    params = [ColumnParams("int", 0, 0, width, 64)]
    return QuantizedMatrix(values[:, None], params)


def multi_matrix(code_columns, widths) -> QuantizedMatrix:
    """Multi-column matrix from pre-quantized codes (offset 0 everywhere)."""
    codes = np.stack([np.asarray(c, dtype=np.uint64) for c in code_columns], axis=1)
    params = [ColumnParams("int", 0, 0, w, 64) for w in widths]
    return QuantizedMatrix(codes, params)


def brute_force_partition(matrix: QuantizedMatrix, positions) -> dict[tuple, list[int]]:
    """Group row indices by their chunk projection onto `positions`."""
    groups: dict[tuple, list[int]] = {}
    bit_cols = [matrix.bit_column(p) for p in sorted(positions)]
    for row in range(matrix.n):
        key = tuple(int(b[row]) for b in bit_cols)
        groups.setdefault(key, []).append(row)
    return groups


def random_table(rng: np.random.Generator, n=None, d=None, allow_raw=True):
    """Random mixed-kind table: ints, fixed-point floats, raw floats."""
    n = n or int(rng.integers(1, 400))
    d = d or int(rng.integers(1, 6))
    columns = []
    for _ in range(d):
        kind = rng.choice(["int", "fixed", "raw"] if allow_raw else ["int", "fixed"])
        if kind == "int":
            lo = int(rng.integers(-(2**16), 2**16))
            span = int(rng.integers(1, 2**12))
            columns.append(rng.integers(lo, lo + span, n))
        elif kind == "fixed":
            decimals = int(rng.integers(0, 4))
            vals = np.round(rng.normal(rng.uniform(-50, 50), rng.uniform(0.1, 20), n), decimals)
            columns.append(vals)
        else:
            columns.append(rng.standard_normal(n))
    return columns
