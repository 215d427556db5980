"""Base-bit selection and size accounting.

Two selection strategies live here. Condensed-sample generation walks the
most significant non-constant bit of each dimension in rounds until the
base count reaches a target, then summarizes every base by the mean of
its deviations. Compression selection adds bits in ascending bit-entropy
order and keeps the prefix minimizing the modeled archive size, stopping
after a plateau. A size-greedy baseline re-evaluates every dimension's
next bit per round, which is quadratic in the dimension count.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .basetree import BaseTree
from .bitmatrix import (
    KIND_FLOAT,
    KIND_FLOAT_RAW,
    KIND_INT,
    BitStats,
    QuantizedMatrix,
    bit_stats,
    dequantize,
)

_U64 = np.uint64
_MASK64 = (1 << 64) - 1


def weight_bits(n: int) -> int:
    """Bits needed to store one sample weight in [1, n]."""
    return 1 if n <= 1 else (n - 1).bit_length()


def id_bits(n_b: int) -> int:
    """Bits needed to store one base id in [0, n_b)."""
    return 0 if n_b <= 1 else (n_b - 1).bit_length()


@dataclass(frozen=True)
class BitSelection:
    """Ordered set of chunk bit positions designated as base bits."""

    positions: tuple[int, ...]
    chunk_width: int

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(int(p) for p in self.positions))
        if len(set(self.positions)) != len(self.positions):
            raise ValueError("duplicate bit positions in selection")
        for p in self.positions:
            if not 0 <= p < self.chunk_width:
                raise ValueError(f"bit position {p} out of range [0, {self.chunk_width})")

    @property
    def l_b(self) -> int:
        return len(self.positions)

    @property
    def l_d(self) -> int:
        return self.chunk_width - len(self.positions)

    @property
    def sorted_positions(self) -> tuple[int, ...]:
        return tuple(sorted(self.positions))

    @property
    def unselected(self) -> tuple[int, ...]:
        chosen = set(self.positions)
        return tuple(p for p in range(self.chunk_width) if p not in chosen)


@dataclass
class SizeModel:
    """Inputs of the compressed-size formula.

    size = n_b*l_b + (n+m)*(l_d + l_id) + m*l_w + s_params, all in bits,
    with l_w = ceil(log2 n) (1 when n == 1) and l_id = ceil(log2 n_b)
    (0 when n_b == 1).
    """

    n: int
    m: int
    n_b: int
    l_b: int
    l_d: int
    s_params: int = 0
    l_w: int = field(init=False)
    l_id: int = field(init=False)

    def __post_init__(self):
        if min(self.n, self.m, self.n_b, self.l_b, self.l_d, self.s_params) < 0:
            raise ValueError("SizeModel fields must be non-negative")
        self.l_w = weight_bits(self.n)
        self.l_id = id_bits(self.n_b)


def compressed_size(model: SizeModel) -> int:
    """Total modeled archive payload in bits."""
    return (
        model.n_b * model.l_b
        + (model.n + model.m) * (model.l_d + model.l_id)
        + model.m * model.l_w
        + model.s_params
    )


@dataclass
class TraceEntry:
    position: int
    entropy: float
    leaf_count: int
    size_bits: int
    improved: bool


@dataclass
class SizeTrace:
    """Per-addition record of a bit-selection run."""

    initial_size: int
    entries: list[TraceEntry] = field(default_factory=list)
    best_size: int = 0
    best_length: int = 0


@dataclass
class CondensedSampleSet:
    """Weighted summary rows standing in for the full dataset.

    samples are unrounded per-base deviation means added to the base
    value, in the original data domain; weights are base member counts
    and sum to n. quantized_rows carries the re-quantized (half-even)
    integer codes appended to the dataset for compression; it is None
    when the set was reloaded from an archive.
    """

    samples: np.ndarray
    weights: np.ndarray
    analytic_bits: BitSelection
    quantized_rows: np.ndarray | None = None
    selection_trace: list[tuple[int, int]] = field(default_factory=list)
    initial_count: int = 0

    @property
    def m(self) -> int:
        return len(self.weights)


def _leaf_sums(codes_col: np.ndarray, ids: np.ndarray, n_groups: int, width: int, n: int) -> list[int]:
    """Exact per-group sums of one column's codes."""
    if width + n.bit_length() <= 62:
        sums = np.zeros(n_groups, dtype=np.int64)
        np.add.at(sums, ids, codes_col.astype(np.int64))
        return [int(s) for s in sums]
    sums = [0] * n_groups
    for i, c in zip(ids.tolist(), codes_col.tolist()):
        sums[i] += c
    return sums


def _round_half_even(total: int, count: int) -> int:
    q, r = divmod(total, count)
    twice = 2 * r
    if twice > count or (twice == count and q % 2 == 1):
        return q + 1
    return q


def _samples_from_groups(
    matrix: QuantizedMatrix,
    sums: list[list[int]],
    counts: list[int],
    raw_means: dict[int, np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """(original-domain samples, re-quantized codes) from exact group sums."""
    m = len(counts)
    d = matrix.d
    samples = np.empty((m, d), dtype=np.float64)
    quantized = np.empty((m, d), dtype=np.uint64)
    for j, p in enumerate(matrix.params):
        col_sums = sums[j]
        rounded = [_round_half_even(col_sums[g], counts[g]) for g in range(m)]
        quantized[:, j] = np.array([r & _MASK64 for r in rounded], dtype=np.uint64)
        if p.kind == KIND_FLOAT_RAW:
            samples[:, j] = raw_means[j]
            continue
        means = np.array([col_sums[g] / counts[g] for g in range(m)], dtype=np.float64)
        if p.kind == KIND_INT:
            samples[:, j] = means + p.offset
        else:
            samples[:, j] = (means + p.offset) / (10.0 ** p.decimal_scale)
    return samples, quantized


def generate_condensed_samples(
    matrix: QuantizedMatrix,
    m_max: int,
    importance: Sequence[float] | None = None,
    exact_truncation: bool = False,
    stats: BitStats | None = None,
) -> CondensedSampleSet:
    """Build weighted condensed samples from bases picked MSB-first per dimension.

    Starts from the constant bits, then repeatedly adds the most
    significant remaining non-constant bit of each dimension (input order,
    or descending `importance` order) until the base count reaches m_max
    or bits run out. Each base j yields one sample: base value plus the
    mean of its member deviations, weighted by the member count. The base
    count may overshoot m_max by the final addition; `exact_truncation`
    merges lowest-weight samples into their nearest neighbor until
    exactly min(m_max, distinct-row count) remain.
    """
    if m_max < 1:
        raise ValueError(f"m_max must be >= 1, got {m_max}")
    if stats is None:
        stats = bit_stats(matrix)
    d = matrix.d
    if importance is not None:
        imp = np.asarray(importance, dtype=np.float64)
        if imp.shape != (d,) or not np.all(np.isfinite(imp)):
            raise ValueError("importance must be a finite vector with one entry per column")
        dim_order = list(np.argsort(-imp, kind="stable"))
    else:
        dim_order = list(range(d))

    tree = BaseTree(matrix)
    constant_positions = np.flatnonzero(stats.is_constant)
    for pos in constant_positions:
        tree.add_bit(int(pos))
    queues = [
        deque(
            p
            for p in range(matrix.column_starts[j], matrix.column_starts[j] + matrix.widths[j])
            if not stats.is_constant[p]
        )
        for j in range(d)
    ]

    m_count = 1 if len(constant_positions) else 0
    initial_count = m_count
    trace: list[tuple[int, int]] = []
    while m_count < m_max:
        progressed = False
        for dim in dim_order:
            if not queues[dim]:
                continue
            pos = queues[dim].popleft()
            m_count = tree.add_bit(pos)
            trace.append((pos, m_count))
            progressed = True
            if m_count >= m_max:
                break
        if m_count >= m_max or not progressed:
            break

    ids, _ = tree.lexicographic_ids()
    n_groups = tree.leaf_count
    counts = np.bincount(ids, minlength=n_groups).astype(np.int64)
    sums = [
        _leaf_sums(matrix.codes[:, j], ids, n_groups, int(matrix.widths[j]), matrix.n)
        for j in range(d)
    ]
    raw_means: dict[int, np.ndarray] = {}
    raw_cols = [j for j, p in enumerate(matrix.params) if p.kind == KIND_FLOAT_RAW]
    if raw_cols:
        originals = dequantize(matrix)
        for j in raw_cols:
            acc = np.zeros(n_groups, dtype=np.float64)
            np.add.at(acc, ids, originals[j].astype(np.float64))
            raw_means[j] = acc / counts

    sums_l = [list(s) for s in sums]
    counts_l = [int(c) for c in counts]
    raw_l = {j: list(map(float, v)) for j, v in raw_means.items()}

    if exact_truncation:
        target = min(m_max, n_groups)
        samples, _ = _samples_from_groups(
            matrix, sums_l, counts_l, {j: np.array(v) for j, v in raw_l.items()}
        )
        work = samples.tolist()
        while len(counts_l) > target:
            src = min(range(len(counts_l)), key=lambda g: (counts_l[g], g))
            row = np.array(work[src])
            dists = [
                (float(np.sum((np.array(work[g]) - row) ** 2)), g)
                for g in range(len(counts_l))
                if g != src
            ]
            _, dst = min(dists)
            ca, cb = counts_l[dst], counts_l[src]
            for j in range(d):
                sums_l[j][dst] += sums_l[j][src]
            for j in raw_l:
                raw_l[j][dst] = (raw_l[j][dst] * ca + raw_l[j][src] * cb) / (ca + cb)
            counts_l[dst] = ca + cb
            work[dst] = list(
                (np.array(work[dst]) * ca + np.array(work[src]) * cb) / (ca + cb)
            )
            for j in range(d):
                del sums_l[j][src]
            for j in raw_l:
                del raw_l[j][src]
            del counts_l[src]
            del work[src]

    samples, quantized = _samples_from_groups(
        matrix, sums_l, counts_l, {j: np.array(v) for j, v in raw_l.items()}
    )
    return CondensedSampleSet(
        samples=samples,
        weights=np.array(counts_l, dtype=np.int64),
        analytic_bits=BitSelection(tree.selected_bits, matrix.chunk_width),
        quantized_rows=quantized,
        selection_trace=trace,
        initial_count=initial_count,
    )


def _extended_constant_positions(matrix: QuantizedMatrix) -> list[int]:
    out = []
    for pos in range(matrix.chunk_width):
        bits = matrix.bit_column(pos)
        if not bits.any() or bits.all():
            out.append(pos)
    return out


def _select_entropy(
    extended: QuantizedMatrix,
    stats: BitStats,
    m: int,
    tau: int,
) -> tuple[BitSelection, SizeTrace, BaseTree]:
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    n = extended.n - m
    if n < 1:
        raise ValueError("extended matrix must contain the original rows plus m appended rows")
    l_c = extended.chunk_width
    if stats.chunk_width != l_c:
        raise ValueError("bit stats do not match the matrix chunk width")

    tree = BaseTree(extended)
    constant = _extended_constant_positions(extended)
    for pos in constant:
        tree.add_bit(pos)
    constant_set = set(constant)

    l_w = weight_bits(n)

    def size_of(l_b: int, n_b: int) -> int:
        return n_b * l_b + (n + m) * (l_c - l_b + id_bits(n_b)) + m * l_w

    best_size = size_of(len(constant), 1)
    trace = SizeTrace(initial_size=best_size, best_size=best_size, best_length=0)
    order = np.argsort(stats.entropy, kind="stable")  # ties -> lower position
    streak = 0
    added = 0
    best_added = 0
    for pos in order:
        pos = int(pos)
        if pos in constant_set:
            continue
        n_b = tree.add_bit(pos)
        added += 1
        size = size_of(len(constant) + added, n_b)
        improved = size < best_size
        if improved:
            best_size = size
            best_added = added
            streak = 0
        else:
            streak += 1
        trace.entries.append(TraceEntry(pos, float(stats.entropy[pos]), n_b, size, improved))
        if streak >= tau:
            break
    while added > best_added:
        tree.remove_last_bit()
        added -= 1
    trace.best_size = best_size
    trace.best_length = best_added
    return BitSelection(tree.selected_bits, l_c), trace, tree


def select_compression_bits(
    extended: QuantizedMatrix,
    stats: BitStats,
    m: int,
    tau: int = 10,
) -> tuple[BitSelection, SizeTrace]:
    """Entropy-guided base-bit selection over the extended dataset.

    Pre-selects the bits constant across the extended rows, then adds the
    remaining positions in ascending entropy (ties broken by lower
    position), evaluating the modeled size after each addition. Stops
    after `tau` consecutive non-improving additions or bit exhaustion and
    returns the best prefix seen. `stats` must come from the original n
    rows only; `m` is the number of appended condensed rows.
    """
    selection, trace, _ = _select_entropy(extended, stats, m, tau)
    return selection, trace


def greedy_select_bits(
    matrix: QuantizedMatrix,
    tau: int = 10,
) -> tuple[BitSelection, SizeTrace]:
    """Size-greedy baseline: per round, try the next most significant bit
    of every dimension and commit the one minimizing the modeled size.

    Stops when candidates run out or the best size has not improved for
    `tau` consecutive commits, and returns the best prefix. Evaluating
    every dimension each round makes this quadratic in d.
    """
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    n = matrix.n
    l_c = matrix.chunk_width
    d = matrix.d
    tree = BaseTree(matrix)
    next_bit = [int(matrix.column_starts[j]) for j in range(d)]
    limits = [int(matrix.column_starts[j] + matrix.widths[j]) for j in range(d)]

    def size_of(l_b: int, n_b: int) -> int:
        return n_b * l_b + n * (l_c - l_b + id_bits(n_b))

    best_size = size_of(0, 1)
    trace = SizeTrace(initial_size=best_size, best_size=best_size, best_length=0)
    committed = 0
    best_committed = 0
    streak = 0
    while True:
        best_candidate = None  # (size, n_b, dim, pos)
        for dim in range(d):
            if next_bit[dim] >= limits[dim]:
                continue
            pos = next_bit[dim]
            n_b = tree.add_bit(pos)
            size = size_of(committed + 1, n_b)
            tree.remove_last_bit()
            if best_candidate is None or size < best_candidate[0]:
                best_candidate = (size, n_b, dim, pos)
        if best_candidate is None:
            break
        size, n_b, dim, pos = best_candidate
        tree.add_bit(pos)
        next_bit[dim] += 1
        committed += 1
        improved = size < best_size
        if improved:
            best_size = size
            best_committed = committed
            streak = 0
        else:
            streak += 1
        trace.entries.append(TraceEntry(pos, float("nan"), n_b, size, improved))
        if streak >= tau:
            break
    while committed > best_committed:
        tree.remove_last_bit()
        committed -= 1
    trace.best_size = best_size
    trace.best_length = best_committed
    return BitSelection(tree.selected_bits, l_c), trace
