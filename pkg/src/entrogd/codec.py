"""Archive production and consumption.

On-disk layout (little-endian, sections dense bit streams padded to a
byte boundary):

    magic "EGD1" | version u8 | params_len u32
    params:   n u64 | m u32 | n_b u64 | tau u16 | m_max u32 | flags u8 | d u32
              d x (kind u8 | precision u8 | decimal_scale u8 | offset u64 | bit_width u8)
              selection count u32 + positions u32 (insertion order)
              analytic-bit count u32 + positions u32 (insertion order)
              [flags&2] d x (name_len u16 | utf-8 bytes)
              section byte lengths: weights u64 | condensed u64 | base u64 | ids u64 | deviations u64
    weights:     m fields of l_w bits, each storing weight-1, MSB first
    condensed:   m*d float64 sample values (original domain, unrounded)
    base_table:  n_b base strings of l_b bits (ascending position order),
                 deduplicated and sorted lexicographically
    ids:         (n+m) base ids of l_id bits, row order
    deviations:  (n+m) deviation strings of l_d bits, row order

Rows 0..n-1 reconstruct the original table; rows n..n+m-1 reconstruct the
re-quantized condensed samples. The weight and condensed sections sit
directly after params so the analytics summary is readable without
touching the per-row sections.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from time import perf_counter
from typing import Sequence

import numpy as np

from .basetree import BaseTree
from .bitmatrix import (
    KIND_FLOAT,
    KIND_FLOAT_RAW,
    KIND_INT,
    ColumnParams,
    IntegrityError,
    QuantizedMatrix,
    bit_stats,
    dequantize,
    quantize_dataset,
)
from .selection import (
    BitSelection,
    CondensedSampleSet,
    SizeModel,
    SizeTrace,
    _select_entropy,
    compressed_size,
    generate_condensed_samples,
    greedy_select_bits,
    id_bits,
    weight_bits,
)

MAGIC = b"EGD1"
VERSION = 1
_HEADER = struct.Struct("<4sBI")

_KIND_CODES = {KIND_INT: 0, KIND_FLOAT: 1, KIND_FLOAT_RAW: 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

_FLAG_EXACT_TRUNCATION = 1
_FLAG_HAS_NAMES = 2

_MASK64 = (1 << 64) - 1


def default_m_max(n: int) -> int:
    """Condensed-sample budget when the caller does not give one."""
    return min(4096, max(16, n // 100))


def _int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    if width == 0:
        return np.zeros((len(values), 0), dtype=np.uint8)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((values[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    rows, width = bits.shape
    if width == 0:
        return np.zeros(rows, dtype=np.uint64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return (bits.astype(np.uint64) << shifts[None, :]).sum(axis=1, dtype=np.uint64)


def _pack_bitmatrix(bits: np.ndarray) -> bytes:
    if bits.size == 0:
        return b""
    return np.packbits(bits.reshape(-1)).tobytes()


def _unpack_bitmatrix(data: bytes, rows: int, width: int, section: str) -> np.ndarray:
    need_bits = rows * width
    need_bytes = (need_bits + 7) // 8
    if len(data) != need_bytes:
        raise IntegrityError(f"expected {need_bytes} bytes, found {len(data)}", section=section)
    if need_bits == 0:
        return np.zeros((rows, width), dtype=np.uint8)
    flat = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=need_bits)
    return flat.reshape(rows, width)


@dataclass
class _ParsedParams:
    n: int
    m: int
    n_b: int
    tau: int
    m_max: int
    flags: int
    params: tuple[ColumnParams, ...]
    selection: BitSelection
    analytic_bits: BitSelection
    column_names: tuple[str, ...] | None
    section_lengths: dict[str, int]


def _serialize_params(archive: "Archive") -> bytes:
    out = bytearray()
    flags = 0
    if archive.exact_truncation:
        flags |= _FLAG_EXACT_TRUNCATION
    if archive.column_names is not None:
        flags |= _FLAG_HAS_NAMES
    out += struct.pack(
        "<QIQHIBI",
        archive.n,
        archive.m,
        archive.n_b,
        archive.tau,
        archive.m_max,
        flags,
        len(archive.params),
    )
    for p in archive.params:
        out += struct.pack(
            "<BBBQB",
            _KIND_CODES[p.kind],
            p.original_precision,
            p.decimal_scale,
            p.offset & _MASK64,
            p.bit_width,
        )
    for sel in (archive.selection, archive.analytic_bits):
        out += struct.pack("<I", len(sel.positions))
        for pos in sel.positions:
            out += struct.pack("<I", pos)
    if archive.column_names is not None:
        for name in archive.column_names:
            raw = name.encode("utf-8")
            out += struct.pack("<H", len(raw)) + raw
    out += struct.pack(
        "<QQQQQ",
        len(archive.weights_section),
        len(archive.condensed_section),
        len(archive.base_section),
        len(archive.id_section),
        len(archive.deviation_section),
    )
    return bytes(out)


def _parse_params(blob: bytes) -> _ParsedParams:
    try:
        off = 0
        n, m, n_b, tau, m_max, flags, d = struct.unpack_from("<QIQHIBI", blob, off)
        off += struct.calcsize("<QIQHIBI")
        params = []
        for _ in range(d):
            kind_code, precision, scale, offset_bits, width = struct.unpack_from("<BBBQB", blob, off)
            off += struct.calcsize("<BBBQB")
            if kind_code not in _KIND_NAMES:
                raise IntegrityError(f"unknown column kind code {kind_code}", section="params")
            kind = _KIND_NAMES[kind_code]
            if kind == KIND_FLOAT_RAW:
                offset = offset_bits
            else:
                offset = offset_bits - (1 << 64) if offset_bits >= (1 << 63) else offset_bits
            params.append(ColumnParams(kind, scale, offset, width, precision))
        chunk_width = sum(p.bit_width for p in params)
        selections = []
        for _ in range(2):
            (count,) = struct.unpack_from("<I", blob, off)
            off += 4
            positions = struct.unpack_from(f"<{count}I", blob, off)
            off += 4 * count
            selections.append(BitSelection(positions, chunk_width))
        names = None
        if flags & _FLAG_HAS_NAMES:
            parsed_names = []
            for _ in range(d):
                (length,) = struct.unpack_from("<H", blob, off)
                off += 2
                parsed_names.append(blob[off : off + length].decode("utf-8"))
                off += length
            names = tuple(parsed_names)
        lengths = struct.unpack_from("<QQQQQ", blob, off)
        off += struct.calcsize("<QQQQQ")
        if off != len(blob):
            raise IntegrityError("trailing bytes in params section", section="params")
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, IntegrityError):
            raise
        raise IntegrityError(str(exc), section="params") from exc
    section_lengths = dict(
        zip(("weights", "condensed", "base_table", "ids", "deviations"), lengths)
    )
    return _ParsedParams(
        n=n,
        m=m,
        n_b=n_b,
        tau=tau,
        m_max=m_max,
        flags=flags,
        params=tuple(params),
        selection=selections[0],
        analytic_bits=selections[1],
        column_names=names,
        section_lengths=section_lengths,
    )


class Archive:
    """Compressed representation of a table plus its analytics summary."""

    def __init__(
        self,
        *,
        n: int,
        m: int,
        n_b: int,
        tau: int,
        m_max: int,
        exact_truncation: bool,
        params: Sequence[ColumnParams],
        selection: BitSelection,
        analytic_bits: BitSelection,
        column_names: Sequence[str] | None,
        weights_section: bytes,
        condensed_section: bytes,
        base_section: bytes,
        id_section: bytes,
        deviation_section: bytes,
    ):
        self.n = n
        self.m = m
        self.n_b = n_b
        self.tau = tau
        self.m_max = m_max
        self.exact_truncation = exact_truncation
        self.params = tuple(params)
        self.selection = selection
        self.analytic_bits = analytic_bits
        self.column_names = tuple(column_names) if column_names is not None else None
        self.weights_section = weights_section
        self.condensed_section = condensed_section
        self.base_section = base_section
        self.id_section = id_section
        self.deviation_section = deviation_section
        self._params_blob = _serialize_params(self)

    @property
    def d(self) -> int:
        return len(self.params)

    @property
    def chunk_width(self) -> int:
        return sum(p.bit_width for p in self.params)

    @property
    def params_blob(self) -> bytes:
        return self._params_blob

    def section_sizes(self) -> dict[str, int]:
        """Byte size of every archive region, header included."""
        return {
            "header": _HEADER.size,
            "params": len(self._params_blob),
            "weights": len(self.weights_section),
            "condensed": len(self.condensed_section),
            "base_table": len(self.base_section),
            "ids": len(self.id_section),
            "deviations": len(self.deviation_section),
        }

    def size_model(self) -> SizeModel:
        """Size-formula view of this archive; s_params counts the params
        and condensed sections (8 bits per serialized byte)."""
        return SizeModel(
            n=self.n,
            m=self.m,
            n_b=self.n_b,
            l_b=self.selection.l_b,
            l_d=self.selection.l_d,
            s_params=8 * (len(self._params_blob) + len(self.condensed_section)),
        )

    @property
    def size_bits(self) -> int:
        return compressed_size(self.size_model())

    @property
    def size_bytes(self) -> int:
        return sum(self.section_sizes().values())

    def to_bytes(self) -> bytes:
        return (
            _HEADER.pack(MAGIC, VERSION, len(self._params_blob))
            + self._params_blob
            + self.weights_section
            + self.condensed_section
            + self.base_section
            + self.id_section
            + self.deviation_section
        )

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "Archive":
        if len(data) < _HEADER.size:
            raise IntegrityError("file shorter than the fixed header", section="header")
        magic, version, params_len = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise IntegrityError(f"bad magic {magic!r}", section="header")
        if version != VERSION:
            raise IntegrityError(f"unsupported version {version}", section="header")
        off = _HEADER.size
        if off + params_len > len(data):
            raise IntegrityError("params section truncated", section="params")
        parsed = _parse_params(data[off : off + params_len])
        off += params_len

        total_rows = parsed.n + parsed.m
        l_b = parsed.selection.l_b
        l_d = parsed.selection.l_d
        expected = {
            "weights": (parsed.m * weight_bits(parsed.n) + 7) // 8,
            "condensed": 8 * parsed.m * len(parsed.params),
            "base_table": (parsed.n_b * l_b + 7) // 8,
            "ids": (total_rows * id_bits(parsed.n_b) + 7) // 8,
            "deviations": (total_rows * l_d + 7) // 8,
        }
        for name, want in expected.items():
            if parsed.section_lengths[name] != want:
                raise IntegrityError(
                    f"declared {parsed.section_lengths[name]} bytes, expected {want}",
                    section=name,
                )
        sections = {}
        for name in ("weights", "condensed", "base_table", "ids", "deviations"):
            length = parsed.section_lengths[name]
            if off + length > len(data):
                raise IntegrityError("section truncated", section=name)
            sections[name] = data[off : off + length]
            off += length
        if off != len(data):
            raise IntegrityError(f"{len(data) - off} trailing bytes", section="deviations")
        if parsed.n_b < 1 or parsed.n_b > total_rows:
            raise IntegrityError(f"base count {parsed.n_b} out of range", section="params")
        return cls(
            n=parsed.n,
            m=parsed.m,
            n_b=parsed.n_b,
            tau=parsed.tau,
            m_max=parsed.m_max,
            exact_truncation=bool(parsed.flags & _FLAG_EXACT_TRUNCATION),
            params=parsed.params,
            selection=parsed.selection,
            analytic_bits=parsed.analytic_bits,
            column_names=parsed.column_names,
            weights_section=sections["weights"],
            condensed_section=sections["condensed"],
            base_section=sections["base_table"],
            id_section=sections["ids"],
            deviation_section=sections["deviations"],
        )

    @classmethod
    def read(cls, path) -> "Archive":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass
class CompressStats:
    """Timings and configuration details of one compress run."""

    configuration_seconds: float
    total_seconds: float
    trace: SizeTrace
    selection: BitSelection
    n_b: int
    condensed: CondensedSampleSet | None


def compress_with_stats(
    table,
    kinds: Sequence[str | None] | None = None,
    *,
    m_max: int | None = None,
    tau: int = 10,
    importance: Sequence[float] | None = None,
    exact_truncation: bool = False,
    method: str = "entropy",
    column_names: Sequence[str] | None = None,
) -> tuple[Archive, CompressStats]:
    """Compress a table and report configuration details.

    method "entropy" runs the full pipeline: condensed samples appended to
    the data, then entropy-guided bit selection. method "greedy" runs the
    size-greedy baseline selection with no condensed samples (m = 0).
    """
    t_start = perf_counter()
    matrix = quantize_dataset(table, kinds)
    n = matrix.n
    if m_max is None:
        m_max = default_m_max(n)

    t_config = perf_counter()
    if method == "entropy":
        stats = bit_stats(matrix)
        css = generate_condensed_samples(
            matrix, m_max, importance=importance, exact_truncation=exact_truncation, stats=stats
        )
        extended = matrix.with_rows_appended(css.quantized_rows)
        selection, trace, tree = _select_entropy(extended, stats, css.m, tau)
        m = css.m
    elif method == "greedy":
        css = None
        extended = matrix
        selection, trace = greedy_select_bits(matrix, tau)
        tree = BaseTree(matrix)
        for pos in selection.positions:
            tree.add_bit(pos)
        m = 0
    else:
        raise ValueError(f"unknown method {method!r}")
    configuration_seconds = perf_counter() - t_config

    ids, base_bits = tree.lexicographic_ids()
    n_b = tree.leaf_count
    l_w = weight_bits(n)
    l_id = id_bits(n_b)
    dev_bits = extended.bit_columns(selection.unselected)

    if m:
        weights_section = _pack_bitmatrix(_int_to_bits((css.weights - 1).astype(np.uint64), l_w))
        condensed_section = css.samples.astype("<f8").tobytes()
        analytic_bits = css.analytic_bits
    else:
        weights_section = b""
        condensed_section = b""
        analytic_bits = BitSelection((), matrix.chunk_width)

    archive = Archive(
        n=n,
        m=m,
        n_b=n_b,
        tau=tau,
        m_max=m_max,
        exact_truncation=exact_truncation,
        params=matrix.params,
        selection=selection,
        analytic_bits=analytic_bits,
        column_names=column_names,
        weights_section=weights_section,
        condensed_section=condensed_section,
        base_section=_pack_bitmatrix(base_bits),
        id_section=_pack_bitmatrix(_int_to_bits(ids.astype(np.uint64), l_id)),
        deviation_section=_pack_bitmatrix(dev_bits),
    )
    stats_out = CompressStats(
        configuration_seconds=configuration_seconds,
        total_seconds=perf_counter() - t_start,
        trace=trace,
        selection=selection,
        n_b=n_b,
        condensed=css,
    )
    return archive, stats_out


def compress(table, kinds=None, **kwargs) -> Archive:
    """Compress a table; see compress_with_stats for the configuration."""
    return compress_with_stats(table, kinds, **kwargs)[0]


def _position_layout(params: Sequence[ColumnParams]) -> tuple[np.ndarray, np.ndarray]:
    widths = np.array([p.bit_width for p in params], dtype=np.int64)
    bounds = np.concatenate(([0], np.cumsum(widths)))
    pos_col = np.repeat(np.arange(len(params)), widths)
    pos_shift = bounds[1:][pos_col] - 1 - np.arange(int(bounds[-1]))
    return pos_col, pos_shift


def decode_ids(archive: Archive) -> np.ndarray:
    """Base id per stored row, validated against the base table."""
    total = archive.n + archive.m
    l_id = id_bits(archive.n_b)
    ids = _bits_to_int(_unpack_bitmatrix(archive.id_section, total, l_id, "ids")).astype(np.int64)
    if ids.size and int(ids.max()) >= archive.n_b:
        raise IntegrityError(
            f"base id {int(ids.max())} out of range for {archive.n_b} bases", section="ids"
        )
    if archive.n_b > 1 or ids.size:
        referenced = np.bincount(ids, minlength=archive.n_b)
        if int(referenced.min()) < 1:
            raise IntegrityError("unreferenced base in base table", section="base_table")
    return ids


def decode_codes(archive: Archive) -> np.ndarray:
    """All n+m stored rows as quantized column codes."""
    total = archive.n + archive.m
    l_b = archive.selection.l_b
    l_d = archive.selection.l_d
    base_bits = _unpack_bitmatrix(archive.base_section, archive.n_b, l_b, "base_table")
    dev_bits = _unpack_bitmatrix(archive.deviation_section, total, l_d, "deviations")
    ids = decode_ids(archive)
    row_base = base_bits[ids]
    pos_col, pos_shift = _position_layout(archive.params)
    codes = np.zeros((total, archive.d), dtype=np.uint64)
    for k, pos in enumerate(archive.selection.sorted_positions):
        col = pos_col[pos]
        codes[:, col] |= row_base[:, k].astype(np.uint64) << np.uint64(pos_shift[pos])
    for k, pos in enumerate(archive.selection.unselected):
        col = pos_col[pos]
        codes[:, col] |= dev_bits[:, k].astype(np.uint64) << np.uint64(pos_shift[pos])
    return codes


def decompress(archive: Archive) -> list[np.ndarray]:
    """Reconstruct the original table (first n rows), bit-exactly.

    The appended condensed rows are dropped; use extract_condensed for
    the analytics summary.
    """
    codes = decode_codes(archive)
    matrix = QuantizedMatrix(codes[: archive.n], archive.params)
    return dequantize(matrix)


def extract_condensed(archive: Archive) -> CondensedSampleSet:
    """Analytics summary from the params, weight, and condensed sections only."""
    m = archive.m
    d = archive.d
    if len(archive.condensed_section) != 8 * m * d:
        raise IntegrityError(
            f"expected {8 * m * d} bytes, found {len(archive.condensed_section)}",
            section="condensed",
        )
    samples = np.frombuffer(archive.condensed_section, dtype="<f8").reshape(m, d).copy()
    l_w = weight_bits(archive.n)
    weights = (
        _bits_to_int(_unpack_bitmatrix(archive.weights_section, m, l_w, "weights")).astype(np.int64)
        + 1
    )
    if m and int(weights.sum()) != archive.n:
        raise IntegrityError(
            f"weights sum to {int(weights.sum())}, expected {archive.n}", section="weights"
        )
    return CondensedSampleSet(
        samples=samples,
        weights=weights,
        analytic_bits=archive.analytic_bits,
        quantized_rows=None,
    )


def read_condensed(path) -> tuple[CondensedSampleSet, int]:
    """extract_condensed from a file, reading only the leading sections.

    Returns the sample set and the number of bytes read; the per-row
    sections (base table, ids, deviations) are never touched.
    """
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise IntegrityError("file shorter than the fixed header", section="header")
        magic, version, params_len = _HEADER.unpack(header)
        if magic != MAGIC:
            raise IntegrityError(f"bad magic {magic!r}", section="header")
        if version != VERSION:
            raise IntegrityError(f"unsupported version {version}", section="header")
        blob = fh.read(params_len)
        if len(blob) < params_len:
            raise IntegrityError("params section truncated", section="params")
        parsed = _parse_params(blob)
        w_len = parsed.section_lengths["weights"]
        c_len = parsed.section_lengths["condensed"]
        weights_section = fh.read(w_len)
        condensed_section = fh.read(c_len)
    if len(weights_section) < w_len:
        raise IntegrityError("section truncated", section="weights")
    if len(condensed_section) < c_len:
        raise IntegrityError("section truncated", section="condensed")
    d = len(parsed.params)
    samples = np.frombuffer(condensed_section, dtype="<f8").reshape(parsed.m, d).copy()
    l_w = weight_bits(parsed.n)
    weights = (
        _bits_to_int(_unpack_bitmatrix(weights_section, parsed.m, l_w, "weights")).astype(np.int64)
        + 1
    )
    if parsed.m and int(weights.sum()) != parsed.n:
        raise IntegrityError(
            f"weights sum to {int(weights.sum())}, expected {parsed.n}", section="weights"
        )
    css = CondensedSampleSet(
        samples=samples,
        weights=weights,
        analytic_bits=parsed.analytic_bits,
        quantized_rows=None,
    )
    bytes_read = _HEADER.size + params_len + w_len + c_len
    return css, bytes_read


def base_centroids(archive: Archive) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint of each base's attainable value range, plus member counts.

    The low corner zeroes every deviation bit, the high corner sets them
    all; both are converted to the original domain and averaged. Counts
    cover the original rows only (appended condensed rows are synthetic).
    """
    l_b = archive.selection.l_b
    base_bits = _unpack_bitmatrix(archive.base_section, archive.n_b, l_b, "base_table")
    pos_col, pos_shift = _position_layout(archive.params)
    low = np.zeros((archive.n_b, archive.d), dtype=np.uint64)
    for k, pos in enumerate(archive.selection.sorted_positions):
        col = pos_col[pos]
        low[:, col] |= base_bits[:, k].astype(np.uint64) << np.uint64(pos_shift[pos])
    dev_mask = np.zeros(archive.d, dtype=np.uint64)
    for pos in archive.selection.unselected:
        dev_mask[pos_col[pos]] |= np.uint64(1) << np.uint64(pos_shift[pos])
    high = low | dev_mask[None, :]

    lo_cols = dequantize(QuantizedMatrix(low, archive.params))
    hi_cols = dequantize(QuantizedMatrix(high, archive.params))
    centroids = np.empty((archive.n_b, archive.d), dtype=np.float64)
    for j in range(archive.d):
        centroids[:, j] = (lo_cols[j].astype(np.float64) + hi_cols[j].astype(np.float64)) / 2.0
    ids = decode_ids(archive)
    counts = np.bincount(ids[: archive.n], minlength=archive.n_b).astype(np.int64)
    return centroids, counts
