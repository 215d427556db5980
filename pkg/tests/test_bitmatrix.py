import mpmath
import numpy as np
import pytest

from entrogd import (
    IntegrityError,
    QuantizeError,
    bit_stats,
    dequantize,
    quantize_dataset,
)
from entrogd.bitmatrix import KIND_FLOAT, KIND_FLOAT_RAW, KIND_INT

from conftest import random_table


def bits_equal(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.dtype != b.dtype or a.shape != b.shape:
        return False
    if np.issubdtype(a.dtype, np.floating):
        width = np.uint32 if a.dtype == np.float32 else np.uint64
        return bool(np.all(a.view(width) == b.view(width)))
    return bool(np.all(a == b))


class TestQuantize:
    def test_int_column_offsets_by_minimum(self):
        m = quantize_dataset([np.array([5, 7, 5])])
        p = m.params[0]
        assert (p.kind, p.offset, p.bit_width) == (KIND_INT, 5, 2)
        assert m.codes[:, 0].tolist() == [0, 2, 0]

    def test_single_value_column(self):
        m = quantize_dataset([np.array([0])])
        p = m.params[0]
        assert (p.offset, p.bit_width) == (0, 1)
        assert bit_stats(m).is_constant.all()

    def test_float_column_decimal_scaling(self):
        m = quantize_dataset([np.array([1.25, 3.50])])
        p = m.params[0]
        assert (p.kind, p.decimal_scale, p.offset, p.bit_width) == (KIND_FLOAT, 2, 125, 8)
        assert m.codes[:, 0].tolist() == [0, 225]

    def test_smallest_scale_wins(self):
        m = quantize_dataset([np.array([1.0, 2.0, 3.0])])
        assert m.params[0].decimal_scale == 0

    def test_unscalable_floats_fall_back_to_raw_bits(self):
        vals = np.array([np.pi, np.e, 1 / 3])
        m = quantize_dataset([vals])
        assert m.params[0].kind == KIND_FLOAT_RAW

    def test_negative_zero_keeps_its_bits(self):
        vals = np.array([-0.0, 1.5])
        m = quantize_dataset([vals])
        assert m.params[0].kind == KIND_FLOAT_RAW
        out = dequantize(m)[0]
        assert np.signbit(out[0])

    def test_nan_rejected_with_location(self):
        with pytest.raises(QuantizeError, match=r"row 2, column 1"):
            quantize_dataset([np.array([1.0, 2.0, 3.0]), np.array([0.5, 1.0, np.nan])])

    def test_inf_rejected(self):
        with pytest.raises(QuantizeError, match=r"row 0, column 0"):
            quantize_dataset([np.array([np.inf, 2.0])])

    def test_rectangularity_enforced(self):
        with pytest.raises(QuantizeError):
            quantize_dataset([np.array([1, 2]), np.array([1, 2, 3])])

    def test_kind_override_forces_raw(self):
        m = quantize_dataset([np.array([1.5, 2.5])], kinds=[KIND_FLOAT_RAW])
        assert m.params[0].kind == KIND_FLOAT_RAW

    def test_chunk_layout(self):
        m = quantize_dataset([np.array([5, 7, 5]), np.array([0, 1, 0])])
        assert m.chunk_width == sum(p.bit_width for p in m.params)
        owners = [m.column_of(pos) for pos in range(m.chunk_width)]
        assert owners == sorted(owners)
        assert set(owners) == {0, 1}
        # MSB first: for codes [0,2,0] with width 2, top bit is value>=2
        assert m.bit_column(0).tolist() == [0, 1, 0]
        assert m.bit_column(1).tolist() == [0, 0, 0]

    def test_determinism(self):
        rng = np.random.default_rng(3)
        table = random_table(rng)
        a = quantize_dataset(table)
        b = quantize_dataset(table)
        assert np.array_equal(a.codes, b.codes)
        assert a.params == b.params


class TestRoundTrip:
    def test_int_examples(self):
        for table in ([[5], [7], [5]], [[1.25], [3.50]]):
            arr = np.array(table, dtype=np.float64 if "." in str(table) else np.int64)
            m = quantize_dataset(arr)
            out = dequantize(m)
            for j in range(arr.shape[1]):
                assert bits_equal(out[j], arr[:, j].astype(out[j].dtype))

    def test_random_int_table_bit_exact(self):
        rng = np.random.default_rng(11)
        table = rng.integers(-(2**20), 2**20, size=(100, 4))
        m = quantize_dataset(table)
        out = dequantize(m)
        for j in range(4):
            assert bits_equal(out[j], table[:, j])

    @pytest.mark.parametrize("seed", range(6))
    def test_random_mixed_tables(self, seed):
        rng = np.random.default_rng(seed)
        table = random_table(rng)
        m = quantize_dataset(table)
        out = dequantize(m)
        for j, col in enumerate(table):
            expected = np.asarray(col)
            if np.issubdtype(expected.dtype, np.integer):
                assert np.array_equal(out[j], expected)
            else:
                assert bits_equal(out[j], expected.astype(np.float64))

    def test_float32_roundtrip(self):
        vals = np.array([1.25, -3.5, 0.125], dtype=np.float32)
        m = quantize_dataset([vals])
        assert m.params[0].original_precision == 32
        assert bits_equal(dequantize(m)[0], vals)

    def test_raw_float32_roundtrip(self):
        rng = np.random.default_rng(5)
        vals = rng.standard_normal(50).astype(np.float32)
        m = quantize_dataset([vals])
        assert m.params[0].kind == KIND_FLOAT_RAW
        assert bits_equal(dequantize(m)[0], vals)

    def test_int64_extremes(self):
        vals = np.array([np.iinfo(np.int64).min, 0, np.iinfo(np.int64).max])
        m = quantize_dataset([vals])
        assert np.array_equal(dequantize(m)[0], vals)

    def test_corrupt_width_detected(self):
        m = quantize_dataset([np.array([5, 7, 5])])
        m.codes[0, 0] = 9  # wider than the declared 2 bits
        with pytest.raises(IntegrityError):
            dequantize(m)


class TestBitStats:
    def test_half_probability_is_max_entropy(self):
        m = quantize_dataset([np.array([0, 1])])
        s = bit_stats(m)
        assert s.p[-1] == 0.5
        assert s.entropy[-1] == 1.0

    def test_constant_bit_zero_entropy(self):
        m = quantize_dataset([np.array([0, 0, 0])])
        s = bit_stats(m)
        assert s.entropy[0] == 0.0
        assert s.is_constant[0]

    def test_quarter_probability_matches_high_precision(self):
        m = quantize_dataset([np.array([1, 0, 0, 0])])
        s = bit_stats(m)
        assert s.p[-1] == 0.25
        mpmath.mp.dps = 40
        p = mpmath.mpf(1) / 4
        expected = float(-(p * mpmath.log(p, 2) + (1 - p) * mpmath.log(1 - p, 2)))
        assert abs(s.entropy[-1] - expected) <= 1e-12
        assert abs(s.entropy[-1] - 0.811278) <= 1e-6

    def test_counts_exact(self):
        rng = np.random.default_rng(2)
        table = [rng.integers(0, 16, 37)]
        m = quantize_dataset(table)
        s = bit_stats(m)
        for pos in range(m.chunk_width):
            ones = int(m.bit_column(pos).sum())
            assert s.ones[pos] == ones
            assert s.p[pos] == ones / m.n

    def test_entropy_bounds_and_symmetry(self):
        rng = np.random.default_rng(9)
        m = quantize_dataset([rng.integers(0, 2**10, 200), rng.normal(0, 1, 200)])
        s = bit_stats(m)
        assert np.all(s.entropy >= 0.0) and np.all(s.entropy <= 1.0)
        assert np.all((s.entropy == 0.0) == s.is_constant)
        # H(p) = H(1-p): flipping the bits leaves entropy unchanged
        for pos in range(m.chunk_width):
            p = s.p[pos]
            if 0 < p < 1:
                q = 1 - p
                h = -(q * np.log2(q) + (1 - q) * np.log2(1 - q))
                assert abs(h - s.entropy[pos]) < 1e-12

    def test_position_column_map(self):
        m = quantize_dataset([np.array([1, 2]), np.array([10, 20])])
        s = bit_stats(m)
        assert len(s.column) == m.chunk_width
        widths = [p.bit_width for p in m.params]
        assert np.array_equal(s.column, np.repeat([0, 1], widths))
