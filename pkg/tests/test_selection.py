import numpy as np
import pytest

from entrogd import (
    BitSelection,
    SizeModel,
    bit_stats,
    compressed_size,
    generate_condensed_samples,
    greedy_select_bits,
    id_bits,
    quantize_dataset,
    select_compression_bits,
    weight_bits,
)

from conftest import brute_force_partition, int_matrix, multi_matrix, random_table


def eq4(n, m, n_b, l_b, l_d, s_params=0):
    l_w = 1 if n <= 1 else int(np.ceil(np.log2(n)))
    l_id = 0 if n_b <= 1 else int(np.ceil(np.log2(n_b)))
    return n_b * l_b + (n + m) * (l_d + l_id) + m * l_w + s_params


def brute_size(matrix, positions, n, m):
    n_b = len(brute_force_partition(matrix, positions))
    l_b = len(positions)
    return eq4(n, m, n_b, l_b, matrix.chunk_width - l_b)


class TestSizeModel:
    def test_worked_example(self):
        model = SizeModel(n=100, m=4, n_b=4, l_b=10, l_d=22)
        assert model.l_w == 7 and model.l_id == 2
        assert compressed_size(model) == 2564

    def test_single_base_all_bits(self):
        model = SizeModel(n=10, m=0, n_b=1, l_b=24, l_d=0)
        assert compressed_size(model) == 24

    def test_no_base_degenerate(self):
        n, m, l_c = 50, 3, 12
        model = SizeModel(n=n, m=m, n_b=1, l_b=0, l_d=l_c)
        assert compressed_size(model) == (n + m) * l_c + m * model.l_w

    def test_degenerate_widths(self):
        assert weight_bits(1) == 1
        assert weight_bits(2) == 1
        assert weight_bits(100) == 7
        assert id_bits(1) == 0
        assert id_bits(2) == 1
        assert id_bits(9) == 4

    def test_matches_ceil_log2(self):
        for x in range(2, 600):
            assert weight_bits(x) == int(np.ceil(np.log2(x)))
            assert id_bits(x) == int(np.ceil(np.log2(x)))


class TestBitSelection:
    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            BitSelection((1, 1), 4)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            BitSelection((4,), 4)

    def test_widths_partition(self):
        sel = BitSelection((0, 3), 5)
        assert sel.l_b + sel.l_d == 5
        assert sel.unselected == (1, 2, 4)


class TestCondensedSamples:
    def test_msb_grouping_example(self):
        # 4-bit values {8,9,10,2,3}: constant bit 1, then the MSB reaches m_max=2
        matrix = int_matrix([8, 9, 10, 2, 3], width=4)
        css = generate_condensed_samples(matrix, m_max=2)
        assert css.m == 2
        order = np.argsort(css.samples[:, 0])
        assert css.samples[order, 0].tolist() == [2.5, 9.0]
        assert css.weights[order].tolist() == [2, 3]
        assert css.weights.sum() == 5

    def test_all_constant_dataset(self):
        matrix = int_matrix([5, 5, 5, 5], width=3)
        css = generate_condensed_samples(matrix, m_max=10)
        assert css.m == 1
        assert css.samples[0, 0] == 5.0
        assert css.weights[0] == 4

    def test_distinct_rows_with_multiplicities(self):
        values = [3, 1, 3, 7, 1, 3, 7, 7, 7]
        matrix = int_matrix(values, width=3)
        css = generate_condensed_samples(matrix, m_max=100)
        counts = {}
        for v in values:
            counts[v] = counts.get(v, 0) + 1
        assert css.m == len(counts)
        got = {float(s): int(w) for s, w in zip(css.samples[:, 0], css.weights)}
        assert got == {float(v): c for v, c in counts.items()}

    def test_rejects_bad_m_max(self):
        with pytest.raises(ValueError):
            generate_condensed_samples(int_matrix([1, 2]), m_max=0)

    def test_weights_always_sum_to_n(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            table = random_table(rng, allow_raw=False)
            matrix = quantize_dataset(table)
            for m_max in (1, 4, 64):
                css = generate_condensed_samples(matrix, m_max=m_max)
                assert int(css.weights.sum()) == matrix.n

    def test_mass_conservation(self):
        rng = np.random.default_rng(21)
        table = random_table(rng, n=300, d=3, allow_raw=False)
        matrix = quantize_dataset(table)
        css = generate_condensed_samples(matrix, m_max=16)
        for j, col in enumerate(table):
            total = float(np.sum(np.asarray(col, dtype=np.float64)))
            condensed = float(np.sum(css.weights * css.samples[:, j]))
            quantum = matrix.params[j].quantum
            assert abs(condensed - total) <= 0.5 * quantum * matrix.n

    def test_exact_sums_in_quantized_domain(self):
        rng = np.random.default_rng(33)
        values = rng.integers(0, 2**10, 500)
        matrix = int_matrix(values, width=10)
        css = generate_condensed_samples(matrix, m_max=8)
        groups = brute_force_partition(matrix, css.analytic_bits.positions)
        expected_sums = sorted(int(np.sum(values[list(g)])) for g in groups.values())
        got_sums = sorted(
            int(round(float(w) * float(s))) for w, s in zip(css.weights, css.samples[:, 0])
        )
        assert got_sums == expected_sums

    def test_requantized_rows_are_half_even_means(self):
        matrix = int_matrix([0, 1, 2, 5], width=3)
        css = generate_condensed_samples(matrix, m_max=1, exact_truncation=True)
        # merged single sample: mean = 2 exactly
        assert css.m == 1
        assert css.quantized_rows[0, 0] == 2
        matrix = int_matrix([1, 2], width=2)
        css = generate_condensed_samples(matrix, m_max=1, exact_truncation=True)
        # mean 1.5 rounds half-even to 2
        assert css.m == 1
        assert css.quantized_rows[0, 0] == 2
        matrix = int_matrix([0, 1, 1, 1, 2, 5], width=3)
        css = generate_condensed_samples(matrix, m_max=1, exact_truncation=True)
        # mean 10/6 rounds to 2
        assert css.quantized_rows[0, 0] == 2
        # half-even ties toward the even integer
        matrix = int_matrix([2, 3], width=2)
        css = generate_condensed_samples(matrix, m_max=1, exact_truncation=True)
        assert css.quantized_rows[0, 0] == 2  # 2.5 -> 2

    def test_m_max_stopping_contract(self):
        for seed in range(8):
            rng = np.random.default_rng(100 + seed)
            values = rng.integers(0, 2**12, 400)
            matrix = int_matrix(values, width=12)
            m_max = int(rng.integers(2, 60))
            css = generate_condensed_samples(matrix, m_max=m_max)
            if css.selection_trace:
                before_last = (
                    css.selection_trace[-2][1]
                    if len(css.selection_trace) > 1
                    else css.initial_count
                )
                assert before_last < m_max
                assert css.selection_trace[-1][1] >= before_last

    def test_exact_truncation(self):
        rng = np.random.default_rng(55)
        values = rng.integers(0, 2**12, 600)
        matrix = int_matrix(values, width=12)
        m_max = 10
        css = generate_condensed_samples(matrix, m_max=m_max, exact_truncation=True)
        distinct = len(np.unique(values))
        assert css.m == min(m_max, distinct)
        assert int(css.weights.sum()) == matrix.n
        total = float(np.sum(values))
        condensed = float(np.sum(css.weights * css.samples[:, 0]))
        assert abs(condensed - total) <= 0.5 * matrix.n

    def test_exact_truncation_fewer_distinct_than_budget(self):
        matrix = int_matrix([1, 1, 2, 2, 3], width=2)
        css = generate_condensed_samples(matrix, m_max=50, exact_truncation=True)
        assert css.m == 3
        assert int(css.weights.sum()) == 5

    def test_importance_reorders_dimensions(self):
        rng = np.random.default_rng(3)
        cols = [rng.integers(0, 2**6, 100), rng.integers(0, 2**6, 100)]
        matrix = multi_matrix(cols, [6, 6])
        css = generate_condensed_samples(matrix, m_max=3, importance=[0.1, 5.0])
        first_pos = css.selection_trace[0][0]
        assert matrix.column_of(first_pos) == 1
        css_default = generate_condensed_samples(matrix, m_max=3)
        assert matrix.column_of(css_default.selection_trace[0][0]) == 0


class TestEntropySelection:
    def coin_matrix(self, seed=0, n=256, width=6, constant_bit=2):
        rng = np.random.default_rng(seed)
        codes = rng.integers(0, 2**width, n).astype(np.uint64)
        mask = ~np.uint64(1 << (width - 1 - constant_bit))
        return int_matrix(codes & mask, width=width)

    def test_constant_bit_kept_and_size_never_worse(self):
        matrix = self.coin_matrix()
        stats = bit_stats(matrix)
        selection, trace = select_compression_bits(matrix, stats, m=0)
        assert 2 in selection.positions
        constant_only = brute_size(matrix, [2], matrix.n, 0)
        assert trace.best_size <= constant_only
        # every trace entry's size matches an independent evaluation
        chosen = [2]
        for entry in trace.entries:
            chosen.append(entry.position)
            assert entry.size_bits == brute_size(matrix, chosen, matrix.n, 0)

    def test_identical_rows_all_bits_selected(self):
        matrix = int_matrix([9] * 40, width=5)
        stats = bit_stats(matrix)
        selection, trace = select_compression_bits(matrix, stats, m=0)
        assert set(selection.positions) == set(range(5))
        assert trace.best_size == 5  # one base, zero-width deviations
        assert trace.entries == []

    def test_tau_one_stops_after_first_failure(self):
        matrix = self.coin_matrix(seed=5)
        stats = bit_stats(matrix)
        selection, trace = select_compression_bits(matrix, stats, m=0, tau=1)
        assert selection.positions == (2,)
        assert len(trace.entries) == 1
        assert not trace.entries[0].improved

    def test_trace_entropy_non_decreasing(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            table = random_table(rng, n=200, allow_raw=False)
            matrix = quantize_dataset(table)
            stats = bit_stats(matrix)
            _, trace = select_compression_bits(matrix, stats, m=0)
            entropies = [e.entropy for e in trace.entries]
            assert all(a <= b + 1e-15 for a, b in zip(entropies, entropies[1:]))

    def test_best_size_matches_size_model(self):
        rng = np.random.default_rng(44)
        table = random_table(rng, n=300, d=2, allow_raw=False)
        matrix = quantize_dataset(table)
        stats = bit_stats(matrix)
        selection, trace = select_compression_bits(matrix, stats, m=0)
        n_b = len(brute_force_partition(matrix, selection.positions))
        model = SizeModel(n=matrix.n, m=0, n_b=n_b, l_b=selection.l_b, l_d=selection.l_d)
        assert trace.best_size == compressed_size(model)

    def test_tau_must_be_positive(self):
        matrix = int_matrix([1, 2], width=2)
        with pytest.raises(ValueError):
            select_compression_bits(matrix, bit_stats(matrix), m=0, tau=0)

    def test_extended_rows_with_original_stats(self):
        # bit constant in the original rows flips in an appended mean row
        original = int_matrix([1, 3, 1, 3], width=2)
        stats = bit_stats(original)
        assert stats.is_constant[1]  # LSB always 1 in the original rows
        extended = original.with_rows_appended(np.array([[2]], dtype=np.uint64))
        selection, trace = select_compression_bits(extended, stats, m=1)
        seen = [e.position for e in trace.entries]
        assert seen[0] == 1  # zero-entropy bit iterated first despite the flip
        for entry in trace.entries:
            prefix = seen[: seen.index(entry.position) + 1]
            assert entry.leaf_count == len(brute_force_partition(extended, prefix))


class TestGreedySelection:
    def test_all_constant_selects_everything(self):
        matrix = int_matrix([13] * 30, width=4)
        selection, trace = greedy_select_bits(matrix)
        assert set(selection.positions) == set(range(4))
        assert trace.best_size == 4

    def test_single_column_matches_entropy_selection(self):
        # concentrated values: bit probability falls with significance, so
        # ascending entropy equals prefix order and both searches agree
        rng = np.random.default_rng(10)
        values = np.minimum(rng.geometric(0.25, 400) - 1, 255)
        matrix = int_matrix(values, width=8)
        stats = bit_stats(matrix)
        probs = stats.p
        assert all(probs[i] <= probs[i + 1] + 1e-12 for i in range(7))
        entropy_sel, entropy_trace = select_compression_bits(matrix, stats, m=0)
        greedy_sel, greedy_trace = greedy_select_bits(matrix)
        assert set(entropy_sel.positions) == set(greedy_sel.positions)
        assert entropy_trace.best_size == greedy_trace.best_size

    def test_two_column_prefix_oracle(self):
        rng = np.random.default_rng(99)
        cols = [
            np.minimum(rng.geometric(0.3, 256) - 1, 255),
            np.minimum(rng.geometric(0.15, 256) - 1, 255),
        ]
        matrix = multi_matrix(cols, [8, 8])
        selection, trace = greedy_select_bits(matrix)
        # greedy always holds a per-column prefix
        chosen = set(selection.positions)
        for j, start in enumerate(matrix.column_starts):
            width = matrix.widths[j]
            in_col = sorted(p - start for p in chosen if start <= p < start + width)
            assert in_col == list(range(len(in_col)))
        # exhaustive search over all prefix pairs
        best = None
        for p1 in range(9):
            for p2 in range(9):
                positions = list(range(p1)) + list(range(8, 8 + p2))
                size = brute_size(matrix, positions, matrix.n, 0)
                best = size if best is None else min(best, size)
        assert trace.best_size == brute_size(matrix, sorted(chosen), matrix.n, 0)
        assert trace.best_size >= best
        # a greedy prefix search on this shape should land on the optimum
        assert trace.best_size == best

    def test_size_trace_is_internally_consistent(self):
        rng = np.random.default_rng(6)
        table = random_table(rng, n=150, d=2, allow_raw=False)
        matrix = quantize_dataset(table)
        selection, trace = greedy_select_bits(matrix)
        if trace.entries:
            assert trace.best_size == min(trace.initial_size, min(e.size_bits for e in trace.entries))
