"""Row partition refinement under incremental base-bit selection.

The tree tracks, for a fixed QuantizedMatrix, which rows agree on every
selected bit position. Each add_bit/remove_last_bit costs O(n); the leaf
count after an add equals the number of distinct projections of the
chunks onto the selected bits.
"""

from __future__ import annotations

import numpy as np

from .bitmatrix import QuantizedMatrix


class BaseTree:
    """Partition of row indices by the values of the selected bits.

    Mutable, single-writer. Reads (leaf_count, leaves) are safe between
    mutations; distinct trees are independent.
    """

    def __init__(self, matrix: QuantizedMatrix):
        self.matrix = matrix
        self._labels = np.zeros(matrix.n, dtype=np.int64)
        self._n_b = 1
        self._selected: list[int] = []
        self._selected_set: set[int] = set()
        self._undo: list[tuple[np.ndarray, int] | None] = []

    @property
    def leaf_count(self) -> int:
        return self._n_b

    @property
    def selected_bits(self) -> tuple[int, ...]:
        return tuple(self._selected)

    @property
    def labels(self) -> np.ndarray:
        """Leaf id per row (do not mutate)."""
        return self._labels

    def add_bit(self, position: int) -> int:
        """Split every leaf by the bit at `position`; return the new leaf count."""
        position = int(position)
        if position in self._selected_set:
            raise ValueError(f"bit {position} already selected")
        if not 0 <= position < self.matrix.chunk_width:
            raise ValueError(f"bit {position} out of range [0, {self.matrix.chunk_width})")
        bits = self.matrix.bit_column(position)
        if self._n_b == self.matrix.n or not bits.any() or bits.all():
            # Nothing can split: all leaves are singletons, or the bit is constant.
            self._undo.append(None)
        else:
            combined = self._labels * 2 + bits
            occupied = np.zeros(2 * self._n_b, dtype=bool)
            occupied[combined] = True
            remap = np.cumsum(occupied) - 1
            parents = (np.flatnonzero(occupied) >> 1).astype(np.int64)
            self._undo.append((parents, self._n_b))
            self._labels = remap[combined]
            self._n_b = len(parents)
        self._selected.append(position)
        self._selected_set.add(position)
        return self._n_b

    def remove_last_bit(self) -> None:
        """Undo the most recent add_bit, merging the leaves it split."""
        if not self._selected:
            raise ValueError("no selected bits to remove")
        entry = self._undo.pop()
        position = self._selected.pop()
        self._selected_set.discard(position)
        if entry is not None:
            parents, old_n_b = entry
            self._labels = parents[self._labels]
            self._n_b = old_n_b

    def _grouped(self) -> tuple[list[np.ndarray], np.ndarray]:
        order = np.argsort(self._labels, kind="stable")
        sorted_labels = self._labels[order]
        cuts = np.flatnonzero(np.diff(sorted_labels)) + 1
        groups = np.split(order, cuts)
        reps = np.array([g[0] for g in groups], dtype=np.int64)
        return groups, reps

    def leaves(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(base bits, member rows) per leaf, lexicographic by base value.

        Base bits are the leaf's values at the selected positions in
        ascending position order; members are row indices in ascending
        order. Member arrays partition range(n).
        """
        groups, reps = self._grouped()
        positions = sorted(self._selected)
        if positions:
            rep_bits = np.stack([self.matrix.bit_column(p)[reps] for p in positions], axis=1)
            order = np.lexsort(tuple(rep_bits[:, k] for k in reversed(range(rep_bits.shape[1]))))
        else:
            rep_bits = np.zeros((len(groups), 0), dtype=np.uint8)
            order = np.arange(len(groups))
        return [(rep_bits[i], groups[i]) for i in order]

    def lexicographic_ids(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-row base ids in lexicographic base order, plus the base table.

        Returns (ids, base_bits) where ids[r] indexes base_bits and
        base_bits is (leaf_count, l_b) uint8 with columns in ascending
        selected-position order.
        """
        _, reps = self._grouped()
        positions = sorted(self._selected)
        if positions:
            rep_bits = np.stack([self.matrix.bit_column(p)[reps] for p in positions], axis=1)
            order = np.lexsort(tuple(rep_bits[:, k] for k in reversed(range(rep_bits.shape[1]))))
        else:
            rep_bits = np.zeros((self._n_b, 0), dtype=np.uint8)
            order = np.arange(self._n_b)
        rank = np.empty(self._n_b, dtype=np.int64)
        rank[order] = np.arange(self._n_b)
        return rank[self._labels], rep_bits[order]
