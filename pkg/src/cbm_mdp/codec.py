"""Mixed-radix state codec and factored successor expansion."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy import sparse


class MixedRadix:
    """Bijection between digit tuples and integers; the first digit is most significant.

    Digits are zero-based offsets into each variable's alphabet.
    """

    def __init__(self, radices: Sequence[int]):
        if any(r < 1 for r in radices):
            raise ValueError(f"radices must be >= 1, got {list(radices)}")
        self.radices = tuple(int(r) for r in radices)
        strides = [1] * len(self.radices)
        for i in range(len(self.radices) - 2, -1, -1):
            strides[i] = strides[i + 1] * self.radices[i + 1]
        self.strides = tuple(strides)
        size = 1
        for r in self.radices:
            size *= r
        self.size = size

    def encode(self, digits: Sequence[int]) -> int:
        if len(digits) != len(self.radices):
            raise ValueError(f"expected {len(self.radices)} digits, got {len(digits)}")
        idx = 0
        for pos, (x, r, st) in enumerate(zip(digits, self.radices, self.strides)):
            if not 0 <= x < r:
                raise ValueError(f"digit {pos} = {x} outside [0, {r})")
            idx += int(x) * st
        return idx

    def decode(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.size:
            raise IndexError(f"index {index} outside [0, {self.size})")
        return tuple((index // st) % r for r, st in zip(self.radices, self.strides))

    def decode_all(self) -> np.ndarray:
        """(size, ndigits) array of the digits of every index, in index order."""
        idx = np.arange(self.size, dtype=np.int64)
        cols = [(idx // st) % r for r, st in zip(self.radices, self.strides)]
        return np.stack(cols, axis=1) if cols else np.zeros((self.size, 0), dtype=np.int64)


# A factor maps the per-row parent digits (rows, ndigits of the current state)
# plus the per-row decision to a (rows, radix) probability table for one next digit.
Factor = Callable[[np.ndarray, np.ndarray], np.ndarray]


def expand_successors(
    codec: MixedRadix,
    state_digits: np.ndarray,
    decision_rows: np.ndarray,
    factors: Sequence[Factor],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sparse product distribution over next states for a batch of rows.

    ``factors[i]`` yields the distribution of next digit ``i``. Returns
    ``(row, successor, probability)`` triples with zero-probability outcomes
    dropped, sorted by row then ascending successor index. Probabilities are
    multiplied in factor order.
    """
    if len(factors) != len(codec.radices):
        raise ValueError("one factor per digit required")
    nrows = state_digits.shape[0]
    row = np.arange(nrows, dtype=np.int64)
    succ = np.zeros(nrows, dtype=np.int64)
    prob = np.ones(nrows)
    for pos, factor in enumerate(factors):
        table = np.asarray(factor(state_digits, decision_rows), dtype=float)
        if table.shape != (nrows, codec.radices[pos]):
            raise ValueError(f"factor {pos} returned shape {table.shape}")
        per = table[row]
        r_idx, digit = np.nonzero(per > 0.0)
        row = row[r_idx]
        prob = prob[r_idx] * per[r_idx, digit]
        succ = succ[r_idx] + digit * codec.strides[pos]
    order = np.lexsort((succ, row))
    return row[order], succ[order], prob[order]


def to_csr(row: np.ndarray, succ: np.ndarray, prob: np.ndarray, nrows: int, ncols: int) -> sparse.csr_matrix:
    indptr = np.zeros(nrows + 1, dtype=np.int64)
    np.add.at(indptr, row + 1, 1)
    np.cumsum(indptr, out=indptr)
    mat = sparse.csr_matrix((prob, succ, indptr), shape=(nrows, ncols))
    mat.has_sorted_indices = True
    return mat
