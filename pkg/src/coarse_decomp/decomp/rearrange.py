"""Anti-diagonal rearrangement of a sequence into a two-dimensional array.

Cell (i, j) (both 1-based) holds ``R[T(i + j - 2) + i]`` with
``T(n) = n (n + 1) / 2``; row 1 reads R1, R2, R4, R7, ... and column 1
reads R1, R3, R6, R10, ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import SequenceExhaustedError


def triangular(n: int) -> int:
    return n * (n + 1) // 2


def cell_index(i: int, j: int) -> int:
    if i < 1 or j < 1:
        raise ValueError("cells are 1-based")
    return triangular(i + j - 2) + i


def cell_of(n: int) -> tuple[int, int]:
    """Inverse of ``cell_index``."""
    if n < 1:
        raise ValueError("indices are 1-based")
    s = (math.isqrt(8 * n) - 1) // 2
    while triangular(s) >= n:
        s -= 1
    while triangular(s + 1) < n:
        s += 1
    i = n - triangular(s)
    return i, s + 2 - i


@dataclass(frozen=True)
class RearrangedArray:
    R: tuple

    def __post_init__(self):
        if not self.R:
            raise ValueError("cannot rearrange an empty sequence")
        object.__setattr__(self, "R", tuple(self.R))

    def index(self, i: int, j: int) -> int:
        n = cell_index(i, j)
        if n > len(self.R):
            raise SequenceExhaustedError(f"cell ({i},{j}) needs R_{n}; only {len(self.R)} given")
        return n

    def cell(self, i: int, j: int):
        return self.R[self.index(i, j) - 1]

    @property
    def cells(self) -> dict:
        return {cell_of(n): self.R[n - 1] for n in range(1, len(self.R) + 1)}

    @property
    def n_columns(self) -> int:
        j = 1
        while triangular(j) + 1 <= len(self.R):
            j += 1
        return j

    def column_indices(self, j: int) -> list[int]:
        """Original (1-based) indices of the available prefix of column j."""
        out = []
        i = 1
        while cell_index(i, j) <= len(self.R):
            out.append(cell_index(i, j))
            i += 1
        return out

    def column(self, j: int) -> list:
        return [self.R[n - 1] for n in self.column_indices(j)]

    def row(self, i: int) -> list:
        out = []
        j = 1
        while cell_index(i, j) <= len(self.R):
            out.append(self.R[cell_index(i, j) - 1])
            j += 1
        return out


def rearrange(R) -> RearrangedArray:
    return RearrangedArray(tuple(R))
