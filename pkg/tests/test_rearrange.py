from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from coarse_decomp.decomp.rearrange import cell_index, cell_of, rearrange, triangular
from coarse_decomp.errors import SequenceExhaustedError

R10 = tuple(range(1, 11))


@pytest.mark.parametrize("cell,expected", [((4, 1), 10), ((1, 1), 1), ((2, 3), 8)])
def test_cells(cell, expected):
    assert rearrange(R10).cell(*cell) == expected


def test_rows_and_columns():
    arr = rearrange(range(1, 26))
    assert arr.row(1)[:4] == [1, 2, 4, 7]
    assert arr.row(3)[:4] == [6, 9, 13, 18]
    assert arr.column(1) == [1, 3, 6, 10, 15, 21]
    assert arr.column_indices(2) == [2, 5, 9, 14, 20]


def test_exhausted_cell():
    with pytest.raises(SequenceExhaustedError):
        rearrange(R10).cell(1, 5)


def test_empty_rejected():
    with pytest.raises(ValueError):
        rearrange([])


def test_columns_available():
    # column j is available once R reaches its head T(j-1) + 1
    assert rearrange(range(1, 2)).n_columns == 1
    assert rearrange(range(1, 3)).n_columns == 2
    assert rearrange(range(1, 4)).n_columns == 2
    assert rearrange(range(1, 5)).n_columns == 3


@given(st.integers(1, 5000))
def test_cell_round_trip(n):
    assert cell_index(*cell_of(n)) == n


@given(st.integers(1, 70), st.integers(1, 70))
def test_index_round_trip(i, j):
    assert cell_of(cell_index(i, j)) == (i, j)


@given(st.integers(1, 300))
def test_bijection_onto_prefix(N):
    cells = rearrange(range(N)).cells
    assert len(cells) == N
    assert sorted(cells.values()) == list(range(N))
    # the first N cells in anti-diagonal order
    order = sorted(cells, key=lambda c: (c[0] + c[1], c[0]))
    assert [cell_index(*c) for c in order] == list(range(1, N + 1))


def test_triangular():
    assert [triangular(n) for n in range(5)] == [0, 1, 3, 6, 10]
