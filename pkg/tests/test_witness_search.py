from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from coarse_decomp.decomp import (
    DecompositionRequest,
    Searcher,
    make_witness,
    search_decomposition,
    search_uniform,
    verify_witness,
)
from coarse_decomp.errors import NotFoundError, PreconditionError, SequenceExhaustedError
from coarse_decomp.spaces import build_cycle, build_graph_metric, build_grid_box, build_path


def oracle_ok(w, D2, R=None):
    R = w.R if R is None else R
    return oracles.check_witness(D2, oracles.witness_lists(w), R, w.piece_bound,
                                 list(w.source.members)) == []


class TestRequest:
    def test_positive(self):
        with pytest.raises(ValueError):
            DecompositionRequest((1, 0))

    def test_exhausted_entry(self):
        with pytest.raises(SequenceExhaustedError):
            DecompositionRequest((1, 2)).entry(3)

    def test_scalar(self):
        assert DecompositionRequest(3).R == (3,)


class TestVerifier:
    def test_singletons_discrete(self):
        X = build_graph_metric([(0, 1, 5), (1, 2, 5)])
        w = make_witness(X.whole, [[X.subspace([i]) for i in range(3)]], [4])
        v = verify_witness(w)
        assert v.ok and w.piece_bound == 0

    def test_singletons_too_close(self):
        X = build_path(4)
        w = make_witness(X.whole, [[X.subspace([i]) for i in range(4)]], [1])
        v = verify_witness(w)
        assert not v.ok and len(v.disjointness) == 3

    def test_brick_on_path(self):
        w = search_decomposition(build_path(64), [5], "shifted-brick")
        assert verify_witness(w).ok and w.piece_bound == 4

    def test_drop_piece_reports_its_points(self):
        X = build_path(64)
        w = search_decomposition(X, [5], "shifted-brick")
        for f in range(w.k):
            for j in (0, len(w.families[f].pieces) - 1):
                dropped = w.families[f].pieces[j]
                fams = [list(fam.pieces) for fam in w.families]
                del fams[f][j]
                # a point is reported iff no surviving piece holds it
                still = {m for fam in fams for p in fam for m in p.members}
                expected = sorted(set(dropped.members) - still)
                v = verify_witness(make_witness(X.whole, fams, w.R))
                assert v.uncovered == expected
                assert expected == list(dropped.members)

    def test_target_bound_reported(self):
        X = build_path(10)
        w = search_decomposition(X, [2], "trivial")
        assert not verify_witness(w, DecompositionRequest((2,), target_bound=3)).ok

    def test_too_many_families(self):
        X = build_path(10)
        w = search_decomposition(X, [1, 1], "shifted-brick")
        assert not verify_witness(w, [1]).ok


class TestSearch:
    def test_interval_brick(self):
        w = search_decomposition(build_grid_box(1, 64), [5], "shifted-brick")
        first = [list(p.members) for p in w.families[0].pieces[:2]]
        second = [list(p.members) for p in w.families[1].pieces[:2]]
        assert first == [list(range(0, 5)), list(range(10, 15))]
        assert second == [list(range(5, 10)), list(range(15, 20))]

    @pytest.mark.parametrize("strategy", ["greedy", "exhaustive", "shifted-brick", "trivial"])
    def test_single_point(self, strategy):
        X = build_graph_metric([], nodes=["p"])
        w = search_decomposition(X, [7, 7], strategy)
        assert w.k == 1 and w.families[0].pieces[0].members == (0,)

    def test_brick_2d(self):
        X = build_grid_box(2, 16)
        w = search_decomposition(X, [3, 3, 3], "shifted-brick")
        assert w.k == 3 and verify_witness(w).ok
        assert oracle_ok(w, oracles.grid_sq(X.labels, "l1"))

    def test_brick_side_bound(self):
        # cubes of side <= 2 (n + 1) ceil(r)
        for dim, r in [(1, 3), (2, 2), (2, Fraction(5, 2)), (3, 1)]:
            X = build_grid_box(dim, 12)
            w = search_decomposition(X, [r], "shifted-brick")
            assert w.k == dim + 1 and verify_witness(w).ok
            coords = np.asarray(X.labels).reshape(len(X), -1)
            for p in w.pieces():
                c = coords[list(p.members)]
                side = int((c.max(axis=0) - c.min(axis=0)).max()) + 1
                assert side <= 2 * (dim + 1) * -(-r // 1)

    def test_brick_needs_lattice(self):
        with pytest.raises(PreconditionError):
            search_decomposition(build_cycle(10), [2, 2], "shifted-brick")

    def test_brick_needs_entries(self):
        with pytest.raises(SequenceExhaustedError):
            search_decomposition(build_grid_box(2, 8), [2, 2], "shifted-brick")

    def test_exhaustive_limit(self):
        with pytest.raises(PreconditionError):
            search_decomposition(build_path(30), [1, 1], "exhaustive")

    def test_target_not_met(self):
        with pytest.raises(NotFoundError):
            search_decomposition(build_cycle(16), DecompositionRequest((3,), target_bound=2), "greedy")

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            search_decomposition(build_path(4), [1], "magic")

    def test_deterministic(self):
        X = build_cycle(16)
        a = search_decomposition(X, [2, 2], "greedy")
        b = search_decomposition(X, [2, 2], "greedy")
        assert oracles.witness_lists(a) == oracles.witness_lists(b)

    def test_corpus(self, spaces, oracle_tables):
        for name, X in spaces.items():
            strategies = ["greedy"]
            if X.metric.grid_coords is not None:
                strategies.append("shifted-brick")
            dim = 1 if X.metric.grid_coords is None else X.metric.grid_coords.shape[1]
            req = [3] * (dim + 1)
            for s in strategies:
                w = search_decomposition(X, req, s)
                assert verify_witness(w).ok, (name, s)
                D2 = oracle_tables(name)
                if D2 is not None:
                    assert oracle_ok(w, D2), (name, s)

    def test_uniform(self):
        res = search_uniform([build_path(n) for n in (8, 16, 32)], [2, 2], "greedy")
        assert res.k == max(res.member_k)
        assert all(verify_witness(w).ok for w in res.witnesses)
        assert res.piece_bound == max(w.piece_bound for w in res.witnesses)

    def test_searcher_family_count(self):
        X = build_grid_box(2, 8)
        s = Searcher("shifted-brick")
        assert s.family_count(X, 5) == 3
        assert s.family_count(X, 2) == 1
        assert Searcher("greedy", max_families=2).family_count(X, 5) == 2


def brute_optimum(D2, R):
    """Minimum over colourings of the largest component diameter (squared)."""
    n, k = len(D2), len(R)
    best = None
    for colouring in itertools.product(range(k), repeat=n):
        worst = 0
        for c in range(k):
            pts = [i for i in range(n) if colouring[i] == c]
            seen = set()
            for p in pts:
                if p in seen:
                    continue
                comp, stack = {p}, [p]
                while stack:
                    y = stack.pop()
                    for z in pts:
                        if z not in comp and D2[y, z] <= R[c] ** 2:
                            comp.add(z)
                            stack.append(z)
                seen |= comp
                worst = max(worst, int(D2[np.ix_(list(comp), list(comp))].max()))
        best = worst if best is None else min(best, worst)
    return best


@pytest.mark.parametrize("X,D2,R", [
    (build_path(8), oracles.path_sq(8), (1, 1)),
    (build_cycle(8), oracles.cycle_sq(8), (1, 2)),
    (build_cycle(9), oracles.cycle_sq(9), (2, 2)),
    (build_grid_box(2, 3), oracles.grid_sq(build_grid_box(2, 3).labels, "l1"), (1, 1)),
])
def test_exhaustive_is_optimal(X, D2, R):
    w = search_decomposition(X, list(R), "exhaustive")
    assert verify_witness(w).ok and oracle_ok(w, D2)
    assert w.piece_bound ** 2 == brute_optimum(D2, R)
    greedy = search_decomposition(X, list(R), "greedy")
    assert w.piece_bound <= greedy.piece_bound


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 40), st.lists(st.integers(1, 6), min_size=1, max_size=3), st.data())
def test_monotone_in_R(n, R, data):
    X = build_path(n)
    w = search_decomposition(X, R, "greedy")
    assert verify_witness(w).ok
    smaller = [data.draw(st.fractions(Fraction(1, 3), r, max_denominator=3)) for r in w.R]
    assert verify_witness(w, smaller).ok
    assert oracle_ok(w, oracles.path_sq(n), smaller)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 30), st.integers(1, 5))
def test_greedy_cycle_matches_oracle(n, r):
    X = build_cycle(n)
    w = search_decomposition(X, [r, r], "greedy")
    assert verify_witness(w).ok == oracle_ok(w, oracles.cycle_sq(n)) is True
