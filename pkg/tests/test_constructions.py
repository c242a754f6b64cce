from __future__ import annotations

import math
from fractions import Fraction

import pytest

import cases
import oracles
from coarse_decomp.decomp import (
    ControlFunction,
    MapFamily,
    Searcher,
    compose,
    composition_limit,
    limit_decompose,
    make_witness,
    plan_composition,
    product_decompose,
    pullback_witness,
    search_decomposition,
    union_decompose,
    verify_witness,
)
from coarse_decomp.errors import (
    ControlFunctionViolationError,
    ExcisionInsufficientError,
    PreconditionError,
    SequenceExhaustedError,
    SplitterViolationError,
    SupplierFailureError,
)
from coarse_decomp.metric import diameter
from coarse_decomp.spaces import build_cycle, build_graph_metric, build_grid_box, build_path


def oracle_ok(w, D2):
    return oracles.check_witness(D2, oracles.witness_lists(w), w.R, w.piece_bound,
                                 list(w.source.members)) == []


class TestCompose:
    def test_plan_sorts_columns(self):
        R = (5, 9, 1, 9, 9, 2)
        plans = plan_composition(R, Searcher("greedy"), build_path(4), 2)
        assert plans[0].indices == (3, 6, 1) and plans[0].values == (1, 2, 5)
        assert plans[0].top == 5
        assert plans[1].indices == (2, 5)

    def test_trivial_outer_reindexes_inner(self):
        X = build_path(20)
        R = (2, 2, 2)
        w = cases.trivial_outer_compose(X, R)
        inner = cases.GREEDY2(X.whole, (2, 2))
        # column 1 holds R_1 and R_3: inner families land there, R_2 is padding
        assert oracles.witness_lists(w)[0] == oracles.witness_lists(inner)[0]
        assert oracles.witness_lists(w)[2] == oracles.witness_lists(inner)[1]
        assert w.padding == (1,) and w.family_count == 2
        assert verify_witness(w).ok

    def test_grid_line(self, oracle_tables):
        X = build_grid_box(1, 64)
        w = cases.composed(X, (2, 2, 2, 2))
        assert verify_witness(w).ok
        assert oracle_ok(w, oracle_tables("grid1d-64"))
        assert w.family_count <= composition_limit(w) == 4

    def test_piece_bound_from_inner(self):
        X = build_grid_box(1, 64)
        w = cases.composed(X, (2, 2, 2, 2))
        inner_bounds = []
        for fam in search_decomposition(X, (2, 2), "shifted-brick").families:
            for p in fam.pieces:
                inner_bounds.append(cases.BRICK(p, (2, 2)).piece_bound)
        assert w.piece_bound <= max(inner_bounds)

    def test_outer_must_be_disjoint(self):
        X = build_path(12)
        outer = search_decomposition(X, (1, 1), "shifted-brick")  # 1-disjoint only
        with pytest.raises(PreconditionError):
            compose(outer, cases.BRICK, (4, 4, 4, 4))

    def test_supplier_failure(self):
        X = build_path(12)
        outer = search_decomposition(X, (1,), "trivial")

        def broken(piece, scales):
            raise RuntimeError("no")

        with pytest.raises(SupplierFailureError):
            compose(outer, broken, (1, 1, 1))

    def test_supplier_wrong_source(self):
        X = build_path(12)
        outer = search_decomposition(X, (1,), "trivial")
        with pytest.raises(SupplierFailureError):
            compose(outer, lambda piece, s: search_decomposition(X.subspace([0]), s, "trivial"), (1,))

    def test_supplier_invalid_witness(self):
        X = build_path(12)
        outer = search_decomposition(X, (1,), "trivial")
        bad = lambda piece, s: make_witness(piece, [[X.subspace([0])]], s)  # noqa: E731
        with pytest.raises(SupplierFailureError):
            compose(outer, bad, (1,))

    def test_columns_exhausted(self):
        X = build_grid_box(2, 8)
        outer = search_decomposition(X, (1, 1, 1), "shifted-brick")
        with pytest.raises(SequenceExhaustedError):
            compose(outer, cases.BRICK, (1, 1, 1))


class TestProduct:
    def test_lines(self):
        w, D2 = cases.product_case()
        assert verify_witness(w).ok and oracle_ok(w, D2)
        assert w.family_count <= composition_limit(w)

    def test_point_factor(self):
        X = build_grid_box(1, 20)
        pt = build_graph_metric([], nodes=[0])
        R = (2, 2, 2)
        w = product_decompose(X, pt, R, cases.BRICK, Searcher("trivial"))
        direct = cases.BRICK(X.whole, (2, 2))
        assert verify_witness(w).ok
        assert [sorted(f) for f in oracles.witness_lists(w) if f] == \
            [sorted(f) for f in oracles.witness_lists(direct)]

    def test_piece_diameter_formula(self):
        w, D2 = cases.product_case()
        for p in list(w.pieces())[:20]:
            xs = sorted({m // 16 for m in p.members})
            ys = sorted({m % 16 for m in p.members})
            expected = math.hypot(xs[-1] - xs[0], ys[-1] - ys[0])
            assert math.isclose(float(diameter(p)), expected)


class TestUnion:
    def test_overlap(self):
        w, D2 = cases.overlap_union()
        assert verify_witness(w).ok and oracle_ok(w, D2)
        assert len(w.families[1].pieces) == 1

    def test_empty_excision(self):
        X = build_path(30)
        parts = [X.subspace(range(0, 10)), X.subspace(range(20, 30))]
        w = union_decompose(parts, lambda r: None, (3, 3))
        assert verify_witness(w).ok
        assert w.families[1].pieces == () and w.padding == (1,)

    def test_whole_excised(self):
        X = build_path(30)
        w = union_decompose([X.whole], lambda r: range(30), (3, 3))
        assert w.families[0].pieces == ()
        assert w.families[1].pieces[0].members == tuple(range(30))
        assert verify_witness(w).ok

    def test_insufficient(self):
        X = build_path(30)
        parts = [X.subspace(range(0, 16)), X.subspace(range(14, 30))]
        with pytest.raises(ExcisionInsufficientError):
            union_decompose(parts, lambda r: [15], (3, 3))

    def test_needs_second_entry(self):
        X = build_path(30)
        with pytest.raises(SequenceExhaustedError):
            union_decompose([X.whole], lambda r: [0], (3,))


class TestPullback:
    def test_identity_preserves(self):
        X = build_cycle(16)
        w = search_decomposition(X, (2, 2), "greedy")
        p = pullback_witness(cases.identity_family(X), w, w.R)
        assert oracles.witness_lists(p) == oracles.witness_lists(w)
        assert p.R == w.R and p.piece_bound == w.piece_bound

    def test_dilation(self):
        w, D2 = cases.dilation_pullback()
        assert verify_witness(w).ok and oracle_ok(w, D2)
        assert Fraction(w.provenance[-1]["bprime"]) * 2 >= w.piece_bound

    def test_bounded_pieces_linear_rho1(self):
        A, B, F = cases.dilation()
        half = MapFamily(F.maps, ControlFunction.linear(2), ControlFunction.linear(Fraction(1, 2)))
        wB = search_decomposition(B, (6, 6), "shifted-brick")
        w = pullback_witness(half, wB, (3, 3))
        assert w.piece_bound <= 2 * wB.piece_bound
        assert Fraction(w.provenance[-1]["bprime"]) == 2 * wB.piece_bound

    def test_control_violation(self):
        A, B, F = cases.dilation()
        wrong = MapFamily(F.maps, ControlFunction.identity())
        wB = search_decomposition(B, (3, 3), "shifted-brick")
        with pytest.raises(ControlFunctionViolationError):
            pullback_witness(wrong, wB, (3, 3))

    def test_needs_rho2_scales(self):
        A, B, F = cases.dilation()
        wB = search_decomposition(B, (3, 3), "shifted-brick")  # not 6-disjoint
        with pytest.raises(PreconditionError):
            pullback_witness(F, wB, (3, 3))

    def test_wrong_codomain(self):
        A, B, F = cases.dilation()
        with pytest.raises(PreconditionError):
            pullback_witness(F, search_decomposition(A, (6, 6), "shifted-brick"), (3, 3))


class TestFiber:
    def test_projection(self):
        w, D2 = cases.projection_fiber()
        assert verify_witness(w).ok and oracle_ok(w, D2)
        assert w.depth == 2

    def test_identity_map(self):
        from coarse_decomp.decomp import fiber_compose, fiber_plan

        X = build_path(24)
        F = cases.identity_family(X)
        R = (2, 2, 2, 2)
        _, S = fiber_plan(R, Searcher("trivial"), F, 2)
        wY = cases.BRICK(X.whole, S)
        w = fiber_compose(F, wY, Searcher("trivial"), R)
        assert verify_witness(w).ok
        assert sorted(map(sorted, (p for f in oracles.witness_lists(w) for p in f))) == \
            sorted(map(sorted, (p for f in oracles.witness_lists(wY) for p in f)))


class TestLimit:
    def test_runs(self):
        w, D2 = cases.limit_case()
        assert verify_witness(w).ok and oracle_ok(w, D2)
        assert w.k == 1 and len(w.families[0].pieces) == 3

    def test_whole(self):
        X = build_path(9)
        w = limit_decompose(X, lambda r: [X.whole], (4,))
        assert verify_witness(w).ok and w.piece_bound == 8

    @pytest.mark.parametrize("pieces", [
        [list(range(0, 6)), list(range(5, 10))],  # overlap
        [list(range(0, 5)), list(range(5, 9))],  # misses a point
        [list(range(0, 5)), list(range(5, 10))],  # too close
    ])
    def test_violations(self, pieces):
        X = build_path(10)
        with pytest.raises(SplitterViolationError):
            limit_decompose(X, lambda r: pieces, (2,))
