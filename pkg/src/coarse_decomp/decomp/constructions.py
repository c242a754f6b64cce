"""Constructive transformations of decomposition witnesses.

Each function returns a fresh witness whose families are built exactly as
the corresponding permanence argument prescribes; the caller is expected to
run ``verify_witness`` on the result (the tests do so for every case).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import (
    ExcisionInsufficientError,
    PreconditionError,
    SequenceExhaustedError,
    SplitterViolationError,
    SupplierFailureError,
)
from ..metric import FiniteMetricSpace, Subspace, SubspaceFamily, cross_violations
from ..spaces import build_product
from .control import MapFamily, PointMap, check_controls
from .rearrange import rearrange
from .witness import DecompositionWitness, as_request, make_witness, verify_witness

Supplier = Callable[[Subspace, tuple], DecompositionWitness]


def _source(X) -> Subspace:
    return X.whole if isinstance(X, FiniteMetricSpace) else X


def _family_count(supplier, space: FiniteMetricSpace, available: int) -> int:
    fc = getattr(supplier, "family_count", None)
    return fc(space, available) if fc is not None else available


# --------------------------------------------------------------------------
# composition


@dataclass(frozen=True)
class ColumnPlan:
    """Consumed prefix of one column of the rearranged sequence, sorted ascending."""

    column: int
    indices: tuple  # original 1-based indices, in sorted order of value
    values: tuple  # the matching entries of R, ascending

    @property
    def k(self) -> int:
        return len(self.values)

    @property
    def top(self):
        return self.values[-1]


def plan_composition(req, supplier, space: FiniteMetricSpace, k: int) -> list[ColumnPlan]:
    """Columns 1..k of the rearrangement, each cut to what ``supplier`` consumes."""
    req = as_request(req)
    arr = rearrange(req.R)
    if k > arr.n_columns:
        raise SequenceExhaustedError(f"{k} columns needed, R of length {len(req.R)} fills {arr.n_columns}")
    plans = []
    for j in range(1, k + 1):
        idx = arr.column_indices(j)
        kj = _family_count(supplier, space, len(idx))
        used = sorted(idx[:kj], key=lambda n: (req.R[n - 1], n))
        plans.append(ColumnPlan(j, tuple(used), tuple(req.R[n - 1] for n in used)))
    return plans


def outer_scales(plans: Sequence[ColumnPlan]) -> tuple:
    """The scales P_j the outer witness must be disjoint at."""
    return tuple(p.top for p in plans)


def _call_supplier(supplier, piece: Subspace, scales: tuple) -> DecompositionWitness:
    try:
        v = supplier(piece, scales)
    except Exception as exc:  # any failure of the supplier is reported uniformly
        raise SupplierFailureError(f"supplier failed on {piece!r}: {exc}") from exc
    if v.source != piece:
        raise SupplierFailureError(f"supplier returned a witness for a different source than {piece!r}")
    verdict = verify_witness(v, scales)
    if not verdict.ok:
        raise SupplierFailureError(f"supplier witness for {piece!r} fails: {verdict.report()[:3]}")
    return v


def compose(outer: DecompositionWitness, supplier, req) -> DecompositionWitness:
    """Refine every piece of ``outer`` with the supplier and regroup by the rearranged index.

    Inner family i of a piece from outer family j lands at the original index
    of the i-th smallest consumed entry of column j.  Two pieces of the same
    inner witness are separated by that entry; pieces from different outer
    pieces by P_j, the largest consumed entry.
    """
    req = as_request(req)
    X = outer.space
    plans = plan_composition(req, supplier, X, outer.k)
    for fam, plan in zip(outer.families, plans):
        bad = cross_violations(fam, plan.top, limit=1)
        if bad:
            raise PreconditionError(
                f"outer family {plan.column} is not {plan.top}-disjoint (pair {bad[0][:2]})")
    slots: dict[int, list[Subspace]] = {}
    depth = 1
    inner_counts = []
    for fam, plan in zip(outer.families, plans):
        for piece in fam.pieces:
            v = _call_supplier(supplier, piece, plan.values)
            depth = max(depth, v.depth)
            inner_counts.append(v.k)
            for i, ifam in enumerate(v.families):
                slots.setdefault(plan.indices[i], []).extend(ifam.pieces)
        for n in plan.indices:
            slots.setdefault(n, [])
    top = max(slots)
    families = [slots.get(n, []) for n in range(1, top + 1)]
    padding = [n - 1 for n in range(1, top + 1) if n not in slots]
    prov = list(outer.provenance) + [{
        "construction": "compose",
        "outerFamilies": outer.k,
        "columns": [{"column": p.column, "indices": list(p.indices),
                     "values": [str(v) for v in p.values]} for p in plans],
        "maxInnerFamilies": max(inner_counts, default=0),
    }]
    return make_witness(outer.source, families, req.R[:top], depth=depth, padding=padding,
                        provenance=prov)


def compose_search(X, req, outer, inner) -> DecompositionWitness:
    """Search an outer witness at the scales the inner supplier needs, then compose."""
    req = as_request(req)
    src = _source(X)
    arr = rearrange(req.R)
    k = _family_count(outer, src.parent, arr.n_columns)
    plans = plan_composition(req, inner, src.parent, k)
    w_outer = outer(src, outer_scales(plans))
    return compose(w_outer, inner, req)


def composition_limit(w: DecompositionWitness) -> int:
    """``k * max k_j`` for a composed witness, read from its provenance."""
    for entry in reversed(w.provenance):
        if entry.get("construction") in ("compose", "product"):
            return entry["outerFamilies"] * entry["maxInnerFamilies"]
    raise ValueError("witness was not produced by a composition")


# --------------------------------------------------------------------------
# products


def product_decompose(X: FiniteMetricSpace, Y: FiniteMetricSpace, req, searcher_x, searcher_y,
                      product: FiniteMetricSpace | None = None) -> DecompositionWitness:
    """Witness on ``X x Y`` from witnesses on the factors.

    X is decomposed once per column j against that column's consumed prefix,
    Y once against the column tops P.  A product U x V with U in family i of
    the j-th X witness and V in family j of the Y witness goes to the family
    at the index of the i-th entry of column j.
    """
    req = as_request(req)
    P = build_product(X, Y) if product is None else product
    arr = rearrange(req.R)
    k = _family_count(searcher_y, Y, arr.n_columns)
    plans = plan_composition(req, searcher_x, X, k)
    try:
        wy = searcher_y(Y.whole, outer_scales(plans))
        wxs = [searcher_x(X.whole, p.values) for p in plans]
    except Exception as exc:
        raise SupplierFailureError(f"factor decomposition failed: {exc}") from exc
    ny = len(Y)
    slots: dict[int, list[Subspace]] = {}
    for j, (plan, wx) in enumerate(zip(plans, wxs)):
        for n in plan.indices:
            slots.setdefault(n, [])
        if j >= wy.k:
            continue
        for i, fam in enumerate(wx.families):
            for U in fam.pieces:
                for V in wy.families[j].pieces:
                    members = (U.index[:, None] * ny + V.index[None, :]).ravel()
                    slots[plan.indices[i]].append(Subspace(P, members))
    top = max(slots)
    families = [slots.get(n, []) for n in range(1, top + 1)]
    padding = [n - 1 for n in range(1, top + 1) if n not in slots]
    prov = [{"construction": "product", "left": X.name, "right": Y.name,
             "outerFamilies": wy.k, "maxInnerFamilies": max(w.k for w in wxs),
             "columns": [{"column": p.column, "indices": list(p.indices),
                          "values": [str(v) for v in p.values]} for p in plans]}]
    depth = max([wy.depth] + [w.depth for w in wxs])
    return make_witness(P.whole, families, req.R[:top], depth=depth, padding=padding,
                        provenance=prov)


# --------------------------------------------------------------------------
# unions


def union_decompose(parts: Sequence[Subspace], excision: Callable, req,
                    parts_depth: int = 0) -> DecompositionWitness:
    """Two families: the parts with Y(R_1) shaved off, and Y(R_1) itself.

    ``excision(r)`` returns a Subspace, an iterable of point indices, or None
    for the empty set.  ``parts_depth`` is the depth of the parts themselves
    (0 when they are bounded).
    """
    req = as_request(req)
    if not parts:
        raise ValueError("union of no parts")
    X = parts[0].parent
    r1 = req.R[0]
    cut = excision(r1)
    cut_idx = set() if cut is None else set(int(i) for i in cut)
    shaved = []
    for part in parts:
        if part.parent is not X:
            raise ValueError("parts must share a parent space")
        rest = [m for m in part.members if m not in cut_idx]
        if rest:
            shaved.append(Subspace(X, rest))
    fam1 = SubspaceFamily(tuple(shaved), r1)
    bad = cross_violations(fam1, r1, limit=3)
    if bad:
        raise ExcisionInsufficientError(
            f"shaved parts are not {r1}-disjoint: pairs {[b[:2] for b in bad]}")
    families = [shaved]
    if cut_idx:
        if len(req.R) < 2:
            raise SequenceExhaustedError("a nonempty excision needs a second entry of R")
        families.append([Subspace(X, sorted(cut_idx))])
    elif len(req.R) >= 2:
        families.append([])
    members = sorted(set().union(*(p.members for p in parts)) | cut_idx)
    source = Subspace(X, members)
    prov = [{"construction": "union", "parts": len(parts), "excised": len(cut_idx)}]
    return make_witness(source, families, req.R[:len(families)], depth=parts_depth + 1,
                        padding=[1] if len(families) == 2 and not cut_idx else [],
                        provenance=prov)


# --------------------------------------------------------------------------
# pullbacks and fibers


def pullback_witness(F: MapFamily, w: DecompositionWitness, req,
                     map_index: int = 0) -> DecompositionWitness:
    """Preimages of the pieces of ``w`` under ``F.maps[map_index]``.

    ``w`` must verify against S_i = rho2(R_i); then preimages of an
    S_i-disjoint family are R_i-disjoint.
    """
    req = as_request(req)
    check_controls(F)
    f: PointMap = F.maps[map_index]
    if w.space is not f.codomain:
        raise PreconditionError("witness does not live on the codomain of the map")
    S = tuple(F.rho2(r) for r in req.R[:max(w.k, 1)])
    verdict = verify_witness(w, S)
    if not verdict.ok:
        raise PreconditionError(f"witness fails at S = rho2(R): {verdict.report()[:3]}")
    covered = np.zeros(len(f.codomain), dtype=bool)
    for fam in w.families:
        for p in fam.pieces:
            covered[p.index] = True
    if not covered[list(f.image)].all():
        raise PreconditionError("witness does not cover the image of the map")
    image = np.asarray(f.image, dtype=np.int64)
    families = []
    for fam in w.families:
        pieces = []
        for p in fam.pieces:
            pre = np.nonzero(p.mask()[image])[0]
            if len(pre):
                pieces.append(Subspace(f.domain, pre))
        families.append(pieces)
    step = {"construction": "pullback", "rho2": F.rho2.to_json(),
            "rho1": None if F.rho1 is None else F.rho1.to_json()}
    if F.rho1 is not None and F.rho1.proper:
        step["bprime"] = str(F.rho1.sup_preimage(w.piece_bound))
    return make_witness(f.domain.whole, families, req.R[:w.k], depth=w.depth,
                        padding=w.padding, provenance=list(w.provenance) + [step])


def projection_map(product: FiniteMetricSpace, left: FiniteMetricSpace,
                   right: FiniteMetricSpace, onto: str = "right") -> PointMap:
    """Coordinate projection of ``left x right`` (index ``x * |right| + y``)."""
    n = len(right)
    idx = np.arange(len(product))
    if onto == "right":
        return PointMap(product, right, tuple(int(v) for v in idx % n))
    return PointMap(product, left, tuple(int(v) for v in idx // n))


def fiber_plan(req, supplier, F: MapFamily, k: int, map_index: int = 0):
    """Column plans and the scales rho2(P_j) a base witness must meet."""
    dom = F.maps[map_index].domain
    plans = plan_composition(req, supplier, dom, k)
    return plans, tuple(F.rho2(p) for p in outer_scales(plans))


def fiber_compose(F: MapFamily, wY: DecompositionWitness, supplier, req,
                  map_index: int = 0) -> DecompositionWitness:
    """Pull ``wY`` back along F at the outer scales, then refine each preimage.

    Depth is the sum of the base depth and the deepest supplied witness.
    """
    req = as_request(req)
    plans, _ = fiber_plan(req, supplier, F, wY.k, map_index)
    outer = pullback_witness(F, wY, outer_scales(plans), map_index)
    out = compose(outer, supplier, req)
    prov = list(out.provenance)
    prov[-1] = dict(prov[-1], stage="fiber")
    return DecompositionWitness(out.source, out.families, out.R, out.piece_bound,
                                depth=wY.depth + out.depth, padding=out.padding,
                                provenance=tuple(prov))


# --------------------------------------------------------------------------
# limits


def limit_decompose(Xa, splitter: Callable, req, pieces_depth: int = 0) -> DecompositionWitness:
    """One family at gap R_1 taken verbatim from ``splitter(R_1)``."""
    req = as_request(req)
    src = _source(Xa)
    X = src.parent
    r1 = req.R[0]
    raw = splitter(r1)
    pieces = [p if isinstance(p, Subspace) else Subspace(X, p) for p in raw]
    seen = np.zeros(len(X), dtype=np.int64)
    for p in pieces:
        if p.parent is not X:
            raise SplitterViolationError("splitter returned pieces of another space")
        seen[p.index] += 1
    if (seen > 1).any():
        raise SplitterViolationError(f"splitter pieces overlap at {np.nonzero(seen > 1)[0][:5].tolist()}")
    if not (seen[src.index] == 1).all() or seen.sum() != len(src):
        raise SplitterViolationError("splitter pieces do not partition the space")
    bad = cross_violations(SubspaceFamily(tuple(pieces), r1), r1, limit=3)
    if bad:
        raise SplitterViolationError(f"splitter pieces are not {r1}-disjoint: {[b[:2] for b in bad]}")
    prov = [{"construction": "limit", "pieces": len(pieces)}]
    return make_witness(src, [pieces], req.R[:1], depth=pieces_depth + 1, provenance=prov)


__all__ = [
    "ColumnPlan", "plan_composition", "outer_scales", "compose", "compose_search",
    "composition_limit", "product_decompose", "union_decompose", "pullback_witness",
    "projection_map", "fiber_plan", "fiber_compose", "limit_decompose",
]
