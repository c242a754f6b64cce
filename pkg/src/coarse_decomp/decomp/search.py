"""Search strategies producing decomposition witnesses.

All strategies are deterministic: seeds are taken in increasing point index
and ties are resolved towards the smaller index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from ..errors import NotFoundError, PreconditionError, SequenceExhaustedError
from ..metric import FiniteMetricSpace, Number, Subspace, as_number, diameter_raw
from .witness import DecompositionRequest, DecompositionWitness, as_request, make_witness

STRATEGIES = ("shifted-brick", "greedy", "exhaustive", "trivial")
EXHAUSTIVE_LIMIT = 24
GREEDY_RADIUS_FACTORS = (Fraction(0), Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2),
                         Fraction(3), Fraction(4), Fraction(6), Fraction(8))


def _source(X) -> Subspace:
    return X.whole if isinstance(X, FiniteMetricSpace) else X


def _trivial(src: Subspace, R: Sequence, note: str) -> DecompositionWitness:
    return make_witness(src, [[src]], R[:1], provenance=[{"construction": "search",
                                                          "strategy": "trivial", "note": note}])


def _finish(w: DecompositionWitness, req: DecompositionRequest) -> DecompositionWitness:
    if req.target_bound is not None and w.piece_bound > req.target_bound:
        raise NotFoundError(f"best pieceBound {w.piece_bound} exceeds target {req.target_bound}")
    return w


def search_decomposition(X, req, strategy: str = "greedy", *, max_families: int | None = None,
                         broadcast: bool = True, budget: int = 2_000_000) -> DecompositionWitness:
    """Find a witness for ``X`` against ``req`` with a small piece bound.

    ``max_families`` caps the number of families.  For ``shifted-brick`` a
    one-entry request is read as a single scale used by every family when
    ``broadcast`` is set.
    """
    req = as_request(req)
    src = _source(X)
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    if len(src) == 1:
        return _finish(_trivial(src, req.R, "single point"), req)
    if strategy == "trivial":
        return _finish(_trivial(src, req.R, "requested"), req)
    if strategy == "shifted-brick":
        return _finish(shifted_brick(src, req, max_families=max_families, broadcast=broadcast), req)
    k = len(req.R) if max_families is None else min(max_families, len(req.R))
    if strategy == "greedy":
        return _finish(greedy(src, req.R[:k], req.target_bound), req)
    return _finish(exhaustive(src, req.R[:k], budget=budget), req)


# --------------------------------------------------------------------------
# shifted bricks


def brick_margin(r: Number) -> int:
    """Smallest integer g with g + 1 > r: the empty margin left in each cell."""
    return max(0, math.floor(r))


def shifted_brick(src: Subspace, req: DecompositionRequest, *, max_families: int | None = None,
                  broadcast: bool = True) -> DecompositionWitness:
    """n+1 diagonally shifted tilings of an integer lattice by cubes.

    Cells have side ``D = (n+1) s``; family i uses the tiling shifted by
    ``i s (1,...,1)`` and keeps from each cell only the points whose offset
    is below ``D - g`` in every coordinate, so neighbouring cells are at least
    ``g + 1 > r`` apart in some coordinate.  The removed margins of different
    shifts are disjoint in each coordinate, so among n+1 shifts at most n
    miss a given point.
    """
    coords = src.parent.metric.grid_coords
    if coords is None:
        raise PreconditionError("shifted-brick needs an integer lattice (grid or product of grids)")
    n = coords.shape[1]
    need = n + 1
    if max_families is not None and max_families < need:
        return _trivial(src, req.R, f"shifted-brick needs {need} families, {max_families} allowed")
    if len(req.R) >= need:
        gaps = req.R[:need]
        mode = "prefix"
    elif len(req.R) == 1 and broadcast:
        gaps = req.R * need
        mode = "single-scale"
    else:
        raise SequenceExhaustedError(f"shifted-brick in dimension {n} needs {need} entries of R")
    r = max(gaps)
    g = brick_margin(r)
    s = max(g, 1)
    D = need * s
    pts = coords[src.index]
    families = []
    for i in range(need):
        rel = pts - i * s
        good = np.all(np.mod(rel, D) < D - g, axis=1)
        cells = np.floor_divide(rel[good], D)
        members = src.index[good]
        pieces = {}
        for cell, m in zip(map(tuple, cells), members):
            pieces.setdefault(cell, []).append(int(m))
        families.append([Subspace(src.parent, v) for v in pieces.values()])
    prov = {"construction": "search", "strategy": "shifted-brick", "dimension": n,
            "scale": str(r), "margin": g, "shift": s, "cell": D, "mode": mode}
    return make_witness(src, families, gaps, provenance=[prov])


# --------------------------------------------------------------------------
# greedy ball carving


def _components(X: FiniteMetricSpace, idx: np.ndarray, r: Number) -> list[np.ndarray]:
    if len(idx) == 0:
        return []
    adj = X.le(X.raw(idx, idx), r)
    ncomp, labels = connected_components(adj, directed=False)
    comps = [idx[labels == c] for c in range(ncomp)]
    return sorted(comps, key=lambda c: int(c[0]))


def _carve(src: Subspace, R: Sequence, t: Number) -> list[list[Subspace]]:
    X = src.parent
    idx = src.index
    uncovered = np.ones(len(idx), dtype=bool)
    families = []
    for r in R[:-1]:
        blocked = np.zeros(len(idx), dtype=bool)
        pieces = []
        for p in range(len(idx)):
            if not uncovered[p] or blocked[p]:
                continue
            row = X.raw(idx[p:p + 1], idx)[0]
            ball = X.le(row, t) & uncovered & ~blocked
            members = np.nonzero(ball)[0]
            pieces.append(Subspace(X, idx[members]))
            uncovered[members] = False
            # anything within r of the ball is within t + r of its centre
            cand = np.nonzero(X.le(row, as_number(t) + as_number(r)))[0]
            near = np.zeros(len(cand), dtype=bool)
            for _, block in X.iter_blocks(idx[members], idx[cand]):
                near |= X.le(block, r).any(axis=0)
            blocked[cand[near]] = True
        families.append(pieces)
    rest = idx[uncovered]
    families.append([Subspace(X, c) for c in _components(X, rest, R[-1])])
    return families


def greedy(src: Subspace, R: Sequence, target: Number | None = None) -> DecompositionWitness:
    """Ball carving: families 1..k-1 are grown as balls of radius t around the
    lowest uncovered unblocked point, blocking each ball's closed R_i-neighbourhood;
    the last family takes the R_k-components of what remains.

    Tries every family count up to ``len(R)`` and a fixed ladder of radii
    ``t = c * max(R)``; returns the smallest piece bound found.
    """
    X = src.parent
    R = tuple(R)
    best = None
    for k in range(1, len(R) + 1):
        scale = max(R[:k])
        radii = [Fraction(0)] if k == 1 else [c * Fraction(scale) for c in GREEDY_RADIUS_FACTORS]
        for t in radii:
            fams = _carve(src, R[:k], t)
            bound = max(diameter_raw(p) for f in fams for p in f)
            key = (bound, k, t)
            if best is None or key < best[0]:
                best = (key, fams)
            if target is not None and X.le(np.asarray([bound]), target)[0]:
                break
    (_, k, t), fams = best
    prov = {"construction": "search", "strategy": "greedy", "families": k, "radius": str(t)}
    return make_witness(src, fams, R[:k], provenance=[prov])


# --------------------------------------------------------------------------
# exhaustive


def exhaustive(src: Subspace, R: Sequence, budget: int = 2_000_000) -> DecompositionWitness:
    """Minimum piece bound over all assignments of points to ``len(R)`` families.

    Given an assignment, the finest R_i-disjoint family on the points of
    colour i is its R_i-components, so the search ranges over colourings and
    prunes as soon as a component outgrows the candidate bound.  Candidate
    bounds are the distinct pairwise distances, tried in increasing order.
    """
    if len(src) > EXHAUSTIVE_LIMIT:
        raise PreconditionError(f"exhaustive search is limited to {EXHAUSTIVE_LIMIT} points")
    X = src.parent
    idx = src.index
    n = len(idx)
    D = X.raw(idx, idx)
    k = len(R)
    adj = [X.le(D, r) for r in R]
    nodes = 0

    def feasible(bound) -> list | None:
        colour = [-1] * n

        def component(x: int, c: int) -> list[int]:
            seen = {x}
            stack = [x]
            while stack:
                y = stack.pop()
                for z in range(n):
                    if z not in seen and colour[z] == c and adj[c][y, z]:
                        seen.add(z)
                        stack.append(z)
            return list(seen)

        def place(x: int) -> bool:
            nonlocal nodes
            if x == n:
                return True
            for c in range(k):
                nodes += 1
                if nodes > budget:
                    raise NotFoundError("exhaustive search budget exhausted")
                colour[x] = c
                comp = component(x, c)
                if D[np.ix_(comp, comp)].max() <= bound and place(x + 1):
                    return True
                colour[x] = -1
            return False

        return list(colour) if place(0) else None

    for bound in np.unique(D):
        colouring = feasible(bound)
        if colouring is not None:
            break
    families = []
    for c in range(k):
        pts = np.array([i for i in range(n) if colouring[i] == c], dtype=np.int64)
        comps = _components(X, idx[pts], R[c]) if len(pts) else []
        families.append([Subspace(X, comp) for comp in comps])
    while len(families) > 1 and not families[-1]:
        families.pop()
    prov = {"construction": "search", "strategy": "exhaustive", "nodes": nodes,
            "optimalBound": format(X.value(bound))}
    return make_witness(src, families, R[:len(families)], provenance=[prov])


# --------------------------------------------------------------------------
# suppliers


@dataclass(frozen=True)
class Searcher:
    """A strategy bundled with its parameters; used as a per-piece supplier."""

    strategy: str = "greedy"
    max_families: int | None = None
    target_bound: Number | None = None

    def preferred_families(self, space: FiniteMetricSpace) -> int | None:
        if self.strategy == "trivial":
            return 1
        if self.strategy == "shifted-brick":
            coords = space.metric.grid_coords
            if coords is None:
                raise PreconditionError("shifted-brick needs an integer lattice")
            return coords.shape[1] + 1
        return self.max_families

    def family_count(self, space: FiniteMetricSpace, available: int) -> int:
        """Families this supplier uses when ``available`` entries of R remain."""
        if available < 1:
            raise SequenceExhaustedError("no entries of R available")
        pref = self.preferred_families(space)
        if pref is None:
            return available
        if pref <= available:
            return pref
        return 1 if self.strategy == "shifted-brick" else available

    def __call__(self, source, R) -> DecompositionWitness:
        R = tuple(R)
        req = DecompositionRequest(R, self.target_bound)
        return search_decomposition(source, req, self.strategy, max_families=len(R),
                                    broadcast=False)


@dataclass(frozen=True)
class UniformResult:
    """Witnesses for every member of a family of spaces, sharing one strategy."""

    witnesses: tuple
    member_k: tuple

    @property
    def k(self) -> int:
        return max(self.member_k)

    @property
    def piece_bound(self):
        return max(w.piece_bound for w in self.witnesses)


def search_uniform(spaces: Sequence, req, strategy: str = "greedy", **kwargs) -> UniformResult:
    """Run one strategy with fixed parameters over every member; k is the max."""
    ws = tuple(search_decomposition(X, req, strategy, **kwargs) for X in spaces)
    return UniformResult(ws, tuple(w.k for w in ws))
