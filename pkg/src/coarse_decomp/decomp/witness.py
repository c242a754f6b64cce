"""Decomposition requests, witnesses and the exhaustive witness verifier."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ..errors import SequenceExhaustedError
from ..metric import (
    FiniteMetricSpace,
    Number,
    Subspace,
    SubspaceFamily,
    as_number,
    cross_violations,
    diameter_raw,
)


@dataclass(frozen=True)
class DecompositionRequest:
    """A finite prefix of the scale sequence R plus an optional piece bound."""

    R: tuple
    target_bound: Number | None = None

    def __post_init__(self):
        if isinstance(self.R, (int, float, str, Fraction)):
            vals = (as_number(self.R),)
        else:
            vals = tuple(as_number(r) for r in self.R)
        if not vals:
            raise ValueError("R must be nonempty")
        if any(r <= 0 for r in vals):
            raise ValueError("entries of R must be positive")
        object.__setattr__(self, "R", vals)
        if self.target_bound is not None:
            tb = as_number(self.target_bound)
            if tb <= 0:
                raise ValueError("target bound must be positive")
            object.__setattr__(self, "target_bound", tb)

    def __len__(self) -> int:
        return len(self.R)

    def entry(self, i: int) -> Number:
        """1-based access, signalling exhaustion instead of inventing entries."""
        if not 1 <= i <= len(self.R):
            raise SequenceExhaustedError(f"R_{i} requested but only {len(self.R)} entries given")
        return self.R[i - 1]

    def prefix(self, k: int) -> tuple:
        if k > len(self.R):
            raise SequenceExhaustedError(f"{k} entries of R requested, {len(self.R)} given")
        return self.R[:k]


def as_request(req) -> DecompositionRequest:
    return req if isinstance(req, DecompositionRequest) else DecompositionRequest(tuple(req))


@dataclass(frozen=True, eq=False)
class DecompositionWitness:
    """Families U_1..U_k (U_i declared R_i-disjoint) covering ``source``.

    ``depth`` is the finite stand-in for the complexity ordinal: a witness
    over bounded pieces has depth 1.  ``padding`` lists (0-based) the
    families inserted empty only to keep indices aligned with R.
    """

    source: Subspace
    families: tuple
    R: tuple
    piece_bound: Number
    depth: int = 1
    padding: tuple = ()
    provenance: tuple = ()

    @property
    def space(self) -> FiniteMetricSpace:
        return self.source.parent

    @property
    def k(self) -> int:
        return len(self.families)

    @property
    def family_count(self) -> int:
        """Families actually produced by the construction (padding excluded)."""
        return len(self.families) - len(self.padding)

    @property
    def request(self) -> DecompositionRequest:
        return DecompositionRequest(self.R)

    def pieces(self) -> Iterable[Subspace]:
        for fam in self.families:
            yield from fam.pieces


def piece_bound_of(families: Sequence[SubspaceFamily], space: FiniteMetricSpace) -> Number:
    best = 0
    for fam in families:
        for p in fam.pieces:
            best = max(best, diameter_raw(p))
    return space.value(best)


def make_witness(source: Subspace, families: Sequence[Sequence[Subspace]], R: Sequence,
                 depth: int = 1, padding: Iterable[int] = (), provenance: Iterable = (),
                 piece_bound: Number | None = None) -> DecompositionWitness:
    """Assemble a witness; family ``i`` gets declared gap ``R[i]``."""
    R = tuple(as_number(r) for r in R)
    if len(families) > len(R):
        raise SequenceExhaustedError(f"{len(families)} families but only {len(R)} entries of R")
    fams = tuple(SubspaceFamily(tuple(p), R[i]) for i, p in enumerate(families))
    if piece_bound is None:
        piece_bound = piece_bound_of(fams, source.parent)
    return DecompositionWitness(source=source, families=fams, R=R, piece_bound=piece_bound,
                                depth=depth, padding=tuple(sorted(padding)),
                                provenance=tuple(provenance))


@dataclass
class WitnessVerdict:
    ok: bool
    uncovered: list = field(default_factory=list)
    disjointness: list = field(default_factory=list)
    oversized: list = field(default_factory=list)
    problems: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def report(self) -> list[str]:
        lines = list(self.problems)
        if self.uncovered:
            lines.append(f"uncovered points: {self.uncovered}")
        for fam, x, y in self.disjointness:
            lines.append(f"family {fam}: points {x!r} and {y!r} in distinct pieces are too close")
        for fam, piece, diam in self.oversized:
            lines.append(f"family {fam} piece {piece}: diameter {diam} exceeds pieceBound")
        return lines


def verify_witness(w: DecompositionWitness, req=None, max_reports: int = 1000) -> WitnessVerdict:
    """Exhaustively check coverage, R_i-disjointness and the piece bound.

    Every cross-piece pair of every family is examined; the report lists all
    uncovered points and up to ``max_reports`` disjointness violations.
    """
    req = w.request if req is None else as_request(req)
    X = w.space
    v = WitnessVerdict(ok=True)
    if len(w.families) > len(req.R):
        v.problems.append(f"{len(w.families)} families but the request has {len(req.R)} entries")
    covered = np.zeros(len(X), dtype=bool)
    for i, fam in enumerate(w.families):
        if fam.pieces and fam.parent is not X:
            v.problems.append(f"family {i + 1} lives in a different space")
            continue
        for p in fam.pieces:
            covered[p.index] = True
        if i < len(req.R):
            for x, y, _, _ in cross_violations(fam, req.R[i], limit=max_reports):
                v.disjointness.append((i + 1, X.ids[x], X.ids[y]))
        for j, p in enumerate(fam.pieces):
            raw = diameter_raw(p)
            if not X.le(np.asarray([raw]), w.piece_bound)[0]:
                v.oversized.append((i + 1, j, X.value(raw)))
    missing = w.source.index[~covered[w.source.index]]
    v.uncovered = [X.ids[i] for i in missing]
    if req.target_bound is not None and w.piece_bound > req.target_bound:
        v.problems.append(f"pieceBound {w.piece_bound} exceeds target {req.target_bound}")
    v.ok = not (v.problems or v.uncovered or v.disjointness or v.oversized)
    return v
