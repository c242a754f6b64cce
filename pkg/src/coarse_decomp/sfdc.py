"""Straight decomposition chains built from a decomposition witness.

Stage i consists of the pieces of families 1..i, each shaved of everything
covered by earlier families, plus the residual not covered by families 1..i.
Each element of stage i-1 splits into two R_i-disjoint groups of stage-i
elements: the shaved family-i pieces inside it, and what is left of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decomp.witness import DecompositionWitness, verify_witness
from .errors import InvalidWitnessError
from .metric import Number, Subspace, SubspaceFamily, cross_violations, diameter_raw


def _canonical(pieces) -> tuple:
    return tuple(sorted(pieces, key=lambda s: (s.members[0], len(s), s.members)))


@dataclass(frozen=True)
class Split:
    """Element ``element`` of stage i-1 as the union of two groups of stage-i elements."""

    element: int
    first: tuple
    second: tuple


@dataclass(frozen=True, eq=False)
class SfdcChain:
    source: Subspace
    stages: tuple  # tuple of tuples of Subspace, stage 0 = (source,)
    link_gaps: tuple
    links: tuple  # links[i-1] = tuple of Split for stage i-1 -> i
    final_bound: Number

    @property
    def length(self) -> int:
        return len(self.link_gaps)


def _index_of(stage: tuple) -> dict:
    return {p.members: n for n, p in enumerate(stage)}


def build_chain(w: DecompositionWitness, check: bool = True) -> SfdcChain:
    """Evaluate the set-difference stages for ``w`` (empty differences dropped)."""
    if check and not verify_witness(w):
        raise InvalidWitnessError("witness does not verify; refusing to build a chain")
    src = w.source
    X = src.parent
    covered = np.zeros(len(X), dtype=bool)
    in_src = src.mask()
    stages = [(src,)]
    links = []
    kept: list[Subspace] = []
    for fam in w.families:
        shaved = []
        for U in fam.pieces:
            rest = U.index[~covered[U.index] & in_src[U.index]]
            if len(rest):
                shaved.append(Subspace(X, rest))
        for U in fam.pieces:
            covered[U.index] = True
        residual_idx = src.index[~covered[src.index]]
        residual = Subspace(X, residual_idx) if len(residual_idx) else None
        stage = _canonical(kept + shaved + ([residual] if residual is not None else []))
        where = _index_of(stage)
        prev = stages[-1]
        old_kept = {p.members for p in kept}
        splits = []
        for n, W in enumerate(prev):
            if W.members in old_kept:
                splits.append(Split(n, (where[W.members],), ()))
                continue
            wset = W.member_set
            first = tuple(sorted(where[s.members] for s in shaved if s.members[0] in wset))
            second = (where[residual.members],) if residual is not None else ()
            splits.append(Split(n, first, second))
        kept = kept + shaved
        stages.append(stage)
        links.append(tuple(splits))
    final = max((diameter_raw(p) for p in stages[-1]), default=0)
    return SfdcChain(src, tuple(stages), tuple(w.R[:w.k]), tuple(links), X.value(final))


def empty_chain(source) -> SfdcChain:
    """The zero-length chain of a bounded space: its only stage is the space itself."""
    src = source.whole if hasattr(source, "whole") else source
    return SfdcChain(src, ((src,),), (), (), src.parent.value(diameter_raw(src)))


def continue_chain(chain: SfdcChain, other: SfdcChain) -> SfdcChain:
    """Append stages {A & B : A in the last stage, B in stage i of ``other``}."""
    if other.source != chain.source:
        raise ValueError("chains must share their source")
    X = chain.source.parent
    last = chain.stages[-1]
    stages = list(chain.stages)
    links = list(chain.links)

    def meet(stage_b):
        out = []
        for a in last:
            for b in stage_b:
                common = sorted(a.member_set & b.member_set)
                if common:
                    out.append((a, b, Subspace(X, common)))
        return out

    prev = meet(other.stages[0])
    for i, link in enumerate(other.links):
        cur = meet(other.stages[i + 1])
        stage = _canonical([c for _, _, c in cur])
        where = _index_of(stage)
        prev_stage = _canonical([c for _, _, c in prev])
        split_of = {s.element: s for s in link}
        b_index = {p.members: n for n, p in enumerate(other.stages[i])}
        splits = []
        for n, W in enumerate(prev_stage):
            a, b, _ = next(t for t in prev if t[2].members == W.members)
            s = split_of[b_index[b.members]]
            groups = []
            for group in (s.first, s.second):
                targets = {other.stages[i + 1][g].members for g in group}
                groups.append(tuple(sorted(where[c.members] for aa, bb, c in cur
                                           if aa is a and bb.members in targets)))
            splits.append(Split(n, groups[0], groups[1]))
        stages.append(stage)
        links.append(tuple(splits))
        prev = cur
    final = max((diameter_raw(p) for p in stages[-1]), default=0)
    return SfdcChain(chain.source, tuple(stages), chain.link_gaps + other.link_gaps,
                     tuple(links), X.value(final))


@dataclass
class ChainVerdict:
    ok: bool
    failures: list = field(default_factory=list)  # (link number, message); 0 = stage 0 / final bound

    def __bool__(self) -> bool:
        return self.ok

    @property
    def failing_links(self) -> list[int]:
        return sorted({n for n, _ in self.failures})

    @property
    def first_failure(self) -> int | None:
        links = self.failing_links
        return links[0] if links else None


def verify_chain(c: SfdcChain) -> ChainVerdict:
    """Check every link's two-part splits, the partition property and the final bound."""
    v = ChainVerdict(ok=True)
    X = c.source.parent
    if len(c.stages) != len(c.link_gaps) + 1 or len(c.links) != len(c.link_gaps):
        v.failures.append((0, "stage, link and gap counts disagree"))
        v.ok = False
        return v
    if len(c.stages[0]) != 1 or c.stages[0][0] != c.source:
        v.failures.append((1, "stage 0 must be the whole source"))
    src = c.source.mask()
    for i, stage in enumerate(c.stages[1:], start=1):
        count = np.zeros(len(X), dtype=np.int64)
        for p in stage:
            count[p.index] += 1
        if (count[src] != 1).any() or (count[~src] != 0).any():
            v.failures.append((i, f"stage {i} does not partition the source"))
    for i, (gap, link) in enumerate(zip(c.link_gaps, c.links), start=1):
        prev, cur = c.stages[i - 1], c.stages[i]
        seen = set()
        for s in link:
            if not 0 <= s.element < len(prev):
                v.failures.append((i, f"split refers to missing element {s.element}"))
                continue
            seen.add(s.element)
            groups = [s.first, s.second]
            if any(g < 0 or g >= len(cur) for grp in groups for g in grp):
                v.failures.append((i, f"split of element {s.element} refers to missing stage-{i} elements"))
                continue
            union = set()
            for grp in groups:
                for g in grp:
                    union |= cur[g].member_set
            if union != prev[s.element].member_set:
                v.failures.append((i, f"element {s.element} is not the union of its split"))
            for grp in groups:
                fam = SubspaceFamily(tuple(cur[g] for g in grp), gap)
                if cross_violations(fam, gap, limit=1):
                    v.failures.append((i, f"a part of element {s.element} is not {gap}-disjoint"))
        if seen != set(range(len(prev))):
            v.failures.append((i, "some elements have no split"))
    final = max((diameter_raw(p) for p in c.stages[-1]), default=0)
    if not X.le(np.asarray([final]), c.final_bound)[0]:
        v.failures.append((len(c.link_gaps), f"final stage diameter {X.value(final)} exceeds {c.final_bound}"))
    v.ok = not v.failures
    return v
