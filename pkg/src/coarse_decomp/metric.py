"""Finite metric spaces, subspaces, families and primitive geometric predicates.

Distances are held by a backend as *raw* values: integers over a common
``scale`` when exact, doubles otherwise.  Euclidean-type backends
(``squared=True``) store squared distances, which keeps every comparison
``d > r`` exact (compare ``d**2`` with ``r**2``) even though ``d`` itself is
irrational.  Only the reported values (diameters, gaps) fall back to doubles.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import (
    EmptySubspaceError,
    MetricAxiomError,
    OverlappingSubspacesError,
    SizeLimitError,
)

Number = Union[Fraction, float]

FLOAT_TOL = 1e-9
DEFAULT_MAX_POINTS = 65536
EXHAUSTIVE_TRIANGLE_LIMIT = 512
_CHUNK_CELLS = 1 << 22


def max_points() -> int:
    env = os.environ.get("COARSE_DECOMP_MAX_POINTS")
    return int(env) if env else DEFAULT_MAX_POINTS


def check_size(n: int, what: str = "space") -> None:
    cap = max_points()
    if n > cap:
        raise SizeLimitError(f"{what} would have {n} points, cap is {cap}")


def as_number(value) -> Number:
    """Parse a rational ("p/q" string, int, Fraction) or a double."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (np.integer,)):
        return Fraction(int(value))
    if isinstance(value, (np.floating,)):
        return float(value)
    raise TypeError(f"cannot interpret {value!r} as a number")


def format_number(value: Number):
    """JSON form: rationals as "p/q" strings, doubles as numbers."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return float(value)


def _rows_per_chunk(ncols: int) -> int:
    return max(1, _CHUNK_CELLS // max(1, ncols))


def _as_index(members) -> np.ndarray:
    return np.asarray(members, dtype=np.int64).reshape(-1)


# --------------------------------------------------------------------------
# backends


class Metric:
    """Raw-distance backend.  Subclasses implement ``raw``."""

    size: int
    exact: bool = True
    squared: bool = False
    scale: int = 1

    def raw(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def raw_squared(self, rows: np.ndarray, cols: np.ndarray) -> tuple[np.ndarray, int]:
        block = self.raw(rows, cols)
        if self.squared:
            return block, self.scale
        if self.exact:
            return block * block, self.scale * self.scale
        return block * block, 1

    @property
    def grid_coords(self) -> np.ndarray | None:
        return None


class TableMetric(Metric):
    def __init__(self, table: np.ndarray, scale: int = 1, exact: bool = True):
        table = np.asarray(table)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise MetricAxiomError("distance table must be square")
        self.table = table.astype(np.int64 if exact else np.float64)
        self.size = table.shape[0]
        self.scale = int(scale)
        self.exact = exact

    @classmethod
    def from_values(cls, values: Sequence[Sequence[Number]]) -> "TableMetric":
        vals = [[as_number(v) for v in row] for row in values]
        if any(isinstance(v, float) for row in vals for v in row):
            return cls(np.array([[float(v) for v in row] for row in vals]), exact=False)
        scale = 1
        for row in vals:
            for v in row:
                scale = math.lcm(scale, v.denominator)
        table = np.array([[int(v * scale) for v in row] for row in vals], dtype=np.int64)
        return cls(table, scale=scale)

    def raw(self, rows, cols):
        return self.table[np.ix_(rows, cols)]


class GraphMetric(TableMetric):
    """Shortest-path metric; keeps the edge list for serialization.

    ``coords`` may attach integer lattice coordinates whose max-norm
    differences never exceed the graph distance (a path is the 1-d lattice),
    which lets lattice strategies run on the graph.
    """

    def __init__(self, table, scale, edges, coords=None):
        super().__init__(table, scale=scale, exact=True)
        self.edges = edges
        self.coords = None if coords is None else np.asarray(coords, dtype=np.int64).reshape(self.size, -1)

    @property
    def grid_coords(self):
        return self.coords


class CoordMetric(Metric):
    """Integer lattice points under the l1 or l2 norm."""

    def __init__(self, coords: np.ndarray, norm: str):
        if norm not in ("l1", "l2"):
            raise ValueError(f"unknown norm {norm!r}")
        self.coords = np.asarray(coords, dtype=np.int64)
        if self.coords.ndim == 1:
            self.coords = self.coords[:, None]
        self.norm = norm
        self.size = self.coords.shape[0]
        self.squared = norm == "l2"

    def raw(self, rows, cols):
        a, b = self.coords[rows], self.coords[cols]
        out = np.zeros((len(a), len(b)), dtype=np.int64)
        for d in range(self.coords.shape[1]):  # one axis at a time: no 3-d temporaries
            diff = a[:, d, None] - b[None, :, d]
            if self.norm == "l1":
                out += np.abs(diff)
            else:
                out += diff * diff
        return out

    @property
    def grid_coords(self):
        return self.coords


class ProductMetric(Metric):
    """d((x,y),(x',y')) = sqrt(d_X(x,x')**2 + d_Y(y,y')**2), stored squared."""

    squared = True

    def __init__(self, left: "FiniteMetricSpace", right: "FiniteMetricSpace"):
        self.left = left
        self.right = right
        self.size = len(left) * len(right)
        self.exact = left.exact and right.exact
        lm, rm = left.metric, right.metric
        if self.exact:
            _, sl = lm.raw_squared(np.zeros(1, np.int64), np.zeros(1, np.int64))
            _, sr = rm.raw_squared(np.zeros(1, np.int64), np.zeros(1, np.int64))
            self._sl, self._sr = sl, sr
            self.scale = math.lcm(sl, sr)
        else:
            self.scale = 1

    def raw(self, rows, cols):
        nr = len(self.right)
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        ql, sl = self.left.metric.raw_squared(rows // nr, cols // nr)
        qr, sr = self.right.metric.raw_squared(rows % nr, cols % nr)
        if self.exact:
            return ql * (self.scale // sl) + qr * (self.scale // sr)
        return ql / sl + qr / sr

    @property
    def grid_coords(self):
        lc, rc = self.left.metric.grid_coords, self.right.metric.grid_coords
        if lc is None or rc is None:
            return None
        nr = len(self.right)
        idx = np.arange(self.size)
        return np.concatenate([lc[idx // nr], rc[idx % nr]], axis=1)


class RestrictedMetric(Metric):
    def __init__(self, base: Metric, index: np.ndarray):
        self.base = base
        self.index = _as_index(index)
        self.size = len(self.index)
        self.exact = base.exact
        self.squared = base.squared
        self.scale = base.scale

    def raw(self, rows, cols):
        return self.base.raw(self.index[rows], self.index[cols])

    def raw_squared(self, rows, cols):
        return self.base.raw_squared(self.index[rows], self.index[cols])

    @property
    def grid_coords(self):
        c = self.base.grid_coords
        return None if c is None else c[self.index]


# --------------------------------------------------------------------------
# spaces


class FiniteMetricSpace:
    """A finite point set with an exact (or double) pairwise distance.

    Points are addressed internally by index ``0..n-1``; ``ids`` holds the
    opaque external ids written to certificates and ``labels`` an optional
    human-readable description (lattice coordinates, group words, ...).
    """

    def __init__(self, metric: Metric, ids=None, labels=None, name: str | None = None):
        check_size(metric.size)
        self.metric = metric
        n = metric.size
        self.ids = tuple(range(n)) if ids is None else tuple(ids)
        if len(self.ids) != n:
            raise ValueError("ids must match the number of points")
        self.labels = None if labels is None else tuple(labels)
        self.name = name

    def __len__(self) -> int:
        return self.metric.size

    def __repr__(self) -> str:
        nm = f" {self.name!r}" if self.name else ""
        return f"<FiniteMetricSpace{nm} n={len(self)}>"

    @property
    def exact(self) -> bool:
        return self.metric.exact

    @property
    def squared(self) -> bool:
        return self.metric.squared

    @cached_property
    def _id_index(self) -> dict:
        return {pid: i for i, pid in enumerate(self.ids)}

    def index_of(self, pid) -> int:
        try:
            return self._id_index[pid]
        except KeyError:
            raise KeyError(f"unknown point id {pid!r}") from None

    @cached_property
    def whole(self) -> "Subspace":
        return Subspace(self, tuple(range(len(self))))

    def subspace(self, members: Iterable[int]) -> "Subspace":
        return Subspace(self, members)

    def subspace_of_ids(self, ids: Iterable) -> "Subspace":
        return Subspace(self, [self.index_of(i) for i in ids])

    # raw access ---------------------------------------------------------

    def raw(self, rows, cols) -> np.ndarray:
        return self.metric.raw(_as_index(rows), _as_index(cols))

    def iter_blocks(self, rows, cols) -> Iterator[tuple[slice, np.ndarray]]:
        """Yield ``(row_slice, raw_block)`` over ``rows`` x ``cols`` in memory-bounded chunks."""
        rows = _as_index(rows)
        cols = _as_index(cols)
        step = _rows_per_chunk(len(cols))
        for start in range(0, len(rows), step):
            sl = slice(start, min(start + step, len(rows)))
            yield sl, self.metric.raw(rows[sl], cols)

    def value(self, raw) -> Number:
        """Convert one raw entry to a distance."""
        m = self.metric
        if not m.exact:
            v = float(raw)
            return math.sqrt(max(v, 0.0)) if m.squared else v
        q = Fraction(int(raw), m.scale)
        if not m.squared:
            return q
        rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
        if rn * rn == q.numerator and rd * rd == q.denominator:
            return Fraction(rn, rd)
        return math.sqrt(q.numerator / q.denominator)

    def dist(self, x: int, y: int) -> Number:
        return self.value(self.metric.raw(_as_index([x]), _as_index([y]))[0, 0])

    def values(self, raw: np.ndarray) -> np.ndarray:
        """Vectorised ``value``; object array of Fractions in exact linear mode."""
        m = self.metric
        if not m.exact:
            raw = np.asarray(raw, dtype=np.float64)
            return np.sqrt(np.maximum(raw, 0.0)) if m.squared else raw
        flat = [self.value(v) for v in np.asarray(raw).ravel()]
        out = np.empty(len(flat), dtype=object)
        out[:] = flat
        return out.reshape(np.shape(raw))

    # comparisons against a threshold --------------------------------------

    def _exact_threshold(self, r: Number) -> Fraction:
        q = Fraction(r)
        if self.metric.squared:
            q = q * q
        return q * self.metric.scale

    def _compare(self, raw: np.ndarray, r: Number, op: str) -> np.ndarray:
        raw = np.asarray(raw)
        m = self.metric
        if r < 0:
            const = op in ("gt", "ge")
            return np.full(raw.shape, const, dtype=bool)
        if m.exact and isinstance(r, float):
            # a double threshold (e.g. a reported irrational diameter) gets the guard
            lhs = raw.astype(np.float64) / m.scale
            lhs = np.sqrt(np.maximum(lhs, 0.0)) if m.squared else lhs
            rhs = {"gt": r + FLOAT_TOL, "le": r + FLOAT_TOL,
                   "ge": r - FLOAT_TOL, "lt": r - FLOAT_TOL}[op]
        elif m.exact:
            t = self._exact_threshold(r)
            if t.denominator == 1:
                lhs, rhs = raw, t.numerator
            else:
                den = t.denominator
                peak = int(np.abs(raw).max()) if raw.size else 0
                if peak * den < (1 << 62) and abs(t.numerator) < (1 << 62):
                    lhs = raw * den
                else:
                    lhs = raw.astype(object) * den
                rhs = t.numerator
        else:
            lhs = np.sqrt(np.maximum(raw, 0.0)) if m.squared else raw
            r = float(r)
            rhs = {"gt": r + FLOAT_TOL, "le": r + FLOAT_TOL,
                   "ge": r - FLOAT_TOL, "lt": r - FLOAT_TOL}[op]
        if op == "gt":
            res = lhs > rhs
        elif op == "ge":
            res = lhs >= rhs
        elif op == "lt":
            res = lhs < rhs
        elif op == "le":
            res = lhs <= rhs
        else:
            raise ValueError(op)
        return np.asarray(res, dtype=bool)

    def gt(self, raw, r):
        return self._compare(raw, r, "gt")

    def ge(self, raw, r):
        return self._compare(raw, r, "ge")

    def lt(self, raw, r):
        return self._compare(raw, r, "lt")

    def le(self, raw, r):
        return self._compare(raw, r, "le")

    def ceil_dist(self, raw: np.ndarray) -> np.ndarray:
        """Exact ``ceil(d)`` for each raw entry (integer array)."""
        m = self.metric
        raw = np.asarray(raw)
        if not m.exact:
            d = np.sqrt(np.maximum(raw, 0.0)) if m.squared else raw
            return np.ceil(d - FLOAT_TOL).astype(np.int64)
        s = m.scale
        if not m.squared:
            return -((-raw) // s)
        k = np.floor(np.sqrt(raw / s)).astype(np.int64)
        for _ in range(2):
            k = np.where(k * k * s < raw, k + 1, k)
            k = np.where((k > 0) & ((k - 1) * (k - 1) * s >= raw), k - 1, k)
        return k

    # axioms ----------------------------------------------------------------

    def validate(self, limit: int = EXHAUSTIVE_TRIANGLE_LIMIT) -> None:
        """Check the metric axioms; triangles exhaustively up to ``limit`` points.

        Larger spaces are checked on ``limit`` evenly spaced points.
        """
        n = len(self)
        sample = np.arange(n) if n <= limit else np.linspace(0, n - 1, limit).round().astype(np.int64)
        sample = np.unique(sample)
        block = self.raw(sample, sample)
        if not np.array_equal(block, block.T):
            raise MetricAxiomError("distance is not symmetric")
        diag = np.diagonal(block)
        if np.any(diag != 0):
            raise MetricAxiomError("d(x,x) != 0")
        off = ~np.eye(len(sample), dtype=bool)
        if np.any(block[off] <= 0):
            raise MetricAxiomError("distinct points at distance 0 (pseudo-metric)")
        if self.metric.squared or not self.exact:
            d = np.sqrt(block.astype(np.float64)) if self.metric.squared else block.astype(np.float64)
            tol = FLOAT_TOL * max(1.0, float(d.max()) if d.size else 1.0)
            for y in range(len(sample)):
                if np.any(d > d[:, y][:, None] + d[y, :][None, :] + tol):
                    raise MetricAxiomError("triangle inequality fails")
        else:
            for y in range(len(sample)):
                if np.any(block > block[:, y][:, None] + block[y, :][None, :]):
                    raise MetricAxiomError("triangle inequality fails")


@dataclass(frozen=True, eq=False)
class Subspace:
    """A nonempty set of points of ``parent`` with the restricted metric."""

    parent: FiniteMetricSpace
    members: tuple

    def __post_init__(self):
        mem = tuple(sorted(set(int(m) for m in self.members)))
        if not mem:
            raise EmptySubspaceError("subspaces must be nonempty")
        if mem[0] < 0 or mem[-1] >= len(self.parent):
            raise IndexError("subspace member out of range")
        object.__setattr__(self, "members", mem)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, x) -> bool:
        return x in self.member_set

    def __eq__(self, other) -> bool:
        return (isinstance(other, Subspace) and other.parent is self.parent
                and other.members == self.members)

    def __hash__(self) -> int:
        return hash((id(self.parent), self.members))

    def __repr__(self) -> str:
        head = ",".join(map(str, self.members[:8]))
        more = ",..." if len(self.members) > 8 else ""
        return f"Subspace({{{head}{more}}}, n={len(self)})"

    @cached_property
    def index(self) -> np.ndarray:
        return np.asarray(self.members, dtype=np.int64)

    @cached_property
    def member_set(self) -> frozenset:
        return frozenset(self.members)

    @property
    def ids(self) -> list:
        return [self.parent.ids[i] for i in self.members]

    @property
    def is_whole(self) -> bool:
        return len(self.members) == len(self.parent)

    def mask(self) -> np.ndarray:
        m = np.zeros(len(self.parent), dtype=bool)
        m[self.index] = True
        return m

    def as_space(self) -> FiniteMetricSpace:
        """Materialise the subspace as a standalone space (restricted metric)."""
        p = self.parent
        labels = None if p.labels is None else [p.labels[i] for i in self.members]
        return FiniteMetricSpace(RestrictedMetric(p.metric, self.index),
                                 ids=self.ids, labels=labels)


def make_subspace(parent: FiniteMetricSpace, members) -> Subspace | None:
    """Like ``Subspace`` but returns None for an empty member set."""
    members = list(members)
    return Subspace(parent, members) if members else None


def _canonical(pieces: Iterable[Subspace]) -> tuple:
    return tuple(sorted(pieces, key=lambda s: (s.members[0], len(s), s.members)))


@dataclass(frozen=True, eq=False)
class SubspaceFamily:
    """Pieces over a common parent together with a declared disjointness gap."""

    pieces: tuple
    gap: Number = Fraction(0)

    def __post_init__(self):
        pieces = _canonical(self.pieces)
        parents = {id(p.parent) for p in pieces}
        if len(parents) > 1:
            raise ValueError("family pieces must share a parent space")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "gap", as_number(self.gap))

    def __len__(self) -> int:
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)

    def __eq__(self, other):
        return (isinstance(other, SubspaceFamily) and self.gap == other.gap
                and len(self.pieces) == len(other.pieces)
                and all(a == b for a, b in zip(self.pieces, other.pieces)))

    __hash__ = None

    @property
    def parent(self) -> FiniteMetricSpace | None:
        return self.pieces[0].parent if self.pieces else None

    def union_mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        for p in self.pieces:
            m[p.index] = True
        return m


@dataclass(frozen=True)
class BoundedGeometryProfile:
    radii: tuple
    counts: tuple

    def count(self, r) -> int:
        return self.counts[self.radii.index(r)]


# --------------------------------------------------------------------------
# operations


def _check_same_parent(a: Subspace, b: Subspace) -> None:
    if a.parent is not b.parent:
        raise ValueError("subspaces live in different spaces")


def gap(a: Subspace, b: Subspace) -> Number:
    """Minimum distance between two point-disjoint subspaces."""
    _check_same_parent(a, b)
    if a.member_set & b.member_set:
        raise OverlappingSubspacesError("gap is undefined for overlapping subspaces")
    X = a.parent
    best = None
    for _, block in X.iter_blocks(a.index, b.index):
        m = block.min()
        if best is None or m < best:
            best = m
    return X.value(best)


def cross_violations(family: SubspaceFamily, r: Number, limit: int | None = None) -> list:
    """Pairs ``(x, y, piece_a, piece_b)`` from distinct pieces with ``d(x, y) <= r``."""
    if len(family) < 2:
        return []
    X = family.parent
    pts = np.concatenate([p.index for p in family.pieces])
    lab = np.concatenate([np.full(len(p), i, dtype=np.int64) for i, p in enumerate(family.pieces)])
    out = []
    for sl, block in X.iter_blocks(pts, pts):
        close = ~X.gt(block, r)
        close &= lab[sl][:, None] < lab[None, :]
        if close.any():
            ii, jj = np.nonzero(close)
            for i, j in zip(ii, jj):
                out.append((int(pts[sl][i]), int(pts[j]), int(lab[sl][i]), int(lab[j])))
                if limit is not None and len(out) >= limit:
                    return out
    return out


def check_r_disjoint(family: SubspaceFamily, r: Number) -> bool:
    """True iff every cross-piece pair lies at distance strictly greater than ``r``."""
    return not cross_violations(family, r, limit=1)


def diameter(a: Subspace) -> Number:
    if a is None or len(a) == 0:
        raise EmptySubspaceError("diameter of an empty subspace")
    X = a.parent
    best = 0
    for _, block in X.iter_blocks(a.index, a.index):
        best = max(best, block.max())
    return X.value(best)


def diameter_raw(a: Subspace):
    X = a.parent
    best = 0
    for _, block in X.iter_blocks(a.index, a.index):
        best = max(best, block.max())
    return best


def distance_to_set_raw(X: FiniteMetricSpace, target: np.ndarray) -> np.ndarray:
    """Raw distance from every point of X to the index set ``target``."""
    allpts = np.arange(len(X))
    out = np.empty(len(X), dtype=np.float64 if not X.exact else np.int64)
    for sl, block in X.iter_blocks(allpts, target):
        out[sl] = block.min(axis=1)
    return out


def neighborhood(a: Subspace, R: Number) -> Subspace:
    """Open neighbourhood ``{x : d(x, A) < R}``; always contains ``A``."""
    X = a.parent
    near = X.lt(distance_to_set_raw(X, a.index), R)
    near[a.index] = True
    return Subspace(X, np.nonzero(near)[0])


def bounded_geometry_profile(X: FiniteMetricSpace, radii: Sequence[Number]) -> BoundedGeometryProfile:
    """Per radius, the largest closed-ball cardinality ``max_x |B(x, r)|``."""
    radii = tuple(as_number(r) for r in radii)
    if any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")
    allpts = np.arange(len(X))
    counts = [0] * len(radii)
    for _, block in X.iter_blocks(allpts, allpts):
        for k, r in enumerate(radii):
            counts[k] = max(counts[k], int(X.le(block, r).sum(axis=1).max()))
    return BoundedGeometryProfile(radii, tuple(counts))
