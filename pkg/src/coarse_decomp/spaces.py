"""Builders for grids, graphs, Cayley balls and product spaces."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import DisconnectedGraphError, SizeLimitError
from .metric import (
    CoordMetric,
    FiniteMetricSpace,
    GraphMetric,
    ProductMetric,
    TableMetric,
    as_number,
    check_size,
    max_points,
)


def build_grid_box(dim: int, side: int, metric: str = "l1") -> FiniteMetricSpace:
    """Lattice points of ``[0, side-1]**dim`` under the l1 or l2 norm."""
    if dim < 1 or side < 1:
        raise ValueError("dimension and side must be positive")
    check_size(side ** dim, "grid box")
    coords = np.indices((side,) * dim).reshape(dim, -1).T
    labels = [tuple(int(c) for c in row) for row in coords]
    return FiniteMetricSpace(CoordMetric(coords, metric), labels=labels,
                             name=f"grid{dim}d-side{side}-{metric}")


def build_lattice_points(coords: Iterable[Sequence[int]], metric: str = "l1",
                         name: str | None = None) -> FiniteMetricSpace:
    """An arbitrary finite set of integer lattice points."""
    arr = np.asarray(list(coords), dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[:, None]
    check_size(len(arr), "lattice point set")
    labels = [tuple(int(c) for c in row) for row in arr]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate lattice points")
    return FiniteMetricSpace(CoordMetric(arr, metric), labels=labels, name=name)


def build_graph_metric(edges: Iterable[tuple], nodes: Sequence[Hashable] | None = None,
                       name: str | None = None, coords=None) -> FiniteMetricSpace:
    """Shortest-path metric of a connected graph with positive rational weights.

    ``edges`` holds ``(u, v)`` or ``(u, v, w)``; node ids become point ids.
    Weights are scaled to integers by their common denominator so the
    all-pairs computation is exact in double precision.
    """
    triples = []
    for e in edges:
        u, v = e[0], e[1]
        w = as_number(e[2]) if len(e) > 2 else Fraction(1)
        if isinstance(w, float):
            w = Fraction(w)
        if w <= 0:
            raise ValueError("edge weights must be positive")
        triples.append((u, v, w))
    if nodes is None:
        seen = {}
        for u, v, _ in triples:
            seen.setdefault(u, None)
            seen.setdefault(v, None)
        try:
            nodes = sorted(seen)
        except TypeError:
            nodes = list(seen)
    nodes = list(nodes)
    check_size(len(nodes), "graph")
    index = {u: i for i, u in enumerate(nodes)}
    n = len(nodes)
    scale = 1
    for _, _, w in triples:
        scale = math.lcm(scale, w.denominator)
    best: dict[tuple[int, int], int] = {}
    for u, v, w in triples:
        a, b = sorted((index[u], index[v]))
        if a == b:
            continue
        iw = int(w * scale)
        if best.get((a, b), iw + 1) > iw:
            best[(a, b)] = iw
    if n > 1:
        rows = [a for a, b in best] + [b for a, b in best]
        cols = [b for a, b in best] + [a for a, b in best]
        data = list(best.values()) * 2
        g = csr_matrix((np.array(data, dtype=np.float64), (rows, cols)), shape=(n, n))
        ncomp, _ = connected_components(g, directed=False)
        if ncomp > 1:
            raise DisconnectedGraphError(f"graph has {ncomp} components")
        table = shortest_path(g, method="D", directed=False)
        if table.max() >= 2 ** 52:
            raise SizeLimitError("path lengths exceed exact double range")
        table = np.rint(table).astype(np.int64)
    else:
        table = np.zeros((n, n), dtype=np.int64)
    stored = [(u, v, w) for u, v, w in triples]
    return FiniteMetricSpace(GraphMetric(table, scale, stored, coords), ids=nodes, name=name)


def path_edges(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def cycle_edges(n: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % n) for i in range(n)]


def binary_tree_edges(depth: int) -> list[tuple[int, int]]:
    """Heap-numbered complete binary tree; root 0, leaves at ``depth``."""
    last = 2 ** (depth + 1) - 1
    return [(i, c) for i in range(last) for c in (2 * i + 1, 2 * i + 2) if c < last]


def build_path(n: int) -> FiniteMetricSpace:
    return build_graph_metric(path_edges(n), nodes=list(range(n)), name=f"path{n}",
                              coords=np.arange(n))


def build_cycle(n: int) -> FiniteMetricSpace:
    return build_graph_metric(cycle_edges(n), nodes=list(range(n)), name=f"cycle{n}")


def build_binary_tree(depth: int) -> FiniteMetricSpace:
    nodes = list(range(2 ** (depth + 1) - 1))
    if depth == 0:
        return build_graph_metric([], nodes=nodes, name="tree0")
    return build_graph_metric(binary_tree_edges(depth), nodes=nodes, name=f"bintree{depth}")


def build_product(left: FiniteMetricSpace, right: FiniteMetricSpace) -> FiniteMetricSpace:
    """X x Y with the Euclidean combination of the factor metrics.

    Point ``x * |Y| + y`` is the pair ``(x, y)``.
    """
    check_size(len(left) * len(right), "product")
    ids = list(range(len(left) * len(right)))
    ll = left.labels if left.labels is not None else left.ids
    rl = right.labels if right.labels is not None else right.ids
    labels = [(ll[i], rl[j]) for i in range(len(left)) for j in range(len(right))]
    name = None
    if left.name and right.name:
        name = f"{left.name}x{right.name}"
    return FiniteMetricSpace(ProductMetric(left, right), ids=ids, labels=labels, name=name)


# --------------------------------------------------------------------------
# groups


@dataclass
class GroupPresentationPreset:
    """A group with a built-in normal form and a symmetric weighted generating set.

    ``kind`` is one of ``free``, ``free-abelian``, ``dihedral``,
    ``lamplighter``; ``param`` is the rank / order / lamp window.  Generator
    weights default to 1 (lamplighter window toggles default to ``1 + |j|``).
    """

    kind: str
    param: int
    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("free", "free-abelian", "dihedral", "lamplighter"):
            raise ValueError(f"unknown group preset {self.kind!r}")
        if self.param < (0 if self.kind == "lamplighter" else 1):
            raise ValueError("preset parameter out of range")
        if self.kind == "dihedral" and self.param < 2:
            raise ValueError("dihedral(n) needs n >= 2")
        self.weights = {k: Fraction(as_number(v)) for k, v in self.weights.items()}
        if any(w <= 0 for w in self.weights.values()):
            raise ValueError("generator weights must be positive")

    @classmethod
    def parse(cls, text: str, weights: Sequence | None = None) -> "GroupPresentationPreset":
        """``"free:2"``, ``"free-abelian:3"``, ``"dihedral:8"``, ``"lamplighter:1"``."""
        kind, _, param = text.partition(":")
        preset = cls(kind.strip(), int(param or 1))
        if weights:
            names = [g for g in preset.generator_names()]
            if len(weights) != len(names):
                raise ValueError(f"expected {len(names)} weights for generators {names}")
            preset = cls(preset.kind, preset.param, dict(zip(names, weights)))
        return preset

    # generating set ---------------------------------------------------------

    def generator_names(self) -> list[str]:
        """One name per inverse pair (weights are shared within a pair)."""
        if self.kind in ("free", "free-abelian"):
            return [chr(ord("a") + i) for i in range(self.param)]
        if self.kind == "dihedral":
            return ["r", "s"]
        return ["t"] + [f"a{j}" for j in range(-self.param, self.param + 1)]

    def weight(self, name: str) -> Fraction:
        if name in self.weights:
            return self.weights[name]
        if self.kind == "lamplighter" and name.startswith("a"):
            return Fraction(1 + abs(int(name[1:])))
        return Fraction(1)

    def generators(self) -> list[tuple[object, Fraction]]:
        """Symmetric generating set as ``(element, weight)`` pairs."""
        out = []
        if self.kind == "free":
            for i, nm in enumerate(self.generator_names()):
                w = self.weight(nm)
                out += [(((i, 1),), w), (((i, -1),), w)]
        elif self.kind == "free-abelian":
            for i, nm in enumerate(self.generator_names()):
                w = self.weight(nm)
                for s in (1, -1):
                    v = [0] * self.param
                    v[i] = s
                    out.append((tuple(v), w))
        elif self.kind == "dihedral":
            n = self.param
            wr, ws = self.weight("r"), self.weight("s")
            out = [((1, 0), wr), ((n - 1, 0), wr), ((0, 1), ws)]
            out = list(dict.fromkeys(out))
        else:
            wt = self.weight("t")
            out = [((frozenset(), 1), wt), ((frozenset(), -1), wt)]
            for j in range(-self.param, self.param + 1):
                out.append(((frozenset([j]), 0), self.weight(f"a{j}")))
        return out

    # group law ---------------------------------------------------------------

    def identity(self):
        if self.kind == "free":
            return ()
        if self.kind == "free-abelian":
            return (0,) * self.param
        if self.kind == "dihedral":
            return (0, 0)
        return (frozenset(), 0)

    def multiply(self, g, h):
        if self.kind == "free":
            out = list(g)
            for letter in h:
                if out and out[-1][0] == letter[0] and out[-1][1] == -letter[1]:
                    out.pop()
                else:
                    out.append(letter)
            return tuple(out)
        if self.kind == "free-abelian":
            return tuple(a + b for a, b in zip(g, h))
        if self.kind == "dihedral":
            # (k, f) is r^k s^f ; s r = r^-1 s
            n = self.param
            k1, f1 = g
            k2, f2 = h
            k = (k1 + (-k2 if f1 else k2)) % n
            return (k, (f1 + f2) % 2)
        lamps1, p1 = g
        lamps2, p2 = h
        return (lamps1 ^ frozenset(l + p1 for l in lamps2), p1 + p2)

    def inverse(self, g):
        if self.kind == "free":
            return tuple((a, -e) for a, e in reversed(g))
        if self.kind == "free-abelian":
            return tuple(-a for a in g)
        if self.kind == "dihedral":
            k, f = g
            return (k, 1) if f else ((-k) % self.param, 0)
        lamps, p = g
        return (frozenset(l - p for l in lamps), -p)

    def length(self, g) -> Fraction | None:
        """Closed-form weighted word length where one is available."""
        if self.kind == "free":
            names = self.generator_names()
            return sum((self.weight(names[a]) for a, _ in g), Fraction(0))
        if self.kind == "free-abelian":
            names = self.generator_names()
            return sum((abs(c) * self.weight(names[i]) for i, c in enumerate(g)), Fraction(0))
        return None

    def label(self, g):
        if self.kind == "free":
            return "".join(chr(ord("a") + a) if e > 0 else chr(ord("A") + a) for a, e in g)
        if self.kind == "free-abelian":
            return list(g)
        if self.kind == "dihedral":
            return list(g)
        lamps, p = g
        return [sorted(lamps), p]


def _dijkstra_ball(preset: GroupPresentationPreset, radius: Fraction, cap: int) -> dict:
    ident = preset.identity()
    gens = preset.generators()
    dist = {ident: Fraction(0)}
    heap = [(Fraction(0), 0, ident)]
    counter = 1
    done = set()
    while heap:
        d, _, g = heapq.heappop(heap)
        if g in done:
            continue
        done.add(g)
        if len(done) > cap:
            raise SizeLimitError(f"Cayley ball exceeds {cap} elements")
        for s, w in gens:
            h = preset.multiply(g, s)
            nd = d + w
            if nd <= radius and (h not in dist or nd < dist[h]):
                dist[h] = nd
                heapq.heappush(heap, (nd, counter, h))
                counter += 1
    return {g: dist[g] for g in done}


def _free_ball(preset: GroupPresentationPreset, radius: Fraction, cap: int) -> dict:
    ident = preset.identity()
    out = {ident: Fraction(0)}
    frontier = [ident]
    letters = [s for s, _ in preset.generators()]
    while frontier:
        nxt = []
        for g in frontier:
            for s in letters:
                h = preset.multiply(g, s)
                if len(h) <= len(g):
                    continue
                lh = preset.length(h)
                if lh <= radius and h not in out:
                    out[h] = lh
                    nxt.append(h)
                    if len(out) > cap:
                        raise SizeLimitError(f"Cayley ball exceeds {cap} elements")
        frontier = nxt
    return out


def _abelian_ball(preset: GroupPresentationPreset, radius: Fraction, cap: int) -> dict:
    names = preset.generator_names()
    bounds = [int(radius // preset.weight(nm)) for nm in names]
    total = 1
    for b in bounds:
        total *= 2 * b + 1
    if total > 4 * cap:
        raise SizeLimitError("Cayley ball enumeration too large")
    out = {}
    for v in np.ndindex(*[2 * b + 1 for b in bounds]):
        g = tuple(int(c) - b for c, b in zip(v, bounds))
        lg = preset.length(g)
        if lg <= radius:
            out[g] = lg
            if len(out) > cap:
                raise SizeLimitError(f"Cayley ball exceeds {cap} elements")
    return out


def build_cayley_ball(preset: GroupPresentationPreset | str, radius) -> FiniteMetricSpace:
    """Elements at weighted word length <= radius with the left-invariant word metric.

    The metric is the restriction of the group's word metric,
    ``d(g, h) = |g^-1 h|``, not the path metric of the induced subgraph.
    """
    if isinstance(preset, str):
        preset = GroupPresentationPreset.parse(preset)
    radius = Fraction(as_number(radius))
    if radius <= 0:
        raise ValueError("radius must be positive")
    cap = max_points()
    if preset.kind == "free":
        ball = _free_ball(preset, radius, cap)
    elif preset.kind == "free-abelian":
        ball = _abelian_ball(preset, radius, cap)
    else:
        ball = _dijkstra_ball(preset, radius, cap)
    elems = sorted(ball, key=lambda g: (ball[g], repr(preset.label(g))))
    check_size(len(elems), "Cayley ball")
    if preset.length(preset.identity()) is not None:
        lengths = None
    else:
        lengths = _dijkstra_ball(preset, 2 * radius, 64 * cap)
    vals = []
    for g in elems:
        ginv = preset.inverse(g)
        row = []
        for h in elems:
            x = preset.multiply(ginv, h)
            row.append(preset.length(x) if lengths is None else lengths[x])
        vals.append(row)
    name = f"{preset.kind}{preset.param}-ball{radius}"
    space = FiniteMetricSpace(TableMetric.from_values(vals), labels=[preset.label(g) for g in elems],
                              name=name)
    space.group = preset
    space.elements = elems
    return space
