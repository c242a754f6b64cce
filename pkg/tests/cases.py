"""Deterministic construction instances shared by the unit and acceptance tests.

Each builder returns ``(witness, squared distance oracle or None)``.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

import oracles
from coarse_decomp.decomp import (
    ControlFunction,
    MapFamily,
    PointMap,
    Searcher,
    compose,
    compose_search,
    fiber_compose,
    fiber_plan,
    limit_decompose,
    product_decompose,
    projection_map,
    pullback_witness,
    search_decomposition,
    union_decompose,
)
from coarse_decomp.decomp.rearrange import rearrange
from coarse_decomp.spaces import (
    build_cycle,
    build_grid_box,
    build_lattice_points,
    build_path,
    build_product,
)

BRICK = Searcher("shifted-brick")
GREEDY2 = Searcher("greedy", max_families=2)


def composed(X, R, outer=BRICK, inner=BRICK):
    return compose_search(X, R, outer, inner)


def product_case(nx=16, ny=16, R=(2, 2, 2, 2)):
    X, Y = build_grid_box(1, nx), build_grid_box(1, ny)
    w = product_decompose(X, Y, R, BRICK, BRICK)
    return w, oracles.product_sq(oracles.path_sq(nx), oracles.path_sq(ny))


def overlap_union(n=41, a=(0, 20), b=(15, 40), R=(3, 3)):
    """Two overlapping intervals; the excision is the overlap widened by ceil(r)."""
    X = build_path(n)
    parts = [X.subspace(range(a[0], a[1] + 1)), X.subspace(range(b[0], b[1] + 1))]
    lo, hi = b[0], a[1]

    def excise(r):
        c = -(-Fraction(r) // 1)
        return [i for i in range(n) if lo - c <= i <= hi + c]

    return union_decompose(parts, excise, R), oracles.path_sq(n)


def dilation(side=16):
    A, B = build_grid_box(1, side), build_grid_box(1, 2 * side)
    f = PointMap.from_labels(A, B, lambda lab: [2 * lab[0]])
    F = MapFamily((f,), ControlFunction.linear(2), ControlFunction.linear(2))
    return A, B, F


def dilation_pullback(side=16, R=(3, 3)):
    A, B, F = dilation(side)
    S = tuple(F.rho2(r) for r in R)
    wB = search_decomposition(B, S, "shifted-brick")
    return pullback_witness(F, wB, R), oracles.path_sq(side)


def identity_family(X):
    ident = ControlFunction.identity()
    return MapFamily((PointMap.identity(X),), ident, ident)


def projection_fiber(nx=6, ny=12, R=(2, 2, 2, 2, 2, 2)):
    """Fibre construction over the projection of a small product onto a path."""
    X, Y = build_grid_box(1, nx), build_grid_box(1, ny)
    P = build_product(X, Y)
    F = MapFamily((projection_map(P, X, Y),), ControlFunction.identity())
    k = BRICK.family_count(Y, rearrange(R).n_columns)
    _, S = fiber_plan(R, GREEDY2, F, k)
    wY = BRICK(Y.whole, S)
    w = fiber_compose(F, wY, GREEDY2, R)
    return w, oracles.product_sq(oracles.path_sq(nx), oracles.path_sq(ny))


def runs(lengths=(10, 10, 10), gap=6):
    coords, start, out = [], 0, []
    for L in lengths:
        out.append(list(range(len(coords), len(coords) + L)))
        coords.extend(range(start, start + L))
        start += L + gap - 1
    return build_lattice_points([[c] for c in coords]), out, np.asarray(coords)


def limit_case(R=(5,)):
    X, pieces, coords = runs()
    w = limit_decompose(X, lambda r: pieces, R)
    d = np.abs(coords[:, None] - coords[None, :])
    return w, d * d


def trivial_outer_compose(X, R, inner=GREEDY2):
    outer = search_decomposition(X, R[:1], "trivial")
    return compose(outer, inner, R)


# --------------------------------------------------------------------------
# kernel lemma instances


def ball_kernel_on(U, r):
    """Rows on U: the uniform probability on the closed r-ball of x inside U."""
    from coarse_decomp.kernels import Kernel

    X = U.parent
    D = X.raw(U.index, U.index)
    w = np.full((len(U), len(X)), Fraction(0), dtype=object)
    for i in range(len(U)):
        inside = X.le(D[i], r)
        cnt = int(inside.sum())
        for j in np.nonzero(inside)[0]:
            w[i, U.index[j]] = Fraction(1, cnt)
    return Kernel(U, w, Fraction(r))


def lemma_spaces():
    """(name, space, integer distance table) triples with small integral metrics."""
    p = build_path(24)
    c = build_cycle(20)
    g = build_grid_box(2, 6)
    return [
        ("path-24", p, np.sqrt(oracles.path_sq(24)).astype(np.int64)),
        ("cycle-20", c, np.sqrt(oracles.cycle_sq(20)).astype(np.int64)),
        ("grid-6x6", g, np.sqrt(oracles.grid_sq(g.labels, "l1")).astype(np.int64)),
    ]


def lemma_instances():
    """Enumerated (no randomness) parameter choices for the kernel lemmas."""
    out = []
    for name, X, D in lemma_spaces():
        n = len(X)
        subsets = [("head", list(range(0, n // 3))), ("middle", list(range(n // 3, 2 * n // 3))),
                   ("sparse", list(range(0, n, 5)))]
        for (uname, members), (R, r) in zip(
                subsets * 3, [(Fraction(1), 1), (Fraction(3, 2), 2), (Fraction(3), 1),
                              (Fraction(4), 3), (Fraction(5, 2), 2), (Fraction(2), 0),
                              (Fraction(6), 2), (Fraction(7, 2), 3), (Fraction(1), 0)]):
            out.append({"space": name, "X": X, "D": D, "U": X.subspace(members),
                        "uname": uname, "R": R, "r": r})
    return out


def _rows(k):
    return [list(r) for r in k.weights]


def lemma_checks(inst):
    """Every kernel-lemma property for one instance, checked against the oracles.

    Returns ``{property: bool}``.  All arithmetic is exact.
    """
    from coarse_decomp.kernels import (
        Kernel,
        cutoff,
        extend,
        measure_variation,
        normalize,
        sum_kernels,
    )

    X, D, U, R, r = inst["X"], inst["D"], inst["U"], inst["R"], inst["r"]
    D2 = D * D
    n = len(X)
    res = {}

    # variation measurement agrees with the brute-force scan
    xi = ball_kernel_on(U, r)
    sub = np.ix_(U.index, U.index)
    eps = measure_variation(xi).epsilon
    res["variation-exact"] = eps == oracles.variation(_rows(xi), D2[sub])

    # sum: subadditive
    other = ball_kernel_on(U, r + 1)
    total = sum_kernels([xi, other])
    eps_sum = oracles.variation(_rows(total), D2[sub])
    res["sum-subadditive"] = eps_sum <= eps + oracles.variation(_rows(other), D2[sub])

    # normalize: exact norms and factor at most 2 (scaled rows keep norm >= 1)
    scale = np.array([[Fraction(1 + (i % 3))] for i in range(len(U))], dtype=object)
    raw = Kernel(U, total.weights * scale, total.support_radius)
    nk = normalize(raw)
    res["normalize-normed"] = all(sum(row, Fraction(0)) == 1 for row in _rows(nk))
    res["normalize-factor"] = (oracles.variation(_rows(nk), D2[sub])
                               <= 2 * oracles.variation(_rows(raw), D2[sub]))

    # extend: eta and the four postconditions
    ext = extend(xi, R)
    eta = cutoff(U, R)
    res["eta-reference"] = list(eta) == oracles.eta_reference(D, list(U.index), R)
    res["eta-lipschitz"] = all(abs(eta[a] - eta[b]) <= Fraction(int(D[a, b])) / R
                               for a in range(n) for b in range(a + 1, n))
    dU = D[:, U.index].min(axis=1)
    rows = _rows(ext)
    res["extend-vanishes"] = all(all(v == 0 for v in rows[x]) for x in range(n) if dU[x] >= R)
    res["extend-restricts"] = all(rows[u] == list(xi.weights[i]) for i, u in enumerate(U.index))
    bound = (2 * R + 1) * eps + 1 / R
    res["extend-variation"] = oracles.variation(rows, D2) <= bound
    supp = max((int(D[x, y]) for x in range(n) for y in range(n) if rows[x][y] > 0), default=0)
    res["extend-support"] = supp <= R + xi.support_radius and ext.support_radius == R + xi.support_radius
    return res


# --------------------------------------------------------------------------
# chains


def tamper(chain, stage):
    """Copy of ``chain`` with one point removed from an element of ``stage``.

    The residual is preferred (it is the last element to be carved); any
    element with two or more points will do otherwise.
    """
    from coarse_decomp.metric import Subspace
    from coarse_decomp.sfdc import SfdcChain

    elems = list(chain.stages[stage])
    big = [n for n, p in enumerate(elems) if len(p) > 1]
    if not big:
        return None
    n = max(big, key=lambda j: (len(elems[j]), j))
    p = elems[n]
    elems[n] = Subspace(p.parent, p.members[:-1])
    stages = list(chain.stages)
    stages[stage] = tuple(elems)
    return SfdcChain(chain.source, tuple(stages), chain.link_gaps, chain.links, chain.final_bound)
