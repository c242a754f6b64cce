"""Nonnegative kernels X -> l1(X): variation, sums, normalisation, extension, assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .decomp.witness import DecompositionWitness
from .errors import NormDeficitError
from .metric import (
    FLOAT_TOL,
    FiniteMetricSpace,
    Number,
    Subspace,
    as_number,
    bounded_geometry_profile,
    distance_to_set_raw,
)


def _fraction_array(values, shape=None) -> np.ndarray:
    flat = list(values)
    out = np.empty(len(flat), dtype=object)
    out[:] = flat
    return out if shape is None else out.reshape(shape)


def _zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        return _fraction_array([Fraction(0)] * int(np.prod(shape)), shape)
    return np.zeros(shape, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Kernel:
    """Rows ``xi_x`` for x in ``domain``; columns index every point of the parent.

    ``weights`` is an object array of Fractions (exact mode) or float64.
    ``support_radius`` is the declared S with supp xi_x inside the closed ball B(x, S).
    """

    domain: Subspace
    weights: np.ndarray
    support_radius: Number = Fraction(0)

    def __post_init__(self):
        w = self.weights
        if w.shape != (len(self.domain), len(self.space)):
            raise ValueError("weights must have one row per domain point and one column per space point")
        if self.exact:
            if any(v < 0 for v in w.ravel()):
                raise ValueError("kernel weights must be nonnegative")
        elif (w < 0).any():
            raise ValueError("kernel weights must be nonnegative")

    @property
    def space(self) -> FiniteMetricSpace:
        return self.domain.parent

    @property
    def exact(self) -> bool:
        return self.weights.dtype == object

    def as_float(self) -> np.ndarray:
        return self.weights.astype(np.float64)

    def norms(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def row(self, x: int) -> np.ndarray:
        """Row of domain point with parent index ``x``."""
        return self.weights[int(np.searchsorted(self.domain.index, x))]

    def is_normed(self) -> bool:
        n = self.norms()
        if self.exact:
            return all(v == 1 for v in n)
        return bool(np.all(np.abs(n - 1.0) <= FLOAT_TOL))

    def measured_support_radius(self) -> Number:
        X = self.space
        best = 0
        for sl, block in X.iter_blocks(self.domain.index, np.arange(len(X))):
            nz = self.as_float()[sl] > 0
            if nz.any():
                best = max(best, block[nz].max())
        return X.value(best)


def dirac_kernel(X: FiniteMetricSpace, exact: bool = True) -> Kernel:
    n = len(X)
    w = _zeros((n, n), exact)
    for i in range(n):
        w[i, i] = Fraction(1) if exact else 1.0
    return Kernel(X.whole, w, Fraction(0))


def constant_kernel(X: FiniteMetricSpace, point: int = 0) -> Kernel:
    n = len(X)
    w = _zeros((n, n), True)
    w[:, point] = Fraction(1)
    return Kernel(X.whole, w, X.value(X.raw([point], np.arange(n)).max()))


def uniform_kernel(U: Subspace, exact: bool = True) -> Kernel:
    """Every point of U gets the uniform probability on U: variation 0, S = diam U."""
    X = U.parent
    m = len(U)
    w = _zeros((m, len(X)), exact)
    val = Fraction(1, m) if exact else 1.0 / m
    for c in U.index:
        w[:, c] = val
    S = X.value(max(b.max() for _, b in X.iter_blocks(U.index, U.index)))
    return Kernel(U, w, S)


def ball_kernel(X: FiniteMetricSpace, r: Number, exact: bool = True) -> Kernel:
    """xi_x = indicator of the closed ball B(x, r), normalised."""
    n = len(X)
    allpts = np.arange(n)
    w = _zeros((n, n), exact)
    for sl, block in X.iter_blocks(allpts, allpts):
        inside = X.le(block, r)
        for i, row in zip(range(sl.start, sl.stop), inside):
            cnt = int(row.sum())
            val = Fraction(1, cnt) if exact else 1.0 / cnt
            w[i, row] = val
    return Kernel(X.whole, w, as_number(r))


# --------------------------------------------------------------------------
# variation


@dataclass(frozen=True)
class VariationReport:
    epsilon: Number
    worst_pair: tuple | None = None
    k: int | None = None
    difference: Number | None = None


def _l1(a: np.ndarray, b: np.ndarray):
    if a.dtype == object:
        return sum((abs(x - y) for x, y in zip(a, b)), Fraction(0))
    return float(np.abs(a - b).sum())


def measure_variation(xi: Kernel) -> VariationReport:
    """Smallest eps with ||xi_x - xi_y||_1 <= ceil(d(x, y)) * eps for all pairs.

    A double scan over all pairs finds the near-maximal pairs; in exact mode
    those are recomputed with rationals and the exact maximum is returned.
    """
    X = xi.space
    idx = xi.domain.index
    m = len(idx)
    if m < 2:
        return VariationReport(Fraction(0) if xi.exact else 0.0)
    F = xi.as_float()
    cols = np.nonzero((F > 0).any(axis=0))[0]
    F = F[:, cols]
    ratios = np.zeros((m, m), dtype=np.float64)
    kmat = np.zeros((m, m), dtype=np.int64)
    for sl, block in X.iter_blocks(idx, idx):
        kmat[sl] = X.ceil_dist(block)
    for i in range(m - 1):
        diff = np.abs(F[i][None, :] - F[i + 1:]).sum(axis=1)
        ratios[i, i + 1:] = diff / kmat[i, i + 1:]
    top = ratios.max()
    if top == 0:
        return VariationReport(Fraction(0) if xi.exact else 0.0)
    if not xi.exact:
        i, j = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
        k = int(kmat[i, j])
        return VariationReport(float(top), (X.ids[idx[i]], X.ids[idx[j]]), k, float(top) * k)
    best = None
    for i, j in zip(*np.nonzero(ratios >= top - 1e-9 * max(1.0, top))):
        k = int(kmat[i, j])
        diff = _l1(xi.weights[i], xi.weights[j])
        r = diff / k
        if best is None or r > best[0]:
            best = (r, (X.ids[idx[i]], X.ids[idx[j]]), k, diff)
    return VariationReport(*best)


# --------------------------------------------------------------------------
# lemmas


def sum_kernels(parts: Sequence[Kernel]) -> Kernel:
    """Pointwise sum over a common domain; support radius is the max."""
    if not parts:
        raise ValueError("nothing to sum")
    dom = parts[0].domain
    for p in parts:
        if p.domain != dom:
            raise ValueError("kernels must share their domain")
    exact = all(p.exact for p in parts)
    total = _zeros(parts[0].weights.shape, exact)
    for p in parts:
        total = total + (p.weights if exact else p.as_float())
    return Kernel(dom, total, max(p.support_radius for p in parts))


def normalize(xi: Kernel) -> Kernel:
    """Divide each row by its l1 norm; every norm must be at least 1."""
    n = xi.norms()
    if xi.exact:
        short = [i for i, v in enumerate(n) if v < 1]
    else:
        short = list(np.nonzero(n < 1 - FLOAT_TOL)[0])
    if short:
        X = xi.space
        pts = [X.ids[xi.domain.index[i]] for i in short]
        raise NormDeficitError(pts)
    w = xi.weights / n[:, None]
    return Kernel(xi.domain, w, xi.support_radius)


def cutoff(U: Subspace, R: Number) -> np.ndarray:
    """eta(x) = 1 on U, min(1, d(x, X - N(U, R)) / R) elsewhere.

    N(U, R) is the open R-neighbourhood.  The clip at 1 only matters where
    the complement is far away or empty (finite boundaries); it keeps eta
    1/R-Lipschitz and leaves its values on U and outside N(U, R) unchanged.
    """
    X = U.parent
    R = as_number(R)
    near = X.lt(distance_to_set_raw(X, U.index), R)
    far = np.nonzero(~near)[0]
    exact = X.exact and not X.squared and not isinstance(R, float)
    n = len(X)
    if len(far) == 0:
        return _fraction_array([Fraction(1)] * n) if exact else np.ones(n)
    draw = distance_to_set_raw(X, far)
    if exact:
        vals = [min(Fraction(1), X.value(v) / R) for v in draw]
        eta = _fraction_array(vals)
        eta[U.index] = Fraction(1)
        return eta
    d = X.values(draw).astype(np.float64)
    eta = np.minimum(1.0, d / float(R))
    eta[U.index] = 1.0
    return eta


def nearest_in(U: Subspace) -> np.ndarray:
    """For every point, the index (into U) of its nearest point of U; ties to the smaller id."""
    X = U.parent
    out = np.empty(len(X), dtype=np.int64)
    for sl, block in X.iter_blocks(np.arange(len(X)), U.index):
        out[sl] = np.argmin(block, axis=1)
    return out


def extend(xi: Kernel, R: Number, target: Subspace | None = None) -> Kernel:
    """Extend a kernel on U to the whole space: xi'_x = eta(x) xi_{u(x)}.

    u(x) is the nearest point of U (smallest id on ties); the extension is
    supported on the open R-neighbourhood of U and has support radius R + S.
    """
    U = xi.domain
    X = U.parent
    R = as_number(R)
    eta = cutoff(U, R)
    u = nearest_in(U)
    tgt = X.whole if target is None else target
    exact = xi.exact and eta.dtype == object
    base = xi.weights if exact else xi.as_float()
    rows = base[u[tgt.index]]
    e = eta[tgt.index]
    w = rows * e[:, None] if exact else rows * e.astype(np.float64)[:, None]
    return Kernel(tgt, w, R + xi.support_radius)


# --------------------------------------------------------------------------
# bounds and schedule


def nominal_bound(R: Sequence, eps: Sequence) -> Number:
    """E = 2 * sum((2 R_i + 1) eps_i + 1 / R_i)."""
    total = 0
    for r, e in zip(R, eps):
        r, e = as_number(r), as_number(e)
        total += (2 * r + 1) * e + 1 / r
    return 2 * total


def used_radii_bound(radii: Sequence, eps: Sequence) -> Number:
    """Bound on the assembled kernel's variation for extension radii rho_i <= R_i / 2.

    Per family, a pair meets at most one piece each; a single extension costs
    (2 rho + 1) eps + 1 / rho and two different pieces cost at most 2 / rho.
    Normalisation doubles the sum.
    """
    total = 0
    for rho, e in zip(radii, eps):
        rho, e = as_number(rho), as_number(e)
        total += max((2 * rho + 1) * e + 1 / rho, 2 / rho)
    return 2 * total


@dataclass(frozen=True)
class ScheduleParams:
    N: int
    R: tuple
    eps: tuple


def schedule(N: int, depth: int) -> ScheduleParams:
    """R_i = 2^(i+1) N and eps_i = 1 / (4^(i+2) N) for i = 1..depth."""
    if N < 1:
        raise ValueError("N must be a positive integer")
    R = tuple(Fraction(2 ** (i + 1) * N) for i in range(1, depth + 1))
    eps = tuple(Fraction(1, 4 ** (i + 2) * N) for i in range(1, depth + 1))
    return ScheduleParams(N, R, eps)


# --------------------------------------------------------------------------
# assembly


@dataclass
class Assembly:
    kernel: Kernel
    nominal_E: Number
    used_bound: Number
    radii: tuple
    family_eps: tuple
    family_support: tuple
    measured: VariationReport | None = None
    notes: list = field(default_factory=list)


def assemble(w: DecompositionWitness, piece_kernels: Callable | None = None,
             radii: Sequence | None = None, measure: bool = True) -> Assembly:
    """Glue per-piece kernels along a witness into one normed kernel on its source.

    ``piece_kernels(piece, family_index)`` returns a normed kernel on the
    piece (default: the uniform kernel).  Extension radii default to R_i / 2.
    """
    X = w.space
    src = w.source
    exact_space = X.exact and not X.squared
    if radii is None:
        radii = tuple(as_number(r) / 2 for r in w.R[:w.k])
    radii = tuple(as_number(r) for r in radii)
    notes = []
    ext_parts = []
    fam_eps, fam_S = [], []
    fallback = 0
    for i, fam in enumerate(w.families):
        eps_i, S_i = Fraction(0), Fraction(0)
        for piece in fam.pieces:
            k = uniform_kernel(piece, exact_space) if piece_kernels is None else piece_kernels(piece, i)
            if not k.is_normed():
                raise ValueError(f"piece kernel on {piece!r} is not normed")
            e = measure_variation(k).epsilon
            eps_i = max(eps_i, e)
            S_i = max(S_i, k.support_radius)
            fallback += (2 * radii[i] + 1) * e + 1 / radii[i]
            ext_parts.append(extend(k, radii[i], target=src))
        fam_eps.append(eps_i)
        fam_S.append(S_i)
    raw = sum_kernels(ext_parts)
    kern = normalize(raw)
    declared = max(radii) + max(fam_S)
    kern = Kernel(kern.domain, kern.weights, declared)
    E = nominal_bound(w.R[:w.k], fam_eps)
    if all(rho <= as_number(r) / 2 for rho, r in zip(radii, w.R)):
        used = used_radii_bound(radii, fam_eps)
    else:
        used = 2 * fallback
        notes.append("radii exceed R_i/2: bound sums over every piece")
    rep = measure_variation(kern) if measure else None
    return Assembly(kern, E, used, radii, tuple(fam_eps), tuple(fam_S), rep, notes)


# --------------------------------------------------------------------------
# uniform property A


@dataclass
class PropertyAVerdict:
    ok: bool
    S: Number
    members: list
    failures: list

    def __bool__(self) -> bool:
        return self.ok


def check_uniform_property_a(spaces: Sequence[FiniteMetricSpace], epsilon: Number,
                             builder: Callable[[FiniteMetricSpace], Kernel]) -> PropertyAVerdict:
    """Every built kernel must be normed with variation <= epsilon; S is the
    largest measured support radius over the family."""
    epsilon = as_number(epsilon)
    members, failures = [], []
    S = Fraction(0)
    for X in spaces:
        k = builder(X)
        rep = measure_variation(k)
        radius = k.measured_support_radius()
        profile = bounded_geometry_profile(X, [max(radius, Fraction(1))])
        row = {"space": X.name, "points": len(X), "epsilon": rep.epsilon,
               "supportRadius": radius, "normed": k.is_normed(),
               "ballSize": profile.counts[0]}
        members.append(row)
        S = max(S, radius)
        if not row["normed"]:
            failures.append((X.name, "kernel is not normed"))
        tol = FLOAT_TOL if isinstance(rep.epsilon, float) else 0
        if rep.epsilon > epsilon + tol:
            failures.append((X.name, f"variation {rep.epsilon} exceeds {epsilon}"))
    return PropertyAVerdict(not failures, S, members, failures)


def schedule_kernel_builder(N: int, strategy: str = "shifted-brick", depth: int | None = None):
    """Kernel builder running the whole pipeline: schedule -> witness -> assemble."""
    from .decomp.search import search_decomposition

    def build(X: FiniteMetricSpace) -> Kernel:
        coords = X.metric.grid_coords
        d = depth if depth is not None else (coords.shape[1] + 1 if coords is not None else 2)
        params = schedule(N, d)
        w = search_decomposition(X, params.R, strategy)
        return assemble(w, measure=False).kernel

    return build
