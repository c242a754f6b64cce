"""Control functions and coarse maps between finite spaces."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from ..errors import ControlFunctionViolationError
from ..metric import FLOAT_TOL, FiniteMetricSpace, as_number


@dataclass(frozen=True)
class ControlFunction:
    """Nondecreasing piecewise-linear function on [0, inf).

    Breakpoints are ``(t, value)`` pairs starting at ``t = 0``; beyond the
    last breakpoint the final segment is extended (a single breakpoint means
    a constant).  ``proper`` asserts that the value tends to infinity.
    """

    breakpoints: tuple
    proper: bool = False

    def __post_init__(self):
        pts = tuple((Fraction(as_number(t)), Fraction(as_number(v))) for t, v in self.breakpoints)
        if not pts or pts[0][0] != 0:
            raise ValueError("breakpoints must start at t = 0")
        for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
            if t1 <= t0:
                raise ValueError("breakpoint abscissae must increase")
            if v1 < v0:
                raise ValueError("control functions must be nondecreasing")
        if pts[0][1] < 0:
            raise ValueError("control functions take nonnegative values")
        if self.proper and (len(pts) < 2 or pts[-1][1] <= pts[-2][1]):
            raise ValueError("a proper control function needs a rising last segment")
        object.__setattr__(self, "breakpoints", pts)

    @classmethod
    def linear(cls, slope, intercept=0, proper: bool | None = None) -> "ControlFunction":
        slope, intercept = Fraction(as_number(slope)), Fraction(as_number(intercept))
        if proper is None:
            proper = slope > 0
        return cls(((0, intercept), (1, intercept + slope)), proper=proper)

    @classmethod
    def identity(cls) -> "ControlFunction":
        return cls.linear(1)

    def __call__(self, t):
        pts = self.breakpoints
        exact = not isinstance(t, float)
        tt = Fraction(t) if exact else t
        if len(pts) == 1:
            v = pts[0][1]
            return v if exact else float(v)
        for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
            if tt <= t1:
                break
        slope = (v1 - v0) / (t1 - t0)
        if exact:
            return v0 + slope * (tt - t0)
        return float(v0) + float(slope) * (tt - float(t0))

    def sup_preimage(self, bound) -> Fraction:
        """``sup{t : rho(t) <= bound}`` for a proper function."""
        if not self.proper:
            raise ValueError("sup_preimage needs a proper control function")
        b = Fraction(bound) if not isinstance(bound, float) else Fraction(bound)
        pts = self.breakpoints
        if b < pts[0][1]:
            return Fraction(0)
        segs = list(zip(pts, pts[1:]))
        t_last, v_last = pts[-1]
        (t0, v0), _ = segs[-1]
        slope = (v_last - v0) / (t_last - t0)
        if b >= v_last:
            return t_last + (b - v_last) / slope
        for (t0, v0), (t1, v1) in reversed(segs):
            if v0 <= b:
                if v1 == v0:
                    return t1
                return t0 + (b - v0) * (t1 - t0) / (v1 - v0)
        return Fraction(0)

    def to_json(self) -> dict:
        return {"breakpoints": [[str(t), str(v)] for t, v in self.breakpoints],
                "proper": self.proper}

    @classmethod
    def from_json(cls, payload: dict) -> "ControlFunction":
        return cls(tuple(tuple(p) for p in payload["breakpoints"]), bool(payload.get("proper", False)))


@dataclass(frozen=True, eq=False)
class PointMap:
    """A map of point indices ``domain -> codomain``."""

    domain: FiniteMetricSpace
    codomain: FiniteMetricSpace
    image: tuple

    def __post_init__(self):
        img = tuple(int(v) for v in self.image)
        if len(img) != len(self.domain):
            raise ValueError("image must list one codomain point per domain point")
        if img and (min(img) < 0 or max(img) >= len(self.codomain)):
            raise ValueError("image point out of range")
        object.__setattr__(self, "image", img)

    @classmethod
    def from_labels(cls, domain: FiniteMetricSpace, codomain: FiniteMetricSpace,
                    fn: Callable) -> "PointMap":
        """Build a map from a function on point labels."""
        lookup = {_hashable(lab): i for i, lab in enumerate(codomain.labels)}
        return cls(domain, codomain, tuple(lookup[_hashable(fn(lab))] for lab in domain.labels))

    @classmethod
    def identity(cls, space: FiniteMetricSpace) -> "PointMap":
        return cls(space, space, tuple(range(len(space))))

    def preimage(self, members) -> list[int]:
        target = set(members)
        return [x for x, y in enumerate(self.image) if y in target]


def _hashable(x):
    if isinstance(x, list):
        return tuple(_hashable(v) for v in x)
    if isinstance(x, tuple):
        return tuple(_hashable(v) for v in x)
    return x


@dataclass(frozen=True, eq=False)
class MapFamily:
    """Maps sharing the control functions rho1 (lower) and rho2 (upper)."""

    maps: tuple
    rho2: ControlFunction
    rho1: ControlFunction | None = None

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))


def control_violations(F: MapFamily, limit: int = 100) -> list[tuple]:
    """Every pair breaking ``rho1(d) <= d(f x, f x') <= rho2(d)``, checked exhaustively.

    Exact whenever the domain metric is exact and linear; otherwise the
    control values are doubles and a 1e-9 guard applies.
    """
    out = []
    for mi, f in enumerate(F.maps):
        X, Y = f.domain, f.codomain
        img = np.asarray(f.image, dtype=np.int64)
        pts = np.arange(len(X))
        exact_domain = X.exact and not X.squared
        for sl, block in X.iter_blocks(pts, pts):
            cod = Y.raw(img[sl], img).ravel()
            # group pair positions by domain distance so each pair is compared once
            uniq, inv = np.unique(block.ravel(), return_inverse=True)
            order = np.argsort(inv, kind="stable")
            cuts = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
            for g, u in enumerate(uniq):
                pos = order[cuts[g]:cuts[g + 1]]
                t = X.value(u)
                upper = F.rho2(t)
                lower = F.rho1(t) if F.rho1 is not None else None
                if not exact_domain:
                    upper = float(upper) + FLOAT_TOL
                    lower = None if lower is None else float(lower) - FLOAT_TOL
                vals = cod[pos]
                bad = ~Y.le(vals, upper)
                if lower is not None:
                    bad |= ~Y.ge(vals, lower)
                for p in np.sort(pos[bad]):
                    i, j = divmod(int(p), len(X))
                    out.append((mi, X.ids[pts[sl][i]], X.ids[j], t))
                    if len(out) >= limit:
                        return out
    return out


def check_controls(F: MapFamily) -> None:
    bad = control_violations(F, limit=5)
    if bad:
        raise ControlFunctionViolationError(f"control bounds fail on pairs {bad}")
