"""Rotations and the skew-shift on the torus.

Points are tuples of doubles in [0, 1).  Maps are evaluated in exact
rational arithmetic (alpha is replaced by ``AlphaRep.exact_value()``) and
rounded once.  A point produced by a step remembers its exact coordinates,
so n single steps reproduce T^n(w) bit for bit instead of drifting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .diophantine import AlphaRep


def _wrap(x: float) -> float:
    y = x % 1.0
    # (-tiny) % 1.0 rounds up to 1.0
    return 0.0 if y >= 1.0 else y


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple[float, ...]
    # exact coordinates in [0, 1) when known; equality ignores them
    exact: Optional[tuple[Fraction, ...]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(self.coords) < 1:
            raise ValueError("a torus point needs at least one coordinate")
        object.__setattr__(self, "coords", tuple(_wrap(float(c)) for c in self.coords))
        if self.exact is None:
            object.__setattr__(self, "exact", tuple(Fraction(c) for c in self.coords))
        elif len(self.exact) != len(self.coords):
            raise ValueError("exact shadow has the wrong dimension")

    @classmethod
    def from_exact(cls, values: Iterable[Fraction]) -> "TorusPoint":
        ex = tuple(Fraction(v) % 1 for v in values)
        return cls(tuple(_round(v) for v in ex), ex)

    @classmethod
    def of(cls, *coords: float) -> "TorusPoint":
        return cls(tuple(coords))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __getitem__(self, i: int) -> float:
        return self.coords[i]

    def __iter__(self):
        return iter(self.coords)

    def array(self) -> np.ndarray:
        return np.array(self.coords)


def circle_dist(x, y):
    """Elementwise circle distance min(|x-y|, 1-|x-y|) of values in [0, 1)."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return np.minimum(d, 1.0 - d)


def torus_dist(x: TorusPoint, y: TorusPoint) -> float:
    """Sup over coordinates of the circle distance."""
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    return float(np.max(circle_dist(x.coords, y.coords)))


def torus_dist_rows(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise torus_dist for (N, d) arrays."""
    return circle_dist(X, Y).max(axis=-1)


def _as_alphas(alpha) -> tuple[AlphaRep, ...]:
    if isinstance(alpha, AlphaRep):
        return (alpha,)
    return tuple(alpha)


def _round(x: Fraction) -> float:
    return _wrap(float(x % 1))


def rotation_step(w: TorusPoint, alpha) -> TorusPoint:
    alphas = _as_alphas(alpha)
    if len(alphas) != w.dim:
        raise ValueError(f"dimension mismatch: point has {w.dim}, alpha has {len(alphas)}")
    return TorusPoint.from_exact(c + a.exact_value() for c, a in zip(w.exact, alphas))


def rotation_inverse_step(w: TorusPoint, alpha) -> TorusPoint:
    alphas = _as_alphas(alpha)
    if len(alphas) != w.dim:
        raise ValueError(f"dimension mismatch: point has {w.dim}, alpha has {len(alphas)}")
    return TorusPoint.from_exact(c - a.exact_value() for c, a in zip(w.exact, alphas))


def skew_step(w: TorusPoint, alpha: AlphaRep) -> TorusPoint:
    """T(w1, w2) = (w1 + 2 alpha, w1 + w2)."""
    if w.dim != 2:
        raise ValueError("the skew-shift acts on the 2-torus")
    w1, w2 = w.exact
    return TorusPoint.from_exact((w1 + 2 * alpha.exact_value(), w1 + w2))


def skew_inverse_step(w: TorusPoint, alpha: AlphaRep) -> TorusPoint:
    if w.dim != 2:
        raise ValueError("the skew-shift acts on the 2-torus")
    x1 = w.exact[0] - 2 * alpha.exact_value()
    return TorusPoint.from_exact((x1, w.exact[1] - x1))


def skew_iterate(w: TorusPoint, alpha: AlphaRep, n: int) -> TorusPoint:
    """T^n(w) = (w1 + 2n alpha, w2 + n w1 + n(n-1) alpha), valid for all integers n."""
    if w.dim != 2:
        raise ValueError("the skew-shift acts on the 2-torus")
    a = alpha.exact_value()
    w1, w2 = w.exact
    return TorusPoint.from_exact((w1 + 2 * n * a, w2 + n * w1 + n * (n - 1) * a))


def rotation_iterate(w: TorusPoint, alpha, n: int) -> TorusPoint:
    alphas = _as_alphas(alpha)
    if len(alphas) != w.dim:
        raise ValueError(f"dimension mismatch: point has {w.dim}, alpha has {len(alphas)}")
    return TorusPoint.from_exact(c + n * a.exact_value() for c, a in zip(w.exact, alphas))


# -- vectorised exact orbits ---------------------------------------------------


def _common(*fracs: Fraction) -> tuple[list[int], int]:
    den = 1
    for f in fracs:
        den = den * f.denominator // math.gcd(den, f.denominator)
    return [f.numerator * (den // f.denominator) for f in fracs], den


def _to_unit_floats(nums: np.ndarray, den: int) -> np.ndarray:
    # int / int is correctly rounded in CPython
    out = np.fromiter((int(v) / den for v in nums), dtype=float, count=len(nums))
    out[out >= 1.0] = 0.0
    return out


@dataclass(frozen=True)
class DynSystem:
    """A torus map: ``rotation`` by alpha_vec on T^d, or ``skew`` on T^2."""

    kind: str
    alpha: tuple[AlphaRep, ...]

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_alphas(self.alpha))
        if self.kind not in ("rotation", "skew"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        if not self.alpha:
            raise ValueError("a system needs at least one alpha")
        if self.kind == "skew" and len(self.alpha) != 1:
            raise ValueError("the skew-shift takes a single alpha")

    @classmethod
    def rotation(cls, *alphas: AlphaRep) -> "DynSystem":
        if len(alphas) == 1 and not isinstance(alphas[0], AlphaRep):
            alphas = tuple(alphas[0])
        return cls("rotation", tuple(alphas))

    @classmethod
    def skew(cls, alpha: AlphaRep) -> "DynSystem":
        return cls("skew", (alpha,))

    @property
    def dim(self) -> int:
        return 2 if self.kind == "skew" else len(self.alpha)

    def describe(self) -> dict:
        return {"kind": self.kind, "alpha": [a.text for a in self.alpha]}

    def _check(self, w: TorusPoint):
        if w.dim != self.dim:
            raise ValueError(f"dimension mismatch: point has {w.dim}, system has {self.dim}")

    def step(self, w: TorusPoint) -> TorusPoint:
        self._check(w)
        if self.kind == "skew":
            return skew_step(w, self.alpha[0])
        return rotation_step(w, self.alpha)

    def inverse_step(self, w: TorusPoint) -> TorusPoint:
        self._check(w)
        if self.kind == "skew":
            return skew_inverse_step(w, self.alpha[0])
        return rotation_inverse_step(w, self.alpha)

    def iterate(self, w: TorusPoint, n: int) -> TorusPoint:
        self._check(w)
        if self.kind == "skew":
            return skew_iterate(w, self.alpha[0], n)
        return rotation_iterate(w, self.alpha, n)

    def orbit(self, w: TorusPoint, lo: int, hi: int) -> np.ndarray:
        """Array of shape (hi - lo + 1, d) whose row i is T^(lo+i)(w)."""
        self._check(w)
        if hi < lo:
            raise ValueError("empty orbit range")
        n = np.arange(lo, hi + 1, dtype=np.int64).astype(object)
        out = np.empty((len(n), self.dim))
        if self.kind == "rotation":
            for i, (c, a) in enumerate(zip(w.exact, self.alpha)):
                (cn, an), den = _common(c, a.exact_value())
                out[:, i] = _to_unit_floats((cn + n * an) % den, den)
            return out
        (c1, c2, an), den = _common(w.exact[0], w.exact[1], self.alpha[0].exact_value())
        out[:, 0] = _to_unit_floats((c1 + 2 * n * an) % den, den)
        out[:, 1] = _to_unit_floats((c2 + n * c1 + n * (n - 1) * an) % den, den)
        return out


def point(coords: Iterable[float] | float) -> TorusPoint:
    if isinstance(coords, (int, float)):
        return TorusPoint((float(coords),))
    return TorusPoint(tuple(float(c) for c in coords))


def as_points(rows: Sequence[Sequence[float]]) -> list[TorusPoint]:
    return [TorusPoint(tuple(r)) for r in rows]
