"""Dynamically defined potentials, Gordon certification and tube flattening."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .diophantine import AlphaRep
from .dynsys import DynSystem, TorusPoint, circle_dist, rotation_iterate
from .repetition import worst_distance

TAU = 2.0 * math.pi


class WindowError(ValueError):
    """A window does not cover the indices an operation needs."""


# -- sampling functions --------------------------------------------------------


@dataclass(frozen=True)
class SampleFunction:
    """A bounded function on the torus, evaluated row-wise on (N, d) arrays."""

    fn: Callable[[np.ndarray], np.ndarray]
    sup_bound: float
    lipschitz: Optional[float] = None
    name: str = "f"

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.fn(x), dtype=float).reshape(len(x))

    def scalar(self, x) -> float:
        return float(self(np.atleast_1d(np.asarray(x, dtype=float))[None, :])[0])

    @classmethod
    def cosine(cls, axis: int = 0) -> "SampleFunction":
        return cls(lambda x: np.cos(TAU * x[:, axis]), 1.0, TAU, f"cos:{axis}")

    @classmethod
    def constant(cls, c: float) -> "SampleFunction":
        c = float(c)
        return cls(lambda x: np.full(len(x), c), abs(c), 0.0, f"constant:{c!r}")

    @classmethod
    def sinsum(cls) -> "SampleFunction":
        """sin(2 pi x_0) + sin(2 pi x_1); on a 2-torus rotation this is sin(an) + sin(bn)."""
        return cls(lambda x: np.sin(TAU * x[:, 0]) + np.sin(TAU * x[:, 1]), 2.0, 2 * TAU, "sinsum")


# -- windows -------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialWindow:
    lo: int
    hi: int
    values: np.ndarray
    sup_bound: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if self.lo > 0 or self.hi < 0:
            raise ValueError("window must contain n = 0")
        if len(v) != self.hi - self.lo + 1:
            raise ValueError("values do not match [lo, hi]")
        if not np.all(np.isfinite(v)) or np.max(np.abs(v), initial=0.0) > self.sup_bound * (1 + 1e-12):
            raise ValueError("potential must be bounded")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, lo: int, values: Sequence[float], sup_bound: float | None = None) -> "PotentialWindow":
        v = np.asarray(values, dtype=float)
        bound = float(np.max(np.abs(v))) if sup_bound is None else float(sup_bound)
        return cls(int(lo), int(lo) + len(v) - 1, v, bound)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], lo: int, hi: int,
                      sup_bound: float | None = None) -> "PotentialWindow":
        n = np.arange(lo, hi + 1)
        return cls.from_values(lo, fn(n), sup_bound)

    def covers(self, a: int, b: int) -> bool:
        return self.lo <= a and b <= self.hi

    def require(self, a: int, b: int, what: str = "operation") -> None:
        if not self.covers(a, b):
            raise WindowError(f"{what} needs indices [{a}, {b}], window is [{self.lo}, {self.hi}]")

    def __call__(self, n):
        """V(n) for an integer or integer array n inside the window."""
        n = np.asarray(n)
        outside = (n < self.lo) | (n > self.hi)
        if np.any(outside):
            bad = int(np.atleast_1d(n)[np.atleast_1d(outside)][0])
            raise WindowError(f"index {bad} outside window [{self.lo}, {self.hi}]")
        return self.values[n - self.lo]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "V"])
        for n, v in zip(range(self.lo, self.hi + 1), self.values):
            w.writerow([n, f"{v:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, sup_bound: float | None = None) -> "PotentialWindow":
        rows = list(csv.DictReader(io.StringIO(text)))
        n = [int(r["n"]) for r in rows]
        if n != list(range(n[0], n[0] + len(n))):
            raise ValueError("CSV indices must be consecutive")
        return cls.from_values(n[0], [float(r["V"]) for r in rows], sup_bound)


def sample_potential(f: SampleFunction, sys: DynSystem, w: TorusPoint, lo: int, hi: int) -> PotentialWindow:
    """V(n) = f(T^n w) for lo <= n <= hi; negative n go through the inverse map."""
    if lo > 0 or hi < 0:
        raise ValueError("need lo <= 0 <= hi")
    vals = f(sys.orbit(w, lo, hi))
    if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) > f.sup_bound * (1 + 1e-12):
        raise ValueError("potential must be bounded")
    return PotentialWindow(lo, hi, vals, f.sup_bound)


# -- Gordon certificates ---------------------------------------------------------


@dataclass(frozen=True)
class GordonRow:
    m: int
    q: int
    fwd_dev: float
    bwd_dev: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.fwd_dev <= self.bound and self.bwd_dev <= self.bound


@dataclass(frozen=True)
class GordonCertificate:
    C: float
    rows: tuple[GordonRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "pass": self.passed,
            "rows": [
                {"m": r.m, "q": r.q, "fwd_dev": r.fwd_dev, "bwd_dev": r.bwd_dev, "bound": r.bound, "pass": r.ok}
                for r in self.rows
            ],
        }


def deviations(V: PotentialWindow, q: int) -> tuple[float, float]:
    """(max_{1<=n<=q} |V(n) - V(n+q)|, max_{1<=n<=q} |V(n) - V(n-q)|)."""
    V.require(1 - q, 2 * q, f"q = {q}")
    n = np.arange(1, q + 1)
    base = V(n)
    return float(np.max(np.abs(base - V(n + q)))), float(np.max(np.abs(base - V(n - q))))


def gordon_certify(V: PotentialWindow, q_list: Sequence[int], C: float = 2.0,
                   m_list: Sequence[int] | None = None) -> GordonCertificate:
    """Check max |V(n) - V(n +- q_m)| <= C m^{-q_m} over 1 <= n <= q_m.

    The m-th entry of q_list is paired with m unless m_list is given.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    q_list = [int(q) for q in q_list]
    if not q_list or any(q < 1 for q in q_list):
        raise ValueError("q_list must hold positive integers")
    if any(b <= a for a, b in zip(q_list, q_list[1:])):
        raise ValueError("q_list must be strictly increasing")
    ms = list(range(1, len(q_list) + 1)) if m_list is None else [int(m) for m in m_list]
    if len(ms) != len(q_list) or any(m < 1 for m in ms):
        raise ValueError("m_list must pair one positive m with each q")
    rows = []
    for m, q in zip(ms, q_list):
        fwd, bwd = deviations(V, q)
        rows.append(GordonRow(m, q, fwd, bwd, C * float(m) ** (-q)))
    return GordonCertificate(float(C), tuple(rows))


@dataclass(frozen=True)
class PeriodicApproximant:
    """Period-q extension V_m of V restricted to 1 <= n <= q.

    r1[i] = V(n + q) - V(n) for n = 1 - q + i (the correction on [1-q, 0])
    r2[i] = V(n) - V(n - q) for n = q + 1 + i (the correction on [q+1, 2q])
    """

    q: int
    m: int
    base: np.ndarray
    r1_per_n: np.ndarray
    r2_per_n: np.ndarray
    source_sup: float
    deviation_2q: Optional[float]

    @property
    def r1(self) -> float:
        return float(np.max(np.abs(self.r1_per_n)))

    @property
    def r2(self) -> float:
        return float(np.max(np.abs(self.r2_per_n)))

    @property
    def max_residual(self) -> float:
        return max(self.r1, self.r2)

    @property
    def sup_bound(self) -> float:
        return float(np.max(np.abs(self.base)))

    def __call__(self, n):
        return self.base[(np.asarray(n) - 1) % self.q]

    def window(self, lo: int, hi: int) -> PotentialWindow:
        n = np.arange(lo, hi + 1)
        return PotentialWindow(lo, hi, self(n), self.sup_bound)

    def deviation(self, V: PotentialWindow, lo: int | None = None, hi: int | None = None) -> float:
        """max |V_m(n) - V(n)| over [lo, hi], by default [1-q, 2q]."""
        lo = 1 - self.q if lo is None else lo
        hi = 2 * self.q if hi is None else hi
        n = np.arange(lo, hi + 1)
        return float(np.max(np.abs(self(n) - V(n))))

    def check_clauses(self, V: PotentialWindow, C: float) -> dict:
        """The three defining properties of a Gordon approximant at level (m, q)."""
        n = np.arange(1 - self.q, 2 * self.q + 1)
        periodic = bool(np.array_equal(self(n), self(n + self.q)))
        bounded = self.sup_bound <= V.sup_bound + self.max_residual
        close = self.deviation(V) <= C * float(self.m) ** (-self.q)
        return {"periodic": periodic, "bounded": bounded, "close": close}

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "m": self.m,
            "period_values": self.base.tolist(),
            "r1": self.r1,
            "r2": self.r2,
            "deviation_2q": self.deviation_2q,
        }


def periodic_approximant(V: PotentialWindow, q_m: int, m: int = 1) -> PeriodicApproximant:
    q = int(q_m)
    if q < 1 or m < 1:
        raise ValueError("q_m and m must be >= 1")
    V.require(1 - q, 2 * q, "periodic_approximant")
    base = np.array(V(np.arange(1, q + 1)))
    left = np.arange(1 - q, 1)
    right = np.arange(q + 1, 2 * q + 1)
    r1 = V(left + q) - V(left)
    r2 = V(right) - V(right - q)
    out = PeriodicApproximant(q, int(m), base, r1, r2, V.sup_bound, None)
    if V.covers(-2 * q, 2 * q):
        object.__setattr__(out, "deviation_2q", out.deviation(V, -2 * q, 2 * q))
    return out


# -- tube flattening on the circle -------------------------------------------------


@dataclass(frozen=True)
class FlattenedFunction:
    """f modified to be constant on each group of arcs around T^{j + l q_k}(anchor).

    Arc i (1 <= i <= 4 q_k) is the closed arc of radius r_k around
    T^i(anchor); arcs i and i' with i = i' mod q_k form one group and share
    the locked value f(T^j anchor), j the representative in 1..q_k.
    """

    base: SampleFunction
    alpha: AlphaRep
    anchor: TorusPoint
    k: int
    q_k: int
    r_k: float
    gap: float
    centers: np.ndarray  # centers[i - 1] = T^i(anchor)
    locked_values: np.ndarray  # locked_values[j - 1] for group j
    group_diameters: np.ndarray

    def arc_index(self, x) -> np.ndarray:
        """1-based arc index containing each x, 0 outside the tube."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        order = np.argsort(self.centers)
        c = self.centers[order]
        pos = np.searchsorted(c, x)
        out = np.zeros(len(x), dtype=int)
        for cand in (pos - 1, pos % len(c)):
            idx = order[cand]
            inside = circle_dist(x, self.centers[idx]) <= self.r_k + 1e-12
            out = np.where(inside & (out == 0), idx + 1, out)
        return out

    def group_of(self, x) -> np.ndarray:
        i = self.arc_index(x)
        return np.where(i > 0, (i - 1) % self.q_k + 1, 0)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        grp = self.group_of(x)
        out = self.base(x[:, None])
        mask = grp > 0
        out[mask] = self.locked_values[grp[mask] - 1]
        return out

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "q_k": self.q_k,
            "r_k": self.r_k,
            "gap": self.gap,
            "alpha": self.alpha.text,
            "anchor": list(self.anchor.coords),
            "arcs": [
                {"index": i + 1, "group": i % self.q_k + 1, "center": float(c), "radius": self.r_k}
                for i, c in enumerate(self.centers)
            ],
            "locked_values": self.locked_values.tolist(),
        }


def _arc_group_diameter(centers: np.ndarray, r: float) -> float:
    d = float(np.max(circle_dist(centers[:, None], centers[None, :])))
    return min(0.5, d + 2 * r)


def flatten_along_tube(f: SampleFunction, alpha: AlphaRep, k: int, q_k: int,
                       anchor: TorusPoint | None = None) -> FlattenedFunction:
    if k < 1 or q_k < 1:
        raise ValueError("k and q_k must be >= 1")
    if anchor is None:
        anchor = TorusPoint.from_exact([alpha.exact_value()])
    sys = DynSystem.rotation(alpha)
    if worst_distance(sys, anchor, q_k, 3) >= 1.0 / k:
        raise ValueError(f"anchor has no repetition certificate at (1/{k}, r=3, q={q_k})")
    centers = sys.orbit(anchor, 1, 4 * q_k)[:, 0]
    srt = np.sort(centers)
    gaps = np.diff(np.concatenate([srt, [srt[0] + 1.0]]))
    gap = float(np.min(gaps)) if len(centers) > 1 else 1.0
    if gap <= 0:
        raise ValueError("orbit not injective on range")
    r_k = min(gap / 3.0, (4.0 / k - 3.0 / k) / 2.0)
    # (a) closed arcs pairwise disjoint
    assert 2 * r_k < gap
    groups = centers.reshape(4, q_k).T  # row j-1 holds T^{j + l q_k}
    diam = np.array([_arc_group_diameter(g, r_k) for g in groups])
    # (b) each group lies in a set of diameter <= 4/k
    assert np.all(diam <= 4.0 / k + 1e-12)
    locked = f(groups[:, :1])
    return FlattenedFunction(f, alpha, anchor, int(k), int(q_k), r_k, gap, centers, locked, diam)


def omega_f_tube_sample(alpha: AlphaRep, k: int, q_k: int, j: int, r_k: float,
                        offset: float = 0.0, anchor: TorusPoint | None = None) -> TorusPoint:
    """T^{j + q_k}(anchor) displaced by offset along the circle, |offset| <= r_k."""
    if not r_k > 0:
        raise ValueError("r_k must be positive")
    if not 1 <= j <= q_k:
        raise ValueError("j must lie in 1..q_k")
    if abs(offset) > r_k:
        raise ValueError("offset leaves the tube ball")
    if anchor is None:
        anchor = TorusPoint.from_exact([alpha.exact_value()])
    c = rotation_iterate(anchor, alpha, j + q_k)
    return TorusPoint.from_exact([c.exact[0] + Fraction(offset)])


@dataclass(frozen=True)
class GapReport:
    fwd: float
    bwd: float
    bound: float
    j_hat: int

    @property
    def passed(self) -> bool:
        return self.fwd < self.bound and self.bwd < self.bound

    def to_dict(self) -> dict:
        return {"fwd": self.fwd, "bwd": self.bwd, "bound": self.bound, "j_hat": self.j_hat, "pass": self.passed}


def gordon_gap_verify(g: FlattenedFunction, w: TorusPoint, k: int | None = None, q_k: int | None = None,
                      *, use_base: bool = False) -> GapReport:
    """Gordon gaps of j -> g(T^j w) at return time q_k, against 2 k^{-q_k}.

    ``use_base`` evaluates the unflattened f instead of g.
    """
    k = g.k if k is None else k
    q = g.q_k if q_k is None else q_k
    i = int(g.arc_index([w[0]])[0])
    if not q < i <= 2 * q:
        raise ValueError("not in Omega_f sample set")
    sys = DynSystem.rotation(g.alpha)
    orb = sys.orbit(w, 1 - q, 2 * q)[:, 0]  # row n + q - 1 is T^n w
    fn = g.base if use_base else g
    vals = fn(orb[:, None]) if use_base else fn(orb)
    mid = vals[q : 2 * q]
    fwd = float(np.max(np.abs(mid - vals[2 * q :])))
    bwd = float(np.max(np.abs(mid - vals[:q])))
    return GapReport(fwd, bwd, 2.0 * float(k) ** (-q), i - q)
