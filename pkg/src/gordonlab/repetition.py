"""Finite-horizon repetition-property searches.

An orbit segment satisfies the repetition property at level (eps, r) with
return time q when d(T^n w, T^{n+q} w) < eps for every 0 <= n <= r q.  All
searches here return the smallest such q up to a horizon; reports are
evidence about PRP(T), never proofs.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .diophantine import AlphaRep, Classification, badly_approx_classify
from .dynsys import DynSystem, TorusPoint, circle_dist, torus_dist_rows


@dataclass(frozen=True)
class RepetitionCertificate:
    epsilon: float
    r: int
    q: int
    worst_dist: float
    base_point: TorusPoint
    system: DynSystem

    def recompute_worst(self) -> float:
        return worst_distance(self.system, self.base_point, self.q, self.r)

    def revalidate(self, tol: float = 1e-12) -> bool:
        w = self.recompute_worst()
        return abs(w - self.worst_dist) <= tol and w < self.epsilon

    def validates_at(self, epsilon: float, r: int) -> bool:
        return worst_distance(self.system, self.base_point, self.q, r) < epsilon

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "r": self.r,
            "q": self.q,
            "worst_dist": self.worst_dist,
            "system": self.system.describe(),
            "omega": list(self.base_point.coords),
        }


def worst_distance(sys: DynSystem, w: TorusPoint, q: int, r: int) -> float:
    """max over 0 <= n <= r q of d(T^n w, T^{n+q} w)."""
    orb = sys.orbit(w, 0, (r + 1) * q)
    return float(torus_dist_rows(orb[: r * q + 1], orb[q:]).max())


def _first_valid_in(orb: np.ndarray, qs, eps: float, r: int) -> Optional[tuple[int, float]]:
    for q in qs:
        worst = float(torus_dist_rows(orb[: r * q + 1], orb[q : (r + 1) * q + 1]).max())
        if worst < eps:
            return q, worst
    return None


def _scan(orb, lo: int, hi: int, eps: float, r: int, workers: int) -> Optional[tuple[int, float]]:
    """Smallest valid q in [lo, hi] by the definition; blocks reduce by minimum."""
    if hi < lo:
        return None
    if workers <= 1 or hi - lo < 64:
        return _first_valid_in(orb, range(lo, hi + 1), eps, r)
    edges = np.linspace(lo, hi + 1, 4 * workers + 1).astype(int)
    blocks = [range(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        hits = list(pool.map(lambda qs: _first_valid_in(orb, qs, eps, r), blocks))
    hits = [h for h in hits if h is not None]
    return min(hits) if hits else None


def _rotation_candidates(sys: DynSystem, eps: float, q_max: int) -> np.ndarray:
    # isometry: d(T^n w, T^{n+q} w) = max_i <q alpha_i> for every n
    q = np.arange(1, q_max + 1)
    d = np.zeros(q_max)
    for a in sys.alpha:
        d = np.maximum(d, circle_dist(np.mod(q * float(a), 1.0), 0.0))
    return q[d < eps + 1e-9]


def _skew_structured(sys: DynSystem, w: TorusPoint, eps: float, r: int, q_max: int, k: int):
    alpha = sys.alpha[0]
    qks = []
    for k_, _, q in alpha._all_convergents():
        if q > q_max:
            break
        if k_ >= 1:
            qks.append(q)
    cands = sorted({m * qk for qk in qks for m in range(1, k + 2) if m * qk <= q_max})
    for q in cands:
        worst = worst_distance(sys, w, q, r)
        if worst < eps:
            return q
    return None


def rp_search(
    sys: DynSystem,
    w: TorusPoint,
    epsilon: float,
    r: int,
    q_max: int,
    *,
    accelerate: bool = True,
    workers: int = 1,
) -> Optional[RepetitionCertificate]:
    """Smallest q <= q_max with d(T^n w, T^{n+q} w) < epsilon for 0 <= n <= r q.

    Rotations only test q with max_i <q alpha_i> < epsilon.  For the
    skew-shift, return times m q_k built from convergent denominators are
    tried first and bound the exhaustive scan.  Whatever the path, the
    recorded worst_dist comes from the definition.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if r < 1 or q_max < 1:
        raise ValueError("r and q_max must be >= 1")
    hit = None
    if accelerate and sys.kind == "rotation":
        for q in _rotation_candidates(sys, epsilon, q_max):
            worst = worst_distance(sys, w, int(q), r)
            if worst < epsilon:
                hit = (int(q), worst)
                break
    else:
        hi = q_max
        if accelerate and sys.kind == "skew" and not sys.alpha[0].is_rational:
            k = max(1, round(1 / epsilon))
            q_star = _skew_structured(sys, w, epsilon, r, q_max, k)
            if q_star is not None:
                hi = q_star
        orb = sys.orbit(w, 0, (r + 1) * hi)
        hit = _scan(orb, 1, hi, epsilon, r, workers)
    if hit is None:
        return None
    q, worst = hit
    return RepetitionCertificate(float(epsilon), int(r), q, worst, w, sys)


# -- PRP probes ---------------------------------------------------------------


@dataclass(frozen=True)
class PrpEntry:
    k: int
    q: Optional[int]  # None when nothing was found up to q_max_searched
    q_max_searched: int
    worst_dist: Optional[float] = None

    @property
    def found(self) -> bool:
        return self.q is not None


@dataclass(frozen=True)
class PrpProbeReport:
    entries: tuple[PrpEntry, ...]
    base_point: TorusPoint
    system: DynSystem

    def found(self) -> list[PrpEntry]:
        return [e for e in self.entries if e.found]

    def entry(self, k: int) -> PrpEntry:
        for e in self.entries:
            if e.k == k:
                return e
        raise KeyError(k)

    def to_dict(self) -> dict:
        return {
            "system": self.system.describe(),
            "omega": list(self.base_point.coords),
            "entries": [
                {
                    "k": e.k,
                    "found": e.found,
                    "q": e.q,
                    "q_max_searched": e.q_max_searched,
                    "worst_dist": e.worst_dist,
                }
                for e in self.entries
            ],
        }


def prp_probe(sys: DynSystem, w: TorusPoint, k_max: int, q_max: int, *, workers: int = 1) -> PrpProbeReport:
    """Run rp_search at eps = 1/k, r = k for k = 1..k_max."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    entries = []
    for k in range(1, k_max + 1):
        cert = rp_search(sys, w, 1.0 / k, k, q_max, workers=workers)
        if cert is None:
            entries.append(PrpEntry(k, None, q_max))
        else:
            entries.append(PrpEntry(k, cert.q, q_max, cert.worst_dist))
    return PrpProbeReport(tuple(entries), w, sys)


@dataclass(frozen=True)
class DivergenceCheck:
    ok: bool
    q_sequence: list[int]


def qk_divergence_check(report: PrpProbeReport) -> DivergenceCheck:
    """Whether the minimal return times grow with k over the probed range.

    Return times admissible at level k+1 are admissible at level k, so the
    minimal q_k never decrease.  A last certificate with worst distance 0
    is an exact recurrence: it satisfies every level, so q_k stays bounded
    by it forever.  Otherwise that q fails once 1/k drops below its worst
    distance and every smaller q has already failed, so q_k must eventually
    exceed it.  ok records observed growth together with that condition.
    """
    found = report.found()
    if len(found) < 2:
        raise ValueError("insufficient data: need at least 2 found entries")
    qs = [e.q for e in found]
    exact = found[-1].worst_dist == 0.0
    return DivergenceCheck(qs[-1] > qs[0] and not exact, qs)


# -- skew-shift ----------------------------------------------------------------


@dataclass(frozen=True)
class MkSelection:
    m_k: int
    score: float


def skewshift_mk_selection(alpha: AlphaRep, w1: float, k: int, q_k: int, factor: int = 2) -> MkSelection:
    """argmin over m in 1..k+1 of <m * factor * q_k * w1>, smallest m on ties.

    ``factor`` is the coefficient of w1 in the second coordinate of
    T^{n+q} w - T^n w; 2 reproduces the selection as usually written, 1 is
    the coefficient produced by T(w1, w2) = (w1 + 2 alpha, w1 + w2).
    """
    if q_k < 1 or k < 1:
        raise ValueError("k and q_k must be >= 1")
    best = None
    base = factor * q_k * w1
    for m in range(1, k + 2):
        s = float(circle_dist(math.fmod(m * base, 1.0) % 1.0, 0.0))
        if best is None or s < best.score:
            best = MkSelection(m, s)
    return best


@dataclass(frozen=True)
class Theorem4Report:
    classification: Classification
    probe: PrpProbeReport
    q_max: int
    agreement: Optional[bool]

    @property
    def certificates_found(self) -> bool:
        return all(e.found for e in self.probe.entries)

    def to_dict(self) -> dict:
        return {
            "alpha": self.probe.system.alpha[0].text,
            "classification": self.classification.to_dict(),
            "probe": self.probe.to_dict(),
            "q_max": self.q_max,
            "certificates_found": self.certificates_found,
            "agreement": self.agreement,
        }


def theorem4_probe(
    alpha: AlphaRep,
    w: TorusPoint,
    k_max: int = 3,
    q_max: int = 2000,
    horizon: int = 10**5,
    *,
    workers: int = 1,
) -> Theorem4Report:
    """Pair the Diophantine verdict on alpha with a skew-shift PRP probe at w.

    Agreement means NotBadlyApproximable-evidence together with certificates
    at every level k <= k_max, or BadlyApproximable-evidence together with
    some level exhausting q_max.  Inconclusive verdicts give agreement None.
    """
    cls = badly_approx_classify(alpha, horizon)
    probe = prp_probe(DynSystem.skew(alpha), w, k_max, q_max, workers=workers)
    all_found = all(e.found for e in probe.entries)
    if cls.verdict == "NotBadlyApproximable-evidence":
        agree = all_found
    elif cls.verdict == "BadlyApproximable-evidence":
        agree = not all_found
    else:
        agree = None
    return Theorem4Report(cls, probe, q_max, agree)
