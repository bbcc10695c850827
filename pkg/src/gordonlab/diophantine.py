"""Continued fractions, convergents and distance to the nearest integer.

Everything here is exact: partial quotients and convergents are Python
integers, and ``dist_to_int`` brackets ``q * alpha`` between consecutive
convergents until the double it returns is determined.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Optional

# classifier thresholds
BA_MAX_PARTIAL_QUOTIENT = 100
BA_MIN_C = 1e-3
NOT_BA_MAX_RATIO = 1e-4

# exact representative used for orbits must approximate alpha to 2**-128
_ORBIT_DENOMINATOR = 2**64


@dataclass(frozen=True)
class AlphaRep:
    """A rotation parameter alpha, known exactly through its continued fraction.

    kind is one of ``"rational"``, ``"cf"`` or ``"float"``.  Rationals
    (including Liouville truncations) and float literals carry their exact
    value; ``cf`` values are irrational or at least open-ended and carry
    ``a0``, a finite ``head`` and either a repeating ``period`` or a
    ``rule(k)`` producing partial quotients past the head.
    """

    kind: str
    a0: int = 0
    head: tuple[int, ...] = ()
    period: tuple[int, ...] = ()
    exact: Optional[Fraction] = None
    depth: Optional[int] = None
    label: Optional[str] = None
    rule: Optional[Callable[[int], int]] = field(default=None, compare=False)
    _orbit_value: Optional[Fraction] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("rational", "cf", "float"):
            raise ValueError(f"unknown alpha kind {self.kind!r}")
        if any(a < 1 for a in self.head) or any(a < 1 for a in self.period):
            raise ValueError("partial quotients past a0 must be >= 1")

    # -- constructors -------------------------------------------------
    @classmethod
    def rational(cls, p: int, q: int = 1, label: str | None = None) -> "AlphaRep":
        if q <= 0:
            raise ValueError("denominator must be positive")
        x = Fraction(p, q) % 1
        a0, head = _euclid(x)
        return cls("rational", a0=a0, head=head, exact=x, label=label)

    @classmethod
    def from_cf(cls, a0: int, head=(), period=(), rule=None, label=None) -> "AlphaRep":
        head, period = tuple(int(a) for a in head), tuple(int(a) for a in period)
        if any(a < 1 for a in head + period):
            raise ValueError("partial quotients past a0 must be >= 1")
        if not period and rule is None:
            # a finite continued fraction is a rational number
            value = _cf_value(a0, head)
            out = cls.rational(value.numerator, value.denominator)
            return out if label is None else _relabel(out, label)
        return cls("cf", a0=int(a0), head=head, period=period, rule=rule, label=label)

    @classmethod
    def golden(cls) -> "AlphaRep":
        return cls.from_cf(0, (), (1,), label="golden")

    @classmethod
    def liouville(cls, depth: int = 4) -> "AlphaRep":
        """Truncated Liouville number sum_{j=1}^{depth} 10**(-j!), held exactly."""
        if depth < 1:
            raise ValueError("liouville depth must be >= 1")
        x = sum(Fraction(1, 10 ** math.factorial(j)) for j in range(1, depth + 1))
        return cls.rational(x.numerator, x.denominator, label=f"liouville:{depth}")

    @classmethod
    def from_float(cls, x: float) -> "AlphaRep":
        x = float(x)
        if not math.isfinite(x) or not 0.0 < x < 1.0:
            raise ValueError("float literal alpha must lie in (0, 1)")
        value = Fraction(x)
        a0, pq = _euclid(value)
        # keep convergents whose error still exceeds the float's own rounding
        delta = Fraction(math.ulp(x)) / 2
        depth = 0
        for conv in _convergent_pairs(a0, pq):
            k, p, q = conv
            if k == 0:
                continue
            if abs(value - Fraction(p, q)) <= delta:
                break
            depth = k
        return cls("float", a0=a0, head=pq, exact=value, depth=depth, label=f"float:{x!r}")

    @classmethod
    def parse(cls, text: str) -> "AlphaRep":
        """Parse the canonical text form (see ``text``)."""
        s = text.strip()
        if s == "golden":
            return cls.golden()
        kind, _, body = s.partition(":")
        if kind == "rational":
            m = re.fullmatch(r"\s*(-?\d+)\s*/\s*(\d+)\s*", body)
            if not m:
                raise ValueError(f"bad rational alpha {text!r}")
            return cls.rational(int(m.group(1)), int(m.group(2)))
        if kind == "liouville":
            return cls.liouville(int(body))
        if kind == "float":
            return cls.from_float(float(body))
        if kind == "cf":
            return _parse_cf(body, text)
        raise ValueError(f"unknown alpha text form {text!r}")

    # -- queries --------------------------------------------------------
    @property
    def is_rational(self) -> bool:
        return self.kind == "rational"

    @property
    def text(self) -> str:
        """Canonical text form: rational:p/q, cf:a0;a1,(a2,a3), golden, liouville:J, float:x."""
        if self.label is not None:
            return self.label
        if self.kind == "rational":
            return f"rational:{self.exact.numerator}/{self.exact.denominator}"
        if self.rule is not None:
            raise ValueError("rule-generated continued fractions have no text form")
        parts = [str(a) for a in self.head]
        if self.period:
            parts.append("(" + ",".join(str(a) for a in self.period) + ")")
        return f"cf:{self.a0};" + ",".join(parts)

    def __str__(self) -> str:
        try:
            return self.text
        except ValueError:
            return f"cf:{self.a0};<rule>"

    def partial_quotient(self, k: int) -> Optional[int]:
        """a_k for k >= 1, or None once a finite expansion is exhausted."""
        if k < 1:
            raise ValueError("partial quotients are indexed from 1")
        if k <= len(self.head):
            return self.head[k - 1]
        if self.kind != "cf":
            return None
        j = k - len(self.head) - 1
        if self.period:
            return self.period[j % len(self.period)]
        a = int(self.rule(k))
        if a < 1:
            raise ValueError(f"rule produced partial quotient {a} < 1 at k={k}")
        return a

    def partial_quotients(self) -> Iterator[int]:
        k = 1
        limit = self.depth if self.kind == "float" else None
        while limit is None or k <= limit:
            a = self.partial_quotient(k)
            if a is None:
                return
            yield a
            k += 1

    def _all_convergents(self) -> Iterator[tuple[int, int, int]]:
        """(k, p_k, q_k) for k = 0, 1, ... without the float depth cap."""
        if self.kind == "float":
            yield from _convergent_pairs(self.a0, self.head)
            return
        k = 1

        def pqs():
            nonlocal k
            while True:
                a = self.partial_quotient(k)
                if a is None:
                    return
                yield a
                k += 1

        yield from _convergent_pairs(self.a0, pqs())

    def exact_value(self) -> Fraction:
        """Exact fractional part of alpha used to drive orbits.

        Rationals and float literals return themselves; open-ended continued
        fractions are replaced by the first convergent with denominator at
        least 2**64, which is within 2**-128 of alpha.
        """
        if self.exact is not None:
            return self.exact
        if self._orbit_value is None:
            for _, p, q in self._all_convergents():
                if q >= _ORBIT_DENOMINATOR:
                    object.__setattr__(self, "_orbit_value", Fraction(p, q) % 1)
                    break
        return self._orbit_value

    def __float__(self) -> float:
        return float(self.exact_value())


def _relabel(a: AlphaRep, label: str) -> AlphaRep:
    return AlphaRep(a.kind, a.a0, a.head, a.period, a.exact, a.depth, label, a.rule)


def _euclid(x: Fraction) -> tuple[int, tuple[int, ...]]:
    a0 = math.floor(x)
    rest = x - a0
    pq = []
    while rest:
        x = 1 / rest
        a = math.floor(x)
        pq.append(a)
        rest = x - a
    return a0, tuple(pq)


def _cf_value(a0: int, head) -> Fraction:
    value = Fraction(0)
    for a in reversed(head):
        value = 1 / (a + value)
    return a0 + value


def _convergent_pairs(a0: int, pqs) -> Iterator[tuple[int, int, int]]:
    p_prev, q_prev, p, q = 1, 0, a0, 1
    yield 0, p, q
    for k, a in enumerate(pqs, start=1):
        p_prev, q_prev, p, q = p, q, a * p + p_prev, a * q + q_prev
        yield k, p, q


def _parse_cf(body: str, text: str) -> AlphaRep:
    a0_txt, sep, rest = body.partition(";")
    if not sep:
        raise ValueError(f"cf alpha needs 'a0;a1,...': {text!r}")
    a0 = int(a0_txt)
    rest = rest.strip()
    period: tuple[int, ...] = ()
    m = re.search(r"\(([^)]*)\)\s*$", rest)
    if m:
        period = tuple(int(t) for t in m.group(1).split(",") if t.strip())
        rest = rest[: m.start()]
    tokens = [t.strip() for t in rest.split(",") if t.strip()]
    if tokens and tokens[-1] == "...":
        # "cf:0;1,2,2,..." repeats the last listed quotient
        tokens.pop()
        if not tokens or period:
            raise ValueError(f"cannot repeat in {text!r}")
        period = (int(tokens.pop()),)
    head = tuple(int(t) for t in tokens)
    return AlphaRep.from_cf(a0, head, period)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Convergent:
    k: int
    p: int
    q: int
    dist: float  # <q alpha>


def convergents(alpha: AlphaRep, K: int) -> list[Convergent]:
    """The convergents p_k/q_k for k = 1..K (fewer when alpha runs out).

    The trivial k = 0 convergent a0/1 is omitted.  Float literals stop at
    their trusted depth.
    """
    if K < 1:
        raise ValueError("K must be positive")
    out = []
    limit = alpha.depth if alpha.kind == "float" else None
    for k, p, q in alpha._all_convergents():
        if k == 0:
            continue
        if k > K or (limit is not None and k > limit):
            break
        out.append(Convergent(k, p, q, dist_to_int(q, alpha)))
    return out


def _frac_dist(x: Fraction) -> Fraction:
    f = x - math.floor(x)
    return min(f, 1 - f)


def dist_to_int_exact(q: int, alpha: AlphaRep) -> Fraction:
    """<q alpha> as an exact rational; only for rational or float alpha."""
    if alpha.exact is None:
        raise ValueError("exact distance needs a rational or float alpha")
    return _frac_dist(q * alpha.exact)


def dist_to_int(q: int, alpha: AlphaRep) -> float:
    """Distance from q*alpha to the nearest integer, in [0, 1/2]."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if alpha.kind == "float":
        trusted = [c for c in _trusted_denominators(alpha)]
        if trusted and q > trusted[-1]:
            raise ValueError(
                f"q={q} exceeds the trusted depth of {alpha.text} "
                f"(largest trusted denominator {trusted[-1]})"
            )
    if alpha.exact is not None:
        return float(dist_to_int_exact(q, alpha))
    # alpha lies between consecutive convergents; <.> is 1-Lipschitz, so
    # |<q alpha> - <q p_K/q_K>| < q / (q_K q_{K+1}) < q / q_K^2
    v = alpha.exact_value()
    approx = _frac_dist(q * v)
    if approx > 0 and Fraction(q * 2**60, v.denominator**2) <= approx:
        return float(approx)
    prev = None
    for _, p, qk in alpha._all_convergents():
        if prev is not None:
            p0, q0 = prev
            approx = _frac_dist(Fraction(q * p0, q0))
            err = Fraction(q, q0 * qk)
            if approx > 0 and err * 2**60 <= approx:
                return float(approx)
        prev = (p, qk)
    raise AssertionError("unreachable")


def _trusted_denominators(alpha: AlphaRep) -> list[int]:
    return [q for k, _, q in alpha._all_convergents() if 1 <= k <= (alpha.depth or 0)]


# ---------------------------------------------------------------------------

VERDICTS = ("BadlyApproximable-evidence", "NotBadlyApproximable-evidence", "Inconclusive")


@dataclass(frozen=True)
class Classification:
    c_estimate: float
    attained_q: int
    verdict: str
    horizon: int
    max_partial_quotient: int
    min_ratio: float  # smallest q_k <q_k alpha> seen at any q_k <= horizon

    def to_dict(self) -> dict:
        return {
            "c_estimate": self.c_estimate,
            "attained_q": self.attained_q,
            "verdict": self.verdict,
            "horizon": self.horizon,
            "max_partial_quotient": self.max_partial_quotient,
            "min_ratio": self.min_ratio,
        }


def badly_approx_classify(alpha: AlphaRep, horizon: int) -> Classification:
    """Finite-horizon evidence about c(alpha) = liminf q <q alpha>.

    The liminf is estimated on the tail window sqrt(horizon) <= q_k <= horizon
    of convergent denominators, where it is attained.  Rational alpha is
    reported as NotBadlyApproximable-evidence with c_estimate 0, attained at
    its denominator.  No verdict is a proof.
    """
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    ratios: list[tuple[int, float]] = []
    max_pq = 0
    for k, _, q in alpha._all_convergents():
        if k == 0:
            continue
        if q > horizon:
            break
        if alpha.kind == "float" and k > (alpha.depth or 0):
            break
        d = dist_to_int(q, alpha)
        ratios.append((q, q * d))
    # partial quotients a_1..a_{K+1}: the one after the last q_K <= horizon
    # is already fixed by <q_K alpha>
    for k, a in enumerate(alpha.partial_quotients(), start=1):
        max_pq = max(max_pq, a)
        if k > len(ratios):
            break
    min_ratio = min((r for _, r in ratios), default=math.inf)

    if alpha.is_rational:
        den = alpha.exact.denominator
        return Classification(0.0, den, VERDICTS[1], horizon, max_pq, min_ratio)

    lo = math.isqrt(horizon)
    tail = [(q, r) for q, r in ratios if q >= lo] or ratios[-1:]
    if not tail:
        return Classification(math.inf, 0, VERDICTS[2], horizon, max_pq, min_ratio)
    q_att, c_est = min(tail, key=lambda t: t[1])
    if min_ratio <= NOT_BA_MAX_RATIO:
        verdict = VERDICTS[1]
    elif max_pq <= BA_MAX_PARTIAL_QUOTIENT and c_est >= BA_MIN_C:
        verdict = VERDICTS[0]
    else:
        verdict = VERDICTS[2]
    return Classification(c_est, q_att, verdict, horizon, max_pq, min_ratio)
