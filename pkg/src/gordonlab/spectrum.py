"""Finite truncations of H psi(n) = psi(n+1) + psi(n-1) + V(n) psi(n)."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .dynsys import DynSystem, TorusPoint
from .potential import PotentialWindow, SampleFunction, WindowError, sample_potential


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class TridiagonalOperator:
    """Dirichlet truncation: diag holds V on the window, off-diagonals are 1."""

    diag: np.ndarray
    start: int = 0  # lattice index of diag[0]

    def __post_init__(self):
        d = np.array(self.diag, dtype=float)
        if d.ndim != 1 or len(d) < 1:
            raise ValueError("need a nonempty diagonal")
        d.setflags(write=False)
        object.__setattr__(self, "diag", d)

    @property
    def N(self) -> int:
        return len(self.diag)

    def gershgorin(self) -> tuple[float, float]:
        r = 2.0 if self.N > 1 else 0.0
        return float(self.diag.min() - r), float(self.diag.max() + r)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[1:] += x[:-1]
        y[:-1] += x[1:]
        return y

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.eye(self.N, k=1) + np.eye(self.N, k=-1)

    def leading(self, n: int) -> "TridiagonalOperator":
        return TridiagonalOperator(self.diag[:n], self.start)


def build_truncation(V: PotentialWindow, N: int, center: int = 0) -> TridiagonalOperator:
    """diag[i] = V(center - N // 2 + i) for 0 <= i < N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    start = center - N // 2
    V.require(start, start + N - 1, "build_truncation")
    return TridiagonalOperator(V(np.arange(start, start + N)), start)


def sturm_count(T: TridiagonalOperator, x) -> np.ndarray:
    """Number of eigenvalues strictly below each shift in x.

    Counts negative pivots of the LDL^T factorization of T - x, which equal
    the sign changes of the leading principal minors.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tiny = np.finfo(float).tiny ** 0.5
    count = np.zeros(x.shape, dtype=int)
    d = T.diag[0] - x
    d = np.where(d == 0.0, -tiny, d)
    count += d < 0
    for a in T.diag[1:]:
        d = (a - x) - 1.0 / d
        d = np.where(d == 0.0, -tiny, d)
        count += d < 0
    return count


def eigenvalues_sturm(T: TridiagonalOperator, tol: float = 1e-13) -> np.ndarray:
    """All eigenvalues by simultaneous bisection on the Sturm count."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    N = T.N
    a, b = T.gershgorin()
    lo = np.full(N, a - 1e-9)
    hi = np.full(N, b + 1e-9)
    k = np.arange(N)
    while True:
        mid = 0.5 * (lo + hi)
        active = (hi - lo > tol) & (mid > lo) & (mid < hi)
        if not active.any():
            break
        c = sturm_count(T, mid[active])
        idx = np.flatnonzero(active)
        # eigenvalue k lies below mid iff more than k eigenvalues are
        up = c > k[idx]
        hi[idx[up]] = mid[active][up]
        lo[idx[~up]] = mid[active][~up]
    return 0.5 * (lo + hi)


def _normalize(x: np.ndarray) -> np.ndarray:
    x = x / np.linalg.norm(x)
    lead = x[np.flatnonzero(np.abs(x) > 1e-12)[0]]
    return x if lead > 0 else -x


def eigenvector_at(T: TridiagonalOperator, lam: float, previous: Sequence[np.ndarray] = (),
                   tol: float = 1e-8, sweeps: int = 8) -> tuple[np.ndarray, float]:
    """Unit x with ||T x - lam x|| <= tol by inverse iteration.

    Iterates are kept orthogonal to ``previous`` (vectors at nearby
    eigenvalues).  Returns (x, residual); raises ConvergenceError carrying
    the best residual if the budget runs out.
    """
    N = T.N
    if N == 1:
        x = np.ones(1)
        res = abs(T.diag[0] - lam)
        if res > tol:
            raise ConvergenceError("no eigenvalue at lam", res)
        return x, float(res)
    scale = max(1.0, np.max(np.abs(T.diag)) + 2.0)
    shift = lam + 1e-14 * scale
    ab = np.zeros((3, N))
    ab[0, 1:] = 1.0
    ab[1] = T.diag - shift
    ab[2, :-1] = 1.0
    rng = np.random.default_rng(N)
    x = rng.standard_normal(N)
    best = np.inf
    prev = [np.asarray(p) for p in previous]
    for _ in range(sweeps):
        for p in prev:
            x = x - (p @ x) * p
        x = x / np.linalg.norm(x)
        try:
            y = solve_banded((1, 1), ab, x, check_finite=False)
        except np.linalg.LinAlgError:
            shift += 1e-12 * scale
            ab[1] = T.diag - shift
            continue
        if not np.all(np.isfinite(y)):
            break
        for p in prev:
            y = y - (p @ y) * p
        x = _normalize(y)
        res = float(np.linalg.norm(T.matvec(x) - lam * x))
        best = min(best, res)
        if res <= tol:
            return x, res
    raise ConvergenceError("inverse iteration did not converge", best)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    ipr: np.ndarray
    vectors: Optional[np.ndarray] = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "residual", "ipr"])
        for i, (lam, r, p) in enumerate(zip(self.eigenvalues, self.residuals, self.ipr)):
            w.writerow([i, f"{lam:.17g}", f"{r:.17g}", f"{p:.17g}"])
        return buf.getvalue()


def ipr(x: np.ndarray) -> float:
    a = np.abs(x) ** 2
    return float(np.sum(a * a) / np.sum(a) ** 2)


def spectrum_report(T: TridiagonalOperator, tol: float = 1e-13, keep_vectors: bool = False,
                    cluster: float = 1e-6) -> SpectrumReport:
    """Eigenvalues by bisection, eigenvectors by inverse iteration.

    Vectors whose eigenvalues lie within ``cluster`` of each other are
    orthogonalized against one another.
    """
    lam = eigenvalues_sturm(T, tol)
    vecs = np.empty((T.N, T.N))
    res = np.empty(T.N)
    for i, l in enumerate(lam):
        j = i
        while j > 0 and l - lam[j - 1] <= cluster:
            j -= 1
        near = list(vecs[j:i])
        vecs[i], res[i] = eigenvector_at(T, l, near)
    p = np.array([ipr(v) for v in vecs])
    return SpectrumReport(lam, res, p, vecs if keep_vectors else None)


def decay_diagnostic(report: SpectrumReport) -> dict:
    if len(report.ipr) == 0:
        raise ValueError("empty spectrum report")
    return {"max_ipr": float(np.max(report.ipr)), "median_ipr": float(np.median(report.ipr))}


# -- covariance ---------------------------------------------------------------


@dataclass(frozen=True)
class CovarianceCheck:
    max_abs_diff: float
    passed: bool
    interior: int

    def to_dict(self) -> dict:
        return {"max_abs_diff": self.max_abs_diff, "pass": self.passed, "interior_radius": self.interior}


def covariance_check(f: SampleFunction, sys: DynSystem, w: TorusPoint, t: int, N: int) -> CovarianceCheck:
    """Compare H at T^t w with U_t H_w U_t^* on interior indices.

    With (U_t psi)(n) = psi(n + t) the potential of T^t w is V_w(n + t), so
    (U_t H_w U_t^*)[n, m] = H_w[n + t, m + t] must equal H_{T^t w}[n, m]
    for all n, m with |n|, |m| <= N // 2 - |t| - 1.
    """
    if N < 2 * abs(t) + 4:
        raise WindowError(f"N = {N} too small for t = {t}: need N >= {2 * abs(t) + 4}")
    start = -(N // 2)
    H = build_truncation(sample_potential(f, sys, w, start, start + N - 1), N).dense()
    Ht = build_truncation(sample_potential(f, sys, sys.iterate(w, t), start, start + N - 1), N).dense()
    R = N // 2 - abs(t) - 1
    inner = np.arange(-R, R + 1) - start
    lhs = Ht[np.ix_(inner, inner)]
    rhs = H[np.ix_(inner + t, inner + t)]
    diff = float(np.max(np.abs(lhs - rhs)))
    return CovarianceCheck(diff, diff <= 1e-12, R)
