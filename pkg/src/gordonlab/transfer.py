"""Transfer matrices of psi(n+1) + psi(n-1) + V(n) psi(n) = E psi(n).

Psi(n) = (psi(n), psi(n+1)) obeys Psi(n) = A(n) Psi(n-1) with
A(n) = ((0, 1), (-1, E - V(n))), so Psi(n) = A(n)...A(1) Psi(0).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .potential import PotentialWindow, periodic_approximant


def transfer_matrix(E, v) -> np.ndarray:
    dtype = complex if np.iscomplexobj(E) or np.iscomplexobj(v) else float
    return np.array([[0.0, 1.0], [-1.0, E - v]], dtype=dtype)


def transfer_matrices(E, V: np.ndarray) -> np.ndarray:
    """Stack of A for each entry of V, shape (len(V), 2, 2)."""
    V = np.asarray(V)
    dtype = complex if np.iscomplexobj(E) or np.iscomplexobj(V) else float
    A = np.zeros((len(V), 2, 2), dtype=dtype)
    A[:, 0, 1] = 1.0
    A[:, 1, 0] = -1.0
    A[:, 1, 1] = E - V
    return A


def inverse_transfer_matrix(E, v) -> np.ndarray:
    dtype = complex if np.iscomplexobj(E) or np.iscomplexobj(v) else float
    return np.array([[E - v, -1.0], [1.0, 0.0]], dtype=dtype)


def op_norm(M) -> np.ndarray | float:
    """Operator 2-norm of a 2x2 matrix (or a stack), in closed form.

    sigma_max^2 = (S + sqrt(S^2 - 4 |det|^2)) / 2 with S the squared
    Frobenius norm.
    """
    M = np.asarray(M)
    S = np.sum(np.abs(M) ** 2, axis=(-2, -1))
    det = np.abs(M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0])
    disc = np.maximum(S * S - 4.0 * det * det, 0.0)
    out = np.sqrt((S + np.sqrt(disc)) / 2.0)
    return float(out) if out.ndim == 0 else out


def product(mats: Sequence[np.ndarray]) -> np.ndarray:
    """A(n) ... A(1) for mats = [A(1), ..., A(n)]."""
    out = np.eye(2, dtype=np.result_type(*mats))
    for A in mats:
        out = A @ out
    return out


def _state(psi0) -> np.ndarray:
    psi0 = np.asarray(psi0)
    if psi0.shape != (2,):
        raise ValueError("state vector must have two entries")
    if not np.linalg.norm(psi0) > 0:
        raise ValueError("initial state must be nonzero")
    return psi0.astype(complex if np.iscomplexobj(psi0) else float)


def propagate(V: PotentialWindow, E, psi0, n: int, start: int = 0) -> np.ndarray:
    """Psi(start + n) from Psi(start).

    n < 0 steps back with A(j)^{-1} = ((E - V(j), -1), (1, 0)).
    """
    psi = _state(psi0)
    if np.iscomplexobj(E):
        psi = psi.astype(complex)
    a, b = psi
    if n > 0:
        V.require(start + 1, start + n, "propagate")
        for v in V(np.arange(start + 1, start + n + 1)):
            a, b = b, (E - v) * b - a
    elif n < 0:
        V.require(start + n + 1, start, "propagate")
        for v in V(np.arange(start, start + n, -1)):
            a, b = (E - v) * a - b, a
    return np.array([a, b])


def propagate_path(V: PotentialWindow, E, psi0, lo: int, hi: int) -> np.ndarray:
    """Array of Psi(n) for lo <= n <= hi (lo <= 0 <= hi), row n - lo."""
    if lo > 0 or hi < 0:
        raise ValueError("need lo <= 0 <= hi")
    V.require(lo + 1, hi, "propagate_path")
    psi = _state(psi0)
    dtype = complex if np.iscomplexobj(E) or np.iscomplexobj(psi) else float
    # psi(m) for m in [lo, hi + 1]
    s = np.zeros(hi - lo + 2, dtype=dtype)
    z = -lo
    s[z], s[z + 1] = psi
    for m in range(1, hi + 1):
        s[z + m + 1] = (E - V(m)) * s[z + m] - s[z + m - 1]
    for m in range(0, lo, -1):
        s[z + m - 1] = (E - V(m)) * s[z + m] - s[z + m + 1]
    return np.stack([s[:-1], s[1:]], axis=1)


# -- the two auxiliary matrix inequalities ----------------------------------------


@dataclass(frozen=True)
class TelescopingCheck:
    lhs: float
    rhs: float
    holds: bool


def telescoping_bound_check(A_seq: Sequence[np.ndarray], Am_seq: Sequence[np.ndarray]) -> TelescopingCheck:
    """||Am(n)...Am(1) - A(n)...A(1)|| <= n M^{n-1} max_j ||Am(j) - A(j)||.

    M is the largest norm over both families.
    """
    A = np.asarray(A_seq)
    Am = np.asarray(Am_seq)
    if A.shape != Am.shape:
        raise ValueError("length mismatch")
    n = len(A)
    if n < 1:
        raise ValueError("sequences must be nonempty")
    lhs = op_norm(product(list(Am)) - product(list(A)))
    M = max(np.max(op_norm(A)), np.max(op_norm(Am)))
    rhs = n * M ** (n - 1) * float(np.max(op_norm(Am - A)))
    return TelescopingCheck(float(lhs), float(rhs), bool(lhs <= rhs + 1e-9))


@dataclass(frozen=True)
class CayleyCheck:
    max_norm: float
    holds: bool


def cayley_max_norms(B: np.ndarray, x: np.ndarray) -> np.ndarray:
    """max_{a = +-1, +-2} ||B^a x|| for stacks B (N, 2, 2) and x (N, 2)."""
    det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
    Binv = np.empty_like(B)
    Binv[:, 0, 0] = B[:, 1, 1] / det
    Binv[:, 1, 1] = B[:, 0, 0] / det
    Binv[:, 0, 1] = -B[:, 0, 1] / det
    Binv[:, 1, 0] = -B[:, 1, 0] / det
    y1 = np.einsum("nij,nj->ni", B, x)
    y2 = np.einsum("nij,nj->ni", B, y1)
    z1 = np.einsum("nij,nj->ni", Binv, x)
    z2 = np.einsum("nij,nj->ni", Binv, z1)
    norms = np.stack([np.linalg.norm(y, axis=1) for y in (y1, y2, z1, z2)], axis=1)
    return norms.max(axis=1)


def cayley_bound_check(B, x) -> CayleyCheck:
    """max_{a = +-1, +-2} ||B^a x|| >= 1/2 for unit x."""
    B = np.asarray(B)
    x = np.asarray(x)
    if abs(np.linalg.det(B)) <= 1e-12:
        raise ValueError("B must be invertible")
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError("x must be a unit vector")
    m = float(cayley_max_norms(B[None], x[None])[0])
    return CayleyCheck(m, m >= 0.5 - 1e-9)


def random_invertible(rng: np.random.Generator, n: int, lo: float = -5.0, hi: float = 5.0,
                      min_det: float = 1e-6) -> np.ndarray:
    """n matrices with entries uniform in [lo, hi] and |det| >= min_det (rejection sampling)."""
    out = np.empty((0, 2, 2))
    while len(out) < n:
        B = rng.uniform(lo, hi, size=(n, 2, 2))
        ok = np.abs(np.linalg.det(B)) >= min_det
        out = np.concatenate([out, B[ok]])
    return out[:n]


def random_unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    t = rng.uniform(0.0, 2 * np.pi, size=n)
    return np.stack([np.cos(t), np.sin(t)], axis=1)


# -- Gordon lower-bound probe --------------------------------------------------------


@dataclass(frozen=True)
class ProbeRow:
    E: float
    T: int
    ratio: float
    running_sup: float
    deviation: float
    deviation_bound: float


@dataclass(frozen=True)
class GordonProbeReport:
    rows: tuple[ProbeRow, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["E", "T_m", "ratio", "running_sup", "deviation_bound"])
        for r in self.rows:
            w.writerow([f"{np.real(r.E):.17g}", r.T, f"{r.ratio:.17g}", f"{r.running_sup:.17g}",
                        f"{r.deviation_bound:.17g}"])
        return buf.getvalue()


def gordon_lower_bound_probe(V: PotentialWindow, E, psi0, T_list: Sequence[int]) -> GordonProbeReport:
    """Four-point ratios max_{a = +-1, +-2} ||Psi(a T)|| / ||Psi(0)|| per T.

    deviation is max |V - V_T| over -2T < n <= 2T for the period-T
    approximant V_T; deviation_bound = 2T M^{2T-1} deviation bounds how far
    the four normalized norms of V_T's solution can sit from the reported
    ones (M the largest transfer-matrix norm of either potential).  For exactly periodic V it is 0 and ratio >= 1/2 holds.
    """
    T_list = [int(t) for t in T_list]
    if not T_list or min(T_list) < 1:
        raise ValueError("T_list must hold positive integers")
    Tmax = max(T_list)
    V.require(-2 * Tmax, 2 * Tmax + 1, "gordon_lower_bound_probe")
    psi = _state(psi0)
    path = propagate_path(V, E, psi, -2 * Tmax, 2 * Tmax)
    z = 2 * Tmax
    n0 = np.linalg.norm(psi)
    sq = np.sum(np.abs(path) ** 2, axis=1) / n0**2
    rows = []
    for T in sorted(T_list, key=T_list.index):
        ratio = max(np.linalg.norm(path[z + a * T]) for a in (-2, -1, 1, 2)) / n0
        running = float(np.max(sq[z - 2 * T : z + 2 * T + 1]))
        approx = periodic_approximant(V, T)
        n = np.arange(-2 * T + 1, 2 * T + 1)
        dv = np.abs(approx(n) - V(n))
        dev = float(np.max(dv))
        if dev == 0.0:
            bound = 0.0
        else:
            M = max(np.max(op_norm(transfer_matrices(E, V(n)))), np.max(op_norm(transfer_matrices(E, approx(n)))))
            bound = float(2 * T * M ** (2 * T - 1) * dev)
        rows.append(ProbeRow(E, T, float(ratio), running, dev, bound))
    return GordonProbeReport(tuple(rows))


def monodromy(V: PotentialWindow, E, p: int) -> np.ndarray:
    """A(p) ... A(1)."""
    V.require(1, p, "monodromy")
    return product(list(transfer_matrices(E, V(np.arange(1, p + 1)))))
