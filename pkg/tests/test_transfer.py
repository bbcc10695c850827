import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gordonlab.diophantine import AlphaRep
from gordonlab.dynsys import DynSystem, TorusPoint
from gordonlab.potential import PotentialWindow, SampleFunction, WindowError, gordon_certify, sample_potential
from gordonlab.transfer import (
    cayley_bound_check,
    cayley_max_norms,
    gordon_lower_bound_probe,
    inverse_transfer_matrix,
    monodromy,
    op_norm,
    propagate,
    propagate_path,
    random_invertible,
    random_unit_vectors,
    telescoping_bound_check,
    transfer_matrix,
    transfer_matrices,
)

reals = st.floats(-5, 5, allow_nan=False)


def _scalar_oracle(V, E, psi0, n):
    """psi(n), psi(n+1) from the three-term recurrence, forward or backward."""
    psi = {0: psi0[0], 1: psi0[1]}
    if n >= 0:
        for m in range(1, n + 1):
            psi[m + 1] = (E - V[m]) * psi[m] - psi[m - 1]
    else:
        for m in range(0, n, -1):
            psi[m - 1] = (E - V[m]) * psi[m] - psi[m + 1]
    return np.array([psi[n], psi[n + 1]])


def test_transfer_matrix_examples():
    assert np.array_equal(transfer_matrix(0, 0), [[0, 1], [-1, 0]])
    assert np.array_equal(transfer_matrix(2, 1), [[0, 1], [-1, 1]])
    assert transfer_matrix(1j, 0.5).dtype == complex


@given(reals, reals)
def test_unimodular_and_inverse(E, v):
    A = transfer_matrix(E, v)
    assert abs(np.linalg.det(A) - 1) <= 1e-12
    assert np.allclose(A @ inverse_transfer_matrix(E, v), np.eye(2), atol=1e-12)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_op_norm_closed_form(entries):
    M = np.array(entries).reshape(2, 2)
    assert op_norm(M) == pytest.approx(np.linalg.norm(M, 2), rel=1e-9, abs=1e-12)


def test_op_norm_complex_and_stacked():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(50, 2, 2)) + 1j * rng.normal(size=(50, 2, 2))
    assert np.allclose(op_norm(M), [np.linalg.norm(m, 2) for m in M], rtol=1e-12)


def test_propagate_free_examples():
    Z = PotentialWindow.from_values(-10, np.zeros(21))
    for psi0 in ([1, 0], [0.3, -2.0]):
        assert np.allclose(propagate(Z, 0.0, psi0, 4), psi0, atol=1e-15)
        assert np.allclose(propagate(Z, 0.0, psi0, 2), -np.array(psi0), atol=1e-15)
    assert np.array_equal(propagate(Z, 0.0, [1, 0], 1), [0, -1])


def test_propagate_matches_matrix_product():
    rng = np.random.default_rng(3)
    V = PotentialWindow.from_values(-12, rng.uniform(-2, 2, 25))
    E, psi0 = 0.37, np.array([0.6, -0.8])
    mats = transfer_matrices(E, V(np.arange(1, 11)))
    P = np.eye(2)
    for A in mats:
        P = A @ P
    assert np.allclose(propagate(V, E, psi0, 10), P @ psi0, rtol=1e-12)


def test_propagate_agrees_with_scalar_recurrence_on_random_cases():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        L = int(rng.integers(1, 40))
        vals = rng.uniform(-3, 3, 2 * L + 3)
        V = PotentialWindow.from_values(-L - 1, vals)
        Vd = {n: V(n) for n in range(-L - 1, L + 2)}
        E = float(rng.uniform(-4, 4))
        psi0 = rng.normal(size=2)
        n = int(rng.integers(-L, L + 1))
        got = propagate(V, E, psi0, n)
        ref = _scalar_oracle(Vd, E, psi0, n)
        assert np.linalg.norm(got - ref) <= 1e-10 * max(1.0, np.linalg.norm(ref))


def test_propagate_path_rows():
    rng = np.random.default_rng(1)
    V = PotentialWindow.from_values(-8, rng.uniform(-1, 1, 17))
    path = propagate_path(V, 0.2, [1.0, 0.5], -7, 7)
    for n in (-7, -1, 0, 3, 7):
        assert np.allclose(path[n + 7], propagate(V, 0.2, [1.0, 0.5], n), rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 1000), st.integers(0, 2**32 - 1), st.floats(-1.8, 1.8))
def test_forward_then_backward_round_trip(n, seed, E):
    # energies inside the free band with weak disorder keep solution growth,
    # and so the backward cancellation, well inside double precision
    rng = np.random.default_rng(seed)
    V = PotentialWindow.from_values(0, rng.uniform(-0.05, 0.05, n + 1))
    psi0 = rng.normal(size=2)
    back = propagate(V, E, propagate(V, E, psi0, n), -n, start=n)
    assert np.linalg.norm(back - psi0) <= 1e-9 * np.linalg.norm(psi0)


def test_propagate_window_errors():
    V = PotentialWindow.from_values(-2, np.zeros(5))
    with pytest.raises(WindowError, match="3"):
        propagate(V, 0.0, [1, 0], 3)
    with pytest.raises(WindowError):
        propagate(V, 0.0, [1, 0], -4)
    with pytest.raises(ValueError):
        propagate(V, 0.0, [0, 0], 1)


def test_complex_energy():
    V = PotentialWindow.from_values(-3, np.linspace(-1, 1, 7))
    got = propagate(V, 0.3 + 0.2j, [1, 0], 3)
    ref = _scalar_oracle({n: V(n) for n in range(-3, 4)}, 0.3 + 0.2j, [1, 0], 3)
    assert np.allclose(got, ref)


def test_telescoping_examples():
    chk = telescoping_bound_check([np.eye(2)] * 3, [np.eye(2)] * 3)
    assert chk.lhs == 0 and chk.holds
    chk = telescoping_bound_check([np.eye(2)], [np.diag([1.0, 2.0])])
    assert chk.lhs == pytest.approx(1.0) and chk.rhs == pytest.approx(1.0) and chk.holds
    with pytest.raises(ValueError, match="length mismatch"):
        telescoping_bound_check([np.eye(2)], [np.eye(2)] * 2)


def test_telescoping_random_suite():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        L = int(rng.integers(1, 21))
        chk = telescoping_bound_check(rng.uniform(-2, 2, (L, 2, 2)), rng.uniform(-2, 2, (L, 2, 2)))
        assert chk.holds


@settings(max_examples=200)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(1e-8, 1.0))
def test_telescoping_small_perturbations(L, seed, scale):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-2, 2, (L, 2, 2))
    assert telescoping_bound_check(A, A + scale * rng.uniform(-1, 1, (L, 2, 2))).holds


def test_cayley_examples():
    assert cayley_bound_check(np.eye(2), [0.6, 0.8]).max_norm == pytest.approx(1.0)
    assert cayley_bound_check(np.diag([2.0, 0.5]), [1, 0]).max_norm == pytest.approx(4.0)
    t = 0.7
    R = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    chk = cayley_bound_check(R, [1, 0])
    assert chk.max_norm == pytest.approx(1.0) and chk.holds
    with pytest.raises(ValueError):
        cayley_bound_check(np.zeros((2, 2)), [1, 0])
    with pytest.raises(ValueError):
        cayley_bound_check(np.eye(2), [1, 1])


def test_cayley_random_suite():
    rng = np.random.default_rng(5)
    B = random_invertible(rng, 10**4)
    x = random_unit_vectors(rng, 10**4)
    assert np.all(np.abs(np.linalg.det(B)) >= 1e-6)
    m = cayley_max_norms(B, x)
    assert np.all(m >= 0.5 - 1e-9)
    for i in range(0, 10**4, 997):
        assert cayley_bound_check(B[i], x[i]).max_norm == pytest.approx(m[i])


def test_probe_free_case():
    Z = PotentialWindow.from_values(-10, np.zeros(21))
    rep = gordon_lower_bound_probe(Z, 0.0, [1, 0], [1, 2, 3])
    for r in rep.rows:
        assert r.ratio == pytest.approx(1.0) and r.running_sup == pytest.approx(1.0) and r.deviation_bound == 0


@pytest.mark.parametrize("pattern", [[0.0, 1.0], [0.3, -1.2, 0.7], [1, 0, 0, 2, -1]])
def test_probe_exact_periodic_bound(pattern):
    p = len(pattern)
    Ts = [m * p for m in range(1, 5)]
    V = PotentialWindow.from_function(lambda n: np.array(pattern)[n % p], -2 * Ts[-1], 2 * Ts[-1] + 1)
    for E in np.linspace(-3, 3, 16):
        for r in gordon_lower_bound_probe(V, E, [1, 0], Ts).rows:
            assert r.ratio >= 0.5 - 1e-9 and r.deviation == 0.0


def test_monodromy_power_identity():
    rng = np.random.default_rng(9)
    for p in (1, 2, 3, 5):
        pattern = rng.uniform(-1, 1, p)
        V = PotentialWindow.from_function(lambda n: pattern[n % p], -25, 26)
        for E in (-1.7, 0.1, 2.2):
            B = monodromy(V, E, p)
            psi0 = np.array([0.4, 0.9])
            for a in (-2, -1, 1, 2):
                ref = np.linalg.matrix_power(B, a) @ psi0 if a > 0 else np.linalg.matrix_power(np.linalg.inv(B), -a) @ psi0
                got = propagate(V, E, psi0, a * p)
                assert np.linalg.norm(got - ref) <= 1e-9 * max(1, np.linalg.norm(ref))


def test_probe_liouville_reports_perturbation():
    a = AlphaRep.parse("liouville:3")
    V = sample_potential(SampleFunction.cosine(), DynSystem.rotation(a), TorusPoint.of(0.0), -30, 30)
    rep = gordon_lower_bound_probe(V, 0.5, [1, 0], [10])
    row = rep.rows[0]
    dev = max(gordon_certify(V, [10]).rows[0].fwd_dev, gordon_certify(V, [10]).rows[0].bwd_dev)
    assert row.deviation >= dev - 1e-15
    assert row.deviation_bound > 0
    assert row.ratio >= 0.5 - row.deviation_bound
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["E", "T_m", "ratio", "running_sup", "deviation_bound"]


def test_probe_running_sup_is_monotone():
    rng = np.random.default_rng(4)
    V = PotentialWindow.from_values(-41, rng.uniform(-1, 1, 84))
    rows = gordon_lower_bound_probe(V, 0.3, [1, 0], [2, 5, 9, 20]).rows
    sups = [r.running_sup for r in rows]
    assert sups == sorted(sups) and sups[0] >= 1.0
    with pytest.raises(WindowError):
        gordon_lower_bound_probe(V, 0.3, [1, 0], [21])
