import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gordonlab.diophantine import AlphaRep, dist_to_int
from gordonlab.dynsys import DynSystem, TorusPoint, skew_iterate
from gordonlab.potential import (
    PotentialWindow,
    SampleFunction,
    WindowError,
    flatten_along_tube,
    gordon_certify,
    gordon_gap_verify,
    omega_f_tube_sample,
    periodic_approximant,
    sample_potential,
)
from gordonlab.repetition import prp_probe

GOLDEN = AlphaRep.golden()
COS = SampleFunction.cosine()


def test_sample_potential_examples():
    V = sample_potential(COS, DynSystem.rotation(AlphaRep.rational(1, 2)), TorusPoint.of(0.0), 0, 4)
    assert np.allclose(V.values, [1, -1, 1, -1, 1], atol=1e-15)
    V = sample_potential(SampleFunction.constant(0.7), DynSystem.rotation(GOLDEN), TorusPoint.of(0.2), -3, 3)
    assert np.all(V.values == 0.7)
    a = AlphaRep.rational(1, 4)
    w = TorusPoint.of(0.1, 0.2)
    V = sample_potential(SampleFunction.cosine(axis=1), DynSystem.skew(a), w, 0, 3)
    ref = [math.cos(2 * math.pi * skew_iterate(w, a, n)[1]) for n in range(4)]
    assert np.allclose(V.values, ref, atol=1e-15)


def test_sample_potential_negative_indices():
    sys = DynSystem.skew(GOLDEN)
    w = TorusPoint.of(0.3, 0.4)
    V = sample_potential(COS, sys, w, -5, 2)
    for n in range(-5, 3):
        assert V(n) == COS.scalar(sys.iterate(w, n).coords)


def test_unbounded_sample_is_rejected():
    bad = SampleFunction(lambda x: np.tan(np.pi * x[:, 0]), 10.0)
    with pytest.raises(ValueError, match="potential must be bounded"):
        sample_potential(bad, DynSystem.rotation(AlphaRep.rational(1, 2)), TorusPoint.of(0.0), 0, 3)
    nan = SampleFunction(lambda x: np.full(len(x), np.nan), 1.0)
    with pytest.raises(ValueError, match="potential must be bounded"):
        sample_potential(nan, DynSystem.rotation(GOLDEN), TorusPoint.of(0.1), 0, 3)


def test_window_csv_round_trip():
    V = PotentialWindow.from_values(-3, np.random.default_rng(0).normal(size=9))
    W = PotentialWindow.from_csv(V.to_csv())
    assert W.lo == -3 and np.array_equal(W.values, V.values)


def test_window_errors_name_the_range():
    V = PotentialWindow.from_values(-2, np.zeros(8))
    with pytest.raises(WindowError, match=r"\[-4, 10\]"):
        gordon_certify(V, [5])
    with pytest.raises(WindowError, match="index 9"):
        V(9)
    with pytest.raises(ValueError):
        PotentialWindow(1, 3, np.zeros(3), 1.0)


def test_certify_periodic():
    V = PotentialWindow.from_function(lambda n: np.where(n % 2 == 0, 1.0, -1.0), -10, 20)
    cert = gordon_certify(V, [2, 4, 6], C=1)
    assert cert.passed
    assert all(r.fwd_dev == 0 and r.bwd_dev == 0 for r in cert.rows)
    assert [r.m for r in cert.rows] == [1, 2, 3]


def test_certify_linear_drift():
    V = PotentialWindow.from_function(lambda n: n / 100, -10, 20)
    cert = gordon_certify(V, [5], C=2)
    assert cert.rows[0].fwd_dev == pytest.approx(0.05, abs=1e-15)
    assert cert.passed
    cert = gordon_certify(V, [5], C=2, m_list=[3])
    assert cert.rows[0].bound == pytest.approx(2 * 3**-5)
    assert not cert.passed


def test_certify_liouville_rotation_against_lipschitz_bound():
    a = AlphaRep.parse("liouville:3")
    V = sample_potential(COS, DynSystem.rotation(a), TorusPoint.of(0.0), -30, 30)
    cert = gordon_certify(V, [10])
    lip = 2 * math.pi * dist_to_int(10, a)
    assert cert.rows[0].fwd_dev <= lip + 1e-12 and cert.rows[0].bwd_dev <= lip + 1e-12
    assert cert.passed


def test_certify_input_validation():
    V = PotentialWindow.from_values(-20, np.zeros(41))
    with pytest.raises(ValueError):
        gordon_certify(V, [4, 4])
    with pytest.raises(ValueError):
        gordon_certify(V, [2], C=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.floats(1e-4, 2.0), st.floats(1.0, 4.0), st.integers(0, 2**32 - 1))
def test_certify_monotone_in_C(q, C, factor, seed):
    vals = np.random.default_rng(seed).uniform(-1, 1, 40)
    V = PotentialWindow.from_values(-15, vals)
    if gordon_certify(V, [q], C).passed:
        assert gordon_certify(V, [q], C * factor).passed


def test_approximant_of_periodic_window():
    V = PotentialWindow.from_function(lambda n: np.sin(n % 4), -12, 12)
    A = periodic_approximant(V, 4, 1)
    assert A.r1 == 0 and A.r2 == 0 and A.deviation_2q == 0
    n = np.arange(-8, 9)
    assert np.array_equal(A(n), V(n))


def test_approximant_constant_drift():
    delta = 0.03
    V = PotentialWindow.from_function(lambda n: np.cos(n % 3) + delta * np.floor_divide(n - 1, 3), -9, 9)
    A = periodic_approximant(V, 3, 1)
    assert np.allclose(A.r2_per_n, delta) and A.r2 == pytest.approx(delta)
    for n in range(4, 7):
        assert A(n) == pytest.approx(V(n) - delta)
    for n in range(1, 4):
        assert A(n) == V(n)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_approximant_satisfies_definition(q, m, seed):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-2, 2, 4 * q + 1)
    V = PotentialWindow.from_values(-2 * q, vals, 2.0)
    A = periodic_approximant(V, q, m)
    n = np.arange(-3 * q, 3 * q)
    assert np.array_equal(A(n), A(n + q))
    assert np.array_equal(A(np.arange(1, q + 1)), V(np.arange(1, q + 1)))
    assert A.sup_bound <= V.sup_bound + A.max_residual
    assert A.deviation(V) <= A.max_residual
    clauses = A.check_clauses(V, A.max_residual * float(m) ** q * (1 + 1e-12) + 1e-300)
    assert all(clauses.values())


def test_forward_direction_doubles_constant():
    # V within C m^{-T} of period-T approximants => certify with 2C
    rng = np.random.default_rng(5)
    C = 0.5
    for T, m in ((2, 1), (3, 2), (5, 3)):
        base = rng.uniform(-1, 1, T)
        eps = C * float(m) ** -T
        n = np.arange(-2 * T, 2 * T + 1)
        V = PotentialWindow.from_values(-2 * T, base[n % T] + rng.uniform(-eps, eps, len(n)))
        assert gordon_certify(V, [T], 2 * C, m_list=[m]).passed


# -- tube flattening ------------------------------------------------------------------


@pytest.fixture(scope="module")
def flat():
    anchor = TorusPoint.from_exact([GOLDEN.exact_value()])
    q3 = prp_probe(DynSystem.rotation(GOLDEN), anchor, 3, 1000).entry(3).q
    return flatten_along_tube(COS, GOLDEN, 3, q3)


def test_flatten_conditions(flat):
    assert flat.q_k == 2
    assert flat.r_k == pytest.approx(min(flat.gap / 3, 1 / 6))
    c = np.sort(flat.centers)
    gaps = np.diff(np.concatenate([c, [c[0] + 1]]))
    assert np.all(gaps > 2 * flat.r_k)
    assert np.all(flat.group_diameters <= 4 / 3)


def test_flatten_grid_deviation(flat):
    x = np.linspace(0, 1, 10**4, endpoint=False)
    dev = np.max(np.abs(flat(x) - COS(x[:, None])))
    assert dev <= COS.lipschitz * 4 / 3


def test_flatten_locks_component_values(flat):
    for i, c in enumerate(flat.centers):
        j = i % flat.q_k
        for x in (c, (c + 0.5 * flat.r_k) % 1, (c - flat.r_k) % 1):
            assert flat(x)[0] == flat.locked_values[j]
    assert flat.locked_values[0] == COS.scalar([flat.centers[0]])


def test_flatten_constant_is_noop():
    g = flatten_along_tube(SampleFunction.constant(0.25), GOLDEN, 3, 2)
    x = np.linspace(0, 1, 1000, endpoint=False)
    assert np.all(g(x) == 0.25)


def test_flatten_rejects_collisions_and_missing_certificates():
    with pytest.raises(ValueError, match="orbit not injective on range"):
        flatten_along_tube(COS, AlphaRep.rational(1, 3), 2, 3)
    with pytest.raises(ValueError):
        flatten_along_tube(COS, GOLDEN, 10, 2)


def test_flatten_json(flat):
    d = json.loads(json.dumps(flat.to_dict()))
    assert d["k"] == 3 and d["q_k"] == 2 and len(d["arcs"]) == 8 and len(d["locked_values"]) == 2


def test_tube_sample_positions(flat):
    r = flat.r_k
    w = omega_f_tube_sample(GOLDEN, 3, 2, 2, r)
    assert w == DynSystem.rotation(GOLDEN).iterate(flat.anchor, 4)
    w = omega_f_tube_sample(GOLDEN, 3, 2, 1, r)
    assert w == DynSystem.rotation(GOLDEN).iterate(flat.anchor, 3)
    with pytest.raises(ValueError):
        omega_f_tube_sample(GOLDEN, 3, 2, 1, r, offset=2 * r)


@pytest.mark.parametrize("j", [1, 2])
@pytest.mark.parametrize("frac", [0.0, 0.5, -0.5, 1.0])
def test_gap_verify_on_tube(flat, j, frac):
    w = omega_f_tube_sample(GOLDEN, 3, flat.q_k, j, flat.r_k, frac * flat.r_k)
    rep = gordon_gap_verify(flat, w, 3, flat.q_k)
    assert rep.fwd == 0.0 and rep.bwd == 0.0
    assert rep.bound == 2 * 3.0**-flat.q_k and rep.passed
    assert rep.j_hat == j
    base = gordon_gap_verify(flat, w, use_base=True)
    assert base.fwd > 0


def test_gap_verify_outside(flat):
    far = (flat.centers[0] + 0.5) % 1
    with pytest.raises(ValueError, match="not in Omega_f sample set"):
        gordon_gap_verify(flat, TorusPoint.of(0.0 if flat.arc_index([0.0])[0] == 0 else far))
    # arcs of index 1..q_k are in the tube but not in its q_k-shifted image
    with pytest.raises(ValueError, match="not in Omega_f sample set"):
        gordon_gap_verify(flat, TorusPoint.of(flat.centers[0]))


def test_flatten_deeper_level():
    anchor = TorusPoint.from_exact([GOLDEN.exact_value()])
    qk = prp_probe(DynSystem.rotation(GOLDEN), anchor, 6, 1000).entry(6).q
    g = flatten_along_tube(COS, GOLDEN, 6, qk)
    for j in (1, qk):
        w = omega_f_tube_sample(GOLDEN, 6, qk, j, g.r_k, 0.3 * g.r_k)
        rep = gordon_gap_verify(g, w)
        assert rep.fwd == 0 and rep.bwd == 0 and rep.passed
