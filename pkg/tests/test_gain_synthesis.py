import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from decentstab.decomposition import apply_scaling, build_decomposition
from decentstab.errors import CertificateError, DomainError, ScheduleValidationError
from decentstab.gain_synthesis import (
    K_FLOOR, ExpBound, GainSchedule, exp_bound, exp_bound_ratio, gain_lower_bounds, gamma,
    key_condition_columns, make_schedule, verify_key_condition,
)
from decentstab.generators import random_certified_plant, random_hurwitz
from decentstab.matrix_analysis import h_matrix_certificate, matrix_measure_1, norm_1


def bisect_floor(A, B, g, j, hi=1e6):
    """Smallest k_j making column j of the split bound reach -g, by bisection."""
    def col(k):
        off = lambda X: np.abs(X[:, j]).sum() - abs(X[j, j])
        return k * B[j, j] + A[j, j] + k * off(B) + off(A) + g
    lo = 0.0
    if col(lo) < 0:
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if col(mid) >= 0 else (lo, mid)
    return hi


def certified_blocks(rng):
    n = int(rng.integers(2, 7))
    m = int(rng.integers(1, n + 1))
    p = random_certified_plant(rng, n, m)
    d = apply_scaling(build_decomposition(p), h_matrix_certificate(p.CB).scaling_d)
    eb = None if d.square_case else exp_bound(d.A11)
    return d, eb, gamma(eb, d.A21, d.A12)


# exponential bound

def test_exp_bound_normal():
    eb = exp_bound(np.diag([-1.0, -2.0]))
    assert eb.beta11 == pytest.approx(0.9)
    assert 1.0 <= eb.M11 <= 1.1 + 1e-12


def test_exp_bound_scalar():
    eb = exp_bound([[-3.0]])
    assert eb.beta11 == pytest.approx(2.7)
    assert eb.M11 <= 1.1 + 1e-12


def test_exp_bound_non_normal():
    A = np.array([[-1.0, 10.0], [0.0, -1.0]])
    eb = exp_bound(A)
    # ||exp(A t)||_1 = exp(-t) (1 + 10 t); times exp(0.9 t) peaks at t = 9.9
    peak = (1 + 10 * 9.9) * np.exp(-0.1 * 9.9)
    assert eb.M11 > 1
    assert peak <= eb.M11 <= 1.1 * peak * (1 + 1e-9)


def test_exp_bound_rejects_unstable():
    with pytest.raises(DomainError):
        exp_bound([[0.1]])


def test_exp_bound_soundness(rng):
    for _ in range(20):
        A = random_hurwitz(rng, int(rng.integers(1, 6)))
        eb = exp_bound(A)
        t = np.linspace(0, 10 / eb.beta11, 200)
        norms = np.array([norm_1(la.expm(A * s)) for s in t])
        assert np.all(norms <= eb.M11 * np.exp(-eb.beta11 * t) * (1 + 1e-12))
        assert_allclose(exp_bound_ratio(A, eb.beta11, t), norms * np.exp(eb.beta11 * t))


# gamma

def test_gamma_examples():
    assert gamma(ExpBound(1.0, 1.0), [[2.0]], [[3.0]]) == 6.0
    assert gamma(ExpBound(2.0, 0.5), np.zeros((2, 3)), np.ones((3, 2))) == 0.0
    assert gamma(None, np.zeros((2, 0)), np.zeros((0, 2))) == 0.0


def test_gamma_uses_induced_one_norm():
    A21 = np.array([[1.0, -4.0], [2.0, 0.0]])
    A12 = np.array([[0.5, 0.5], [-1.0, 1.0]])
    assert gamma(ExpBound(1.5, 0.3), A21, A12) == pytest.approx(1.5 * 4.0 * 1.5 / 0.3)


# gain floors

def test_floors_zero_coupling():
    assert_allclose(gain_lower_bounds(np.zeros((3, 3)), -np.eye(3), 0.0), K_FLOOR)


def test_floors_scalar():
    assert gain_lower_bounds([[2.0]], [[-2.0]], 1.0) == pytest.approx(1.5)


@pytest.mark.parametrize("g, expected", [(0.0, [1.0, 3.0]), (1.0, [5 / 3, 5.0])])
def test_floors_two_channels(g, expected):
    A = np.array([[1.0, 0.5], [0.5, 1.0]])
    B = np.array([[-2.0, 0.5], [0.5, -1.0]])
    k = gain_lower_bounds(A, B, g)
    assert_allclose(k, expected, rtol=1e-14)
    assert_allclose(k, [bisect_floor(A, B, g, j) for j in range(2)], rtol=1e-12)


def test_floors_reject_non_dominant():
    with pytest.raises(CertificateError):
        gain_lower_bounds(np.zeros((2, 2)), [[-1.0, 0.5], [2.0, -1.0]], 0.0)
    with pytest.raises(CertificateError):
        gain_lower_bounds(np.zeros((1, 1)), [[1.0]], 0.0)


def test_floors_on_certified_plants(rng):
    for _ in range(25):
        d, eb, g = certified_blocks(rng)
        k = gain_lower_bounds(d.A22, d.CB, g)
        assert np.all(k >= K_FLOOR)
        for j, kj in enumerate(k):
            if kj > K_FLOOR:
                assert kj == pytest.approx(bisect_floor(d.A22, d.CB, g, j), rel=1e-9)
        assert verify_key_condition(d.A22, d.CB, k * (1 + 1e-3), g)
        assert verify_key_condition(d.A22, d.CB, k * 1.01, g)


# key condition

def test_key_condition_scalar_boundary():
    # column value k (-2) + 2 against -gamma = -1
    assert not verify_key_condition([[2.0]], [[-2.0]], [1.5], 1.0)
    assert verify_key_condition([[2.0]], [[-2.0]], [2.0], 1.0)
    assert verify_key_condition([[2.0]], [[-2.0]], [2.1], 1.0)


def test_key_condition_zero_gain():
    assert not verify_key_condition([[1.0, 0.0], [0.0, 0.5]], -np.eye(2), np.zeros(2), 0.0)


def test_key_condition_accepts_diagonal_matrix():
    A, B = np.zeros((2, 2)), -np.eye(2)
    assert verify_key_condition(A, B, np.diag([1.0, 2.0]), 0.5)
    with pytest.raises(DomainError):
        verify_key_condition(A, B, [[1.0, 1.0], [0.0, 1.0]], 0.5)
    with pytest.raises(DomainError):
        verify_key_condition(A, B, [-1.0, 1.0], 0.5)


def test_split_bound_dominates_measure(rng):
    for _ in range(200):
        m = int(rng.integers(1, 6))
        A = rng.standard_normal((m, m))
        B = rng.standard_normal((m, m))
        k = rng.uniform(0, 5, m)
        bound = key_condition_columns(A, B, k).max()
        assert matrix_measure_1(A + B * k) <= bound + 1e-12 * (1 + np.abs(bound))


def test_split_bound_equals_measure_when_signs_agree(rng):
    for _ in range(200):
        m = int(rng.integers(1, 6))
        A = np.abs(rng.standard_normal((m, m)))
        B = np.abs(rng.standard_normal((m, m)))
        np.fill_diagonal(B, -rng.uniform(1, 2, m))
        k = rng.uniform(0, 5, m)
        assert key_condition_columns(A, B, k).max() == pytest.approx(
            matrix_measure_1(A + B * k), rel=1e-12, abs=1e-12)


@given(st.integers(0, 2**31), st.floats(1e-3, 100))
def test_key_condition_monotone_in_gain(seed, extra):
    rng = np.random.default_rng(seed)
    d, eb, g = certified_blocks(rng)
    k = gain_lower_bounds(d.A22, d.CB, g) * 1.001
    bump = np.zeros_like(k)
    bump[rng.integers(k.size)] = extra
    assert verify_key_condition(d.A22, d.CB, k, g)
    assert verify_key_condition(d.A22, d.CB, k + bump, g)


# schedules

def test_constant_schedule():
    s = make_schedule('constant', [1.0, 2.0], params={'safety': 1.1})
    assert_allclose(s.evaluate([0.0, 5.0]), [[1.1, 2.2], [1.1, 2.2]])
    assert s.t_bar == 0.0 and not s.violations()


def test_ramp_schedule():
    k = np.array([1.0, 2.0])
    s = make_schedule('ramp', k, t_bar=5.0, params={'safety': 1.1})
    assert_allclose(s(0.0), [0.0, 0.0])
    assert_allclose(s(2.5), 0.55 * k)
    assert_allclose(s(5.0), 1.1 * k)
    assert_allclose(s(50.0), 1.1 * k)
    with pytest.raises(DomainError):
        make_schedule('ramp', k)


def test_custom_schedule_rejected_below_floor():
    k = np.array([1.0])
    params = {'times': [0, 1, 2, 3], 'values': [0.0, 2.0, 0.5, 2.0]}
    with pytest.raises(ScheduleValidationError) as exc:
        make_schedule('custom', k, t_bar=1.0, params=params)
    assert exc.value.violations == [(0, 2.0)]
    ok = make_schedule('custom', k, t_bar=1.0, params={'times': [0, 1, 3], 'values': [0, 2, 2]})
    assert ok(0.5)[0] == pytest.approx(1.0)


def test_unvalidated_schedule_reports_violations():
    s = make_schedule('constant', [1.0, 1.0], params={'gains': [0.5, 2.0]}, validate=False)
    assert s.violations() == [(0, 0.0)]


def test_schedule_round_trip():
    s = make_schedule('ramp', [1.0, 2.0], t_bar=3.0, params={'safety': 1.2, 'start': 0.5})
    r = GainSchedule.from_dict(s.to_dict())
    t = np.linspace(0, 6, 13)
    assert_allclose(r.evaluate(t), s.evaluate(t), rtol=0, atol=0)
    assert r.t_bar == s.t_bar
    assert_allclose(r.k_tilde, s.k_tilde)


def test_schedule_errors():
    with pytest.raises(DomainError):
        make_schedule('sawtooth', [1.0])
    with pytest.raises(DomainError):
        make_schedule('constant', [1.0], params={'gain': 2})
    with pytest.raises(DomainError):
        make_schedule('custom', [1.0], params={'times': [1, 0], 'values': [1, 1]})
    with pytest.raises(DomainError):
        GainSchedule('sawtooth', {})
