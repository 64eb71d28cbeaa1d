import numpy as np
import pytest
import scipy.linalg as la
from numpy.testing import assert_allclose

from decentstab.baselines import (
    PeriodicGain, UnstructuredGain, floquet_report, moreau_gain,
    static_output_feedback_abscissa, trivial_unstructured_gain,
)
from decentstab.decomposition import validate_plant
from decentstab.errors import DimensionError, DomainError
from decentstab.generators import random_square_plant
from decentstab.simulation import ClosedLoopMatrix

# G(s) = (s - 2) / (s^2 - s + 1): static output feedback needs k < -1 for the
# trace and k > -1/2 for the determinant, so no constant gain works
PINNED = dict(A=[[0.0, 1.0], [-1.0, 1.0]], B=[[0.0], [1.0]], C=[[-2.0, 1.0]])
PINNED_GAIN = dict(k1=-3.0, k2=2.0)
# threshold from a DOP853 monodromy oracle (rtol 1e-13); RK4 with 1000 steps
# per period lands within 3e-10 relative
OMEGA_STAR = 7.584871132746105


def pinned_plant():
    return validate_plant(**PINNED, name="nonminimum-phase-2")


def floquet_at(omega, steps=1000):
    p = pinned_plant()
    pg = PeriodicGain(**PINNED_GAIN, omega=omega)
    return floquet_report(ClosedLoopMatrix(p, moreau_gain(pg)), pg.period, pg.period / steps)


# periodic gain

def test_moreau_constant_when_no_amplitude():
    s = moreau_gain(PeriodicGain(1.5, 0.0, 3.0))
    assert_allclose(s.evaluate(np.linspace(0, 5, 11)), 1.5)


@pytest.mark.parametrize("order, expected", [(2, 10.0), (3, 100.0)])
def test_moreau_peak(order, expected):
    s = moreau_gain(PeriodicGain(0.0, 1.0, 10.0, order))
    assert s(np.pi / 20)[0] == pytest.approx(expected, rel=1e-14)


def test_moreau_periodic():
    pg = PeriodicGain(-1.0, 0.7, 13.0)
    s = moreau_gain(pg)
    t = np.linspace(0, 3, 101)
    assert_allclose(s.evaluate(t + pg.period), s.evaluate(t), atol=1e-12)


def test_moreau_domain():
    with pytest.raises(DomainError):
        moreau_gain(PeriodicGain(0, 1, 1, order=4))
    with pytest.raises(DomainError):
        moreau_gain(PeriodicGain(0, 1, 0.0))


# Floquet

def test_floquet_constant_hurwitz():
    A = np.array([[-1.0, 0.5], [0.0, -2.0]])
    rep = floquet_report(lambda t: A, 0.7, 0.007)
    assert_allclose(np.sort(np.abs(rep.multipliers)), np.exp(-np.array([2.0, 1.0]) * 0.7),
                    rtol=1e-9)
    assert_allclose(rep.monodromy, la.expm(0.7 * A), rtol=1e-9)
    assert rep.stable


def test_floquet_marginal():
    rep = floquet_report(lambda t: np.diag([0.0, -1.0]), 1.0, 0.01)
    assert rep.spectral_radius == pytest.approx(1.0, abs=1e-12)
    assert not rep.stable


def test_floquet_step_must_divide_period():
    with pytest.raises(DomainError):
        floquet_report(lambda t: -np.eye(2), 1.0, 0.3)


def test_floquet_multiplier_order():
    p = pinned_plant()
    pg = PeriodicGain(**PINNED_GAIN, omega=10.0)
    f = ClosedLoopMatrix(p, moreau_gain(pg))
    ref = floquet_report(f, pg.period, pg.period / 1600).multipliers
    err = [np.abs(np.sort_complex(floquet_report(f, pg.period, pg.period / s).multipliers)
                  - np.sort_complex(ref)).max() for s in (50, 100)]
    assert 3.5 <= np.log2(err[0] / err[1]) <= 4.5


def test_static_feedback_fails_on_pinned_plant():
    k = np.linspace(-100, 100, 20001)
    assert static_output_feedback_abscissa(pinned_plant(), k).min() > 0.2


def test_pinned_threshold():
    assert floquet_at(OMEGA_STAR * (1 - 1e-7)).spectral_radius > 1
    assert floquet_at(OMEGA_STAR * (1 + 1e-7)).spectral_radius < 1
    assert not floquet_at(OMEGA_STAR * (1 + 1e-7)).stable
    assert floquet_at(OMEGA_STAR * (1 + 1e-3)).stable
    assert floquet_at(10.0).spectral_radius == pytest.approx(0.5335, abs=1e-3)


# unstructured gain

def test_trivial_gain_identity_example():
    p = validate_plant(np.zeros((2, 2)), np.eye(2), np.eye(2))
    K = trivial_unstructured_gain(p, lambda t: -np.eye(2))
    assert_allclose(K(0.0), -np.eye(2))
    assert K.is_diagonal([0.0, 1.0])


def test_trivial_gain_reassembles_target(rng):
    def Q(t):
        return np.array([[-2.0, np.sin(t), 0.0],
                         [0.3, -3.0 + np.cos(t), 0.5],
                         [0.0, 0.2, -1.0]])
    for _ in range(20):
        p = random_square_plant(rng, 3)
        K = trivial_unstructured_gain(p, Q, np.linspace(0, 5, 6))
        for t in np.linspace(0, 5, 11):
            assert K.identity_residual(t) <= 1e-12
        assert not K.is_diagonal([0.0])


def test_trivial_gain_requires_square(rng):
    p = validate_plant(-np.eye(3), np.eye(3)[:, :2], np.eye(3)[:2])
    with pytest.raises(DimensionError):
        trivial_unstructured_gain(p, lambda t: -np.eye(3))


def test_target_properties_reported():
    p = validate_plant(np.zeros((2, 2)), np.eye(2), np.eye(2))
    props = UnstructuredGain(p, lambda t: np.array([[1.0, 3.0], [0.0, -1.0]])).target_properties(0)
    assert props == {'hurwitz': False, 'row_dominant': False, 'column_dominant': False}
    props = UnstructuredGain(p, lambda t: -np.eye(2)).target_properties(0)
    assert all(props.values())
