import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from decentstab.errors import DimensionError, DomainError
from decentstab.generators import random_hurwitz_h_matrix, random_m_matrix
from decentstab.matrix_analysis import (
    comparison_matrix, generalized_dominance_check, h_matrix_certificate,
    is_hurwitz_h_matrix, is_m_matrix, matrix_measure_1, norm_1, spectral_report,
)

small = st.integers(1, 5).flatmap(
    lambda n: arrays(float, (n, n), elements=st.floats(-5, 5, allow_nan=False)))


# comparison matrix

@pytest.mark.parametrize("A, expected", [
    ([[1, -2], [3, -4]], [[1, -2], [-3, 4]]),
    (np.eye(2), np.eye(2)),
    ([[-2, 1], [0.5, -1]], [[2, -1], [-0.5, 1]]),
])
def test_comparison_matrix_examples(A, expected):
    assert_array_equal(comparison_matrix(A), expected)


def test_comparison_matrix_rejects_rectangular():
    with pytest.raises(DimensionError):
        comparison_matrix(np.ones((2, 3)))


@given(small)
def test_comparison_matrix_idempotent(A):
    M = comparison_matrix(A)
    assert_array_equal(comparison_matrix(M), M)


# spectra

def test_spectral_report_diagonal():
    rep = spectral_report([[-1, 0], [0, -2]])
    assert_allclose(np.sort(rep.eigenvalues.real), [-2, -1])
    assert rep.is_hurwitz and rep.spectral_abscissa == pytest.approx(-1)


def test_spectral_report_rotation():
    rep = spectral_report([[0, 1], [-1, 0]])
    assert_allclose(np.sort(rep.eigenvalues.imag), [-1, 1])
    assert not rep.is_hurwitz


def test_spectral_report_against_quadratic_formula():
    # characteristic polynomial s^2 + 3 s + 1.5
    roots = (-3 + np.array([-1, 1]) * np.sqrt(9 - 6)) / 2
    rep = spectral_report([[-2, 1], [0.5, -1]])
    assert_allclose(np.sort(rep.eigenvalues.real), roots, rtol=1e-12)
    assert_allclose(rep.eigenvalues.imag, 0)
    assert rep.is_hurwitz


def test_eigenpair_residuals(rng):
    for _ in range(50):
        A = rng.uniform(-5, 5, (5, 5))
        lam, V = np.linalg.eig(A)
        for k in range(5):
            assert np.linalg.norm(A @ V[:, k] - lam[k] * V[:, k]) <= 1e-8 * np.linalg.norm(A)
        assert_allclose(np.sort_complex(spectral_report(A).eigenvalues), np.sort_complex(lam),
                        atol=1e-10 * np.linalg.norm(A))


# M-matrices

@pytest.mark.parametrize("A, expected", [
    ([[2, -1], [-0.5, 1]], True),
    ([[1, 1], [0, 1]], False),
    ([[0, 0], [0, 0]], False),
])
def test_is_m_matrix_examples(A, expected):
    assert is_m_matrix(A) is expected


def test_constructed_m_matrices(rng):
    for n in range(1, 6):
        assert is_m_matrix(random_m_matrix(rng, n))


# H-matrix certificate

def test_certificate_worked_example():
    cert = h_matrix_certificate([[-2, 1], [4, -3]])
    assert cert.verdict
    # M_A^T d = 1 with M_A = [[2, -1], [-4, 3]]: 2 d1 - 4 d2 = 1, -d1 + 3 d2 = 1
    assert_allclose(cert.scaling_d, [3.5, 1.5], rtol=1e-14)
    assert cert.margin > 0


def test_certificate_refutes():
    cert = h_matrix_certificate([[-1, 2], [2, -1]])
    assert not cert.verdict and cert.scaling_d is None
    with pytest.raises(DomainError):
        cert.scaling_matrix()


def test_certificate_diagonal():
    cert = h_matrix_certificate(-np.eye(2))
    assert cert.verdict
    assert_allclose(cert.scaling_d, [1, 1])


def test_certificate_one_by_one():
    assert h_matrix_certificate([[-3.0]]).verdict
    assert is_hurwitz_h_matrix([[-3.0]])
    assert not h_matrix_certificate([[0.0]]).verdict


def test_certificate_singular_comparison_matrix():
    # comparison matrix [[1, -1], [-1, 1]] is singular
    cert = h_matrix_certificate([[1, 1], [1, 1]])
    assert not cert.verdict


@given(small)
def test_certificate_soundness(A):
    cert = h_matrix_certificate(A)
    if cert.verdict:
        assert np.all(cert.scaling_d > 0) and cert.margin > 0
        assert generalized_dominance_check(A, cert.scaling_d, 'column')
        D = cert.scaling_matrix()
        assert generalized_dominance_check(D @ np.asarray(A) @ np.linalg.inv(D),
                                           np.ones(len(A)), 'column')


@given(small)
def test_certificate_matches_m_matrix_definition(A):
    cert = h_matrix_certificate(A)
    M = comparison_matrix(A)
    lam_min = np.min(np.linalg.eigvals(M).real)
    # away from the singular boundary both tests must agree
    if abs(lam_min) > 1e-6 * max(1.0, np.abs(M).max()):
        assert cert.verdict == (lam_min > 0)


# dominance

@pytest.mark.parametrize("A, x, mode, expected", [
    ([[-2, 1], [4, -3]], [3.5, 1.5], 'column', True),
    ([[-2, 1], [4, -3]], [1, 1], 'column', False),
    (np.eye(2), [1, 1], 'row', True),
])
def test_dominance_examples(A, x, mode, expected):
    assert generalized_dominance_check(A, x, mode) is expected


def test_dominance_rejects_nonpositive_weights():
    with pytest.raises(DomainError):
        generalized_dominance_check(np.eye(2), [1, 0])
    with pytest.raises(DomainError):
        generalized_dominance_check(np.eye(2), [1, 1], 'diagonal')


def test_dominance_is_strict():
    # |a_11| = |a_21| exactly
    assert not generalized_dominance_check([[-1, 0], [1, -2]], [1, 1], 'column')


# Hurwitz H-matrices

@pytest.mark.parametrize("A, expected", [
    ([[-2, 1], [0.5, -1]], True),
    ([[2, -1], [-0.5, 1]], False),
    ([[-1, 2], [2, -1]], False),
])
def test_is_hurwitz_h_matrix_examples(A, expected):
    assert is_hurwitz_h_matrix(A) is expected


def test_constructed_hurwitz_h_matrices(rng):
    for n in range(1, 7):
        H, d = random_hurwitz_h_matrix(rng, n, return_scaling=True)
        assert is_hurwitz_h_matrix(H)
        assert generalized_dominance_check(H, d, 'column')


# measure and norm

@pytest.mark.parametrize("A, expected", [
    (np.zeros((3, 3)), 0.0),
    ([[-2, 1], [1, -2]], -1.0),
    ([[-2, 1], [4, -3]], 2.0),
])
def test_measure_examples(A, expected):
    assert matrix_measure_1(A) == expected


def test_measure_stack_matches_loop(rng):
    S = rng.standard_normal((7, 4, 4))
    assert_allclose(matrix_measure_1(S), [matrix_measure_1(X) for X in S])


def test_measure_is_derivative_of_norm(rng):
    # mu(A) = lim (||I + h A|| - 1) / h
    A = rng.standard_normal((4, 4))
    h = 1e-7
    assert matrix_measure_1(A) == pytest.approx((norm_1(np.eye(4) + h * A) - 1) / h, abs=1e-5)


@given(small)
def test_measure_bounds_spectral_abscissa(A):
    abscissa = np.max(np.linalg.eigvals(A).real)
    assert matrix_measure_1(A) >= abscissa - 1e-9 * max(1.0, np.abs(A).max())


def test_norm_1():
    assert norm_1([[1, -2], [3, 4]]) == 6
    assert norm_1(np.zeros((0, 2))) == 0
