"""Special-matrix tests, diagonal-scaling certificates and matrix measures.

Everything here works on small dense real matrices given as anything
``numpy.asarray`` accepts.  Strict inequalities are decided with a relative
tolerance of ``RTOL``; the Hurwitz test uses ``RTOL`` times the largest
absolute entry of the matrix.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import DimensionError, DomainError, NumericalError

__all__ = [
    'RTOL', 'HMatrixCertificate', 'SpectralReport', 'as_matrix',
    'comparison_matrix', 'spectral_report', 'hurwitz_tol', 'is_m_matrix',
    'h_matrix_certificate', 'is_hurwitz_h_matrix',
    'generalized_dominance_check', 'dominance_slack', 'matrix_measure_1',
    'norm_1',
]

RTOL = 1e-9


def as_matrix(A, name="A", square=False):
    """Return `A` as a finite 2-D float array, optionally checking squareness."""
    A = np.array(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} has non-finite entries")
    return A


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    spectral_abscissa: float
    is_hurwitz: bool


@dataclass(frozen=True)
class HMatrixCertificate:
    """Outcome of the H-matrix test.

    When `verdict` is true, `scaling_d` is a strictly positive vector with
    ``|a_jj| d_j > sum_{i != j} |a_ij| d_i`` for every column ``j``, so that
    ``diag(d) A diag(d)^-1`` is strictly column-diagonal dominant.  `margin`
    is the smallest of these column slacks.
    """
    verdict: bool
    scaling_d: np.ndarray | None
    margin: float
    reason: str = field(default="")

    def scaling_matrix(self):
        if self.scaling_d is None:
            raise DomainError("no scaling available: matrix is not an H-matrix")
        return np.diag(self.scaling_d)


def comparison_matrix(A):
    """Comparison matrix: ``|a_ii|`` on the diagonal, ``-|a_ij|`` elsewhere.

    Examples
    --------
    >>> comparison_matrix([[1, -2], [3, -4]])
    array([[ 1., -2.],
           [-3.,  4.]])
    """
    A = as_matrix(A, square=True)
    M = -np.abs(A)
    np.fill_diagonal(M, np.abs(np.diag(A)))
    return M


def hurwitz_tol(A):
    return RTOL * float(np.max(np.abs(A), initial=0.0))


def spectral_report(A):
    """Eigenvalues, spectral abscissa and Hurwitz verdict of a square matrix.

    The matrix is Hurwitz when its spectral abscissa is below ``-hurwitz_tol(A)``.
    """
    A = as_matrix(A, square=True)
    try:
        eigs = la.eigvals(A)
    except la.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    abscissa = float(np.max(eigs.real))
    return SpectralReport(eigs, abscissa, abscissa < -hurwitz_tol(A))


def is_m_matrix(A):
    """True when off-diagonals are non-positive and the spectrum lies in Re > 0."""
    A = as_matrix(A, square=True)
    off = A[~np.eye(A.shape[0], dtype=bool)]
    if np.any(off > 0):
        return False
    eigs = spectral_report(A).eigenvalues
    return bool(np.min(eigs.real) > hurwitz_tol(A))


def dominance_slack(A, x, mode="column"):
    """Per-line slack ``|a_jj| x_j - sum_{i != j} |a_ij| x_i`` and its scale.

    Returns ``(slack, scale)`` where `scale` is the matching sum of absolute
    terms; strict dominance of line ``j`` means ``slack[j] > RTOL * scale[j]``.
    """
    A = as_matrix(A, square=True)
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (A.shape[0],):
        raise DimensionError(f"weight vector has length {x.size}, expected {A.shape[0]}")
    absA = np.abs(A)
    diag = np.diag(absA) * x
    if mode == "column":
        total = absA.T @ x
    elif mode == "row":
        total = absA @ x
    else:
        raise DomainError(f"mode must be 'row' or 'column', got {mode!r}")
    off = total - diag
    return diag - off, diag + off


def generalized_dominance_check(A, x, mode="column"):
    """Check strict weighted row or column diagonal dominance.

    Parameters
    ----------
    A : (n, n) array_like
    x : (n,) array_like
        Strictly positive weights.
    mode : {'column', 'row'}
        ``'column'`` tests ``|a_jj| x_j > sum_{i != j} |a_ij| x_i`` for all
        ``j``; ``'row'`` tests ``|a_ii| x_i > sum_{j != i} |a_ij| x_j``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(x > 0):
        raise DomainError("dominance weights must be strictly positive")
    slack, scale = dominance_slack(A, x, mode)
    return bool(np.all(slack > RTOL * scale))


def h_matrix_certificate(A):
    """Decide whether `A` is an H-matrix and return a column-scaling witness.

    The candidate weights solve ``M_A^T d = 1`` where ``M_A`` is the comparison
    matrix.  For a nonsingular M-matrix the inverse is entrywise nonnegative
    with no zero row, so the solution is strictly positive; conversely a
    positive ``d`` with ``M_A^T d > 0`` makes the Z-matrix ``M_A`` an M-matrix.
    The test is therefore complete up to the strictness tolerance.
    """
    A = as_matrix(A, square=True)
    MT = comparison_matrix(A).T
    ones = np.ones(A.shape[0])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu = la.lu_factor(MT, check_finite=False)
        if np.any(np.abs(np.diag(lu[0])) <= np.finfo(float).eps * max(np.abs(MT).max(), 1e-300)):
            raise la.LinAlgError("singular comparison matrix")
        d = la.lu_solve(lu, ones)
        # one step of residual refinement
        d = d + la.lu_solve(lu, ones - MT @ d)
    except (la.LinAlgError, ValueError) as exc:
        return HMatrixCertificate(False, None, float("nan"), f"comparison matrix singular ({exc})")
    if not np.all(np.isfinite(d)):
        return HMatrixCertificate(False, None, float("nan"), "comparison matrix singular")
    slack, scale = dominance_slack(A, np.abs(d), "column")
    margin = float(np.min(slack))
    if not np.all(d > 0):
        return HMatrixCertificate(False, None, margin, "solution of M_A^T d = 1 is not positive")
    if not np.all(slack > RTOL * scale):
        return HMatrixCertificate(False, None, margin, "dominance slack below tolerance")
    return HMatrixCertificate(True, d, margin, "")


def is_hurwitz_h_matrix(A):
    """H-matrix with strictly negative diagonal, cross-checked against the spectrum.

    Such a matrix is always Hurwitz (Gershgorin discs of the scaled matrix
    lie in the open left half plane); a disagreement with the eigenvalues
    signals a tolerance problem and raises `NumericalError`.
    """
    A = as_matrix(A, square=True)
    if not np.all(np.diag(A) < 0):
        return False
    if not h_matrix_certificate(A).verdict:
        return False
    rep = spectral_report(A)
    if not rep.is_hurwitz:
        raise NumericalError(
            "H-matrix certificate with negative diagonal but spectral abscissa "
            f"{rep.spectral_abscissa:.3e} is not below -{hurwitz_tol(A):.3e}")
    return True


def matrix_measure_1(A):
    """Matrix measure induced by the vector 1-norm.

    ``max_j (a_jj + sum_{i != j} |a_ij|)``.  Stacks of matrices with shape
    ``(..., n, n)`` are reduced over the last two axes.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DimensionError(f"expected square matrix (stack), got shape {A.shape}")
    diag = np.diagonal(A, axis1=-2, axis2=-1)
    cols = np.abs(A).sum(axis=-2) - np.abs(diag) + diag
    out = cols.max(axis=-1)
    return float(out) if out.ndim == 0 else out


def norm_1(A):
    """Induced 1-norm (largest absolute column sum); 0 for empty matrices."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.abs(A).sum(axis=0).max())
