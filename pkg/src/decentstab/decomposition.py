"""Plant validation and the output-coordinate transform of a relative-degree-one plant.

For a plant ``(A, B, C)`` with ``CB`` nonsingular the transform
``xbar = T x`` with ``T = [N; C]`` and ``T^-1 = [M, B (CB)^-1]`` splits the
closed loop ``A + B K C`` into

    [[NAM,  NAB(CB)^-1          ],
     [CAM,  CAB(CB)^-1 + CB K   ]]

where ``CM = 0``, ``NB = 0`` and ``NM = I``.  The upper-left block carries the
zero dynamics; it is Hurwitz exactly when the plant is minimum phase.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la

from .errors import AssumptionViolation, DimensionError, DomainError, NumericalError
from .matrix_analysis import SpectralReport, as_matrix, spectral_report

__all__ = [
    'RANK_RTOL', 'Plant', 'Decomposition', 'MinimumPhaseReport',
    'validate_plant', 'build_decomposition', 'minimum_phase_report',
    'apply_scaling', 'refined_solve',
]

RANK_RTOL = 1e-8


@dataclass(frozen=True)
class Plant:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    name: str = "plant"

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def CB(self):
        return self.C @ self.B

    def closed_loop(self, k):
        """``A + B diag(k) C`` for a gain vector (or full gain matrix) `k`."""
        k = np.asarray(k, dtype=float)
        K = np.diag(k) if k.ndim == 1 else k
        return self.A + self.B @ K @ self.C


@dataclass(frozen=True)
class Decomposition:
    """Transform matrices and blocks; see the module docstring.

    `D` is the positive diagonal output scaling applied by `apply_scaling`
    (all ones until then).  The blocks ``A12``, ``A21``, ``A22`` and ``CB``
    always refer to the scaled coordinates ``xbar = blkdiag(I, D) T x``;
    ``A11`` is unaffected by output scaling.
    """
    M: np.ndarray
    N: np.ndarray
    T: np.ndarray
    T_inv: np.ndarray
    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    CB: np.ndarray
    square_case: bool
    D: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.D is None:
            object.__setattr__(self, 'D', np.ones(self.CB.shape[0]))

    @property
    def n(self):
        return self.T.shape[0]

    @property
    def m(self):
        return self.CB.shape[0]

    @property
    def state_transform(self):
        """``blkdiag(I, D) T`` mapping plant states to scaled block coordinates."""
        Dbar = np.concatenate([np.ones(self.n - self.m), self.D])
        return Dbar[:, None] * self.T

    def transformed_matrix(self, k):
        """Block matrix ``[[A11, A12], [A21, A22 + CB diag(k)]]``."""
        k = np.asarray(k, dtype=float)
        K = np.diag(k) if k.ndim == 1 else k
        return np.block([[self.A11, self.A12], [self.A21, self.A22 + self.CB @ K]])


@dataclass(frozen=True)
class MinimumPhaseReport:
    has_zeros: bool
    zero_spectrum: SpectralReport | None
    minimum_phase: bool


def _rank_ok(X):
    s = la.svdvals(X)
    return s.size > 0 and s.min() > RANK_RTOL * s.max()


def refined_solve(X, Y):
    """Solve ``X Z = Y`` by LU with one step of residual refinement."""
    try:
        lu = la.lu_factor(X)
        Z = la.lu_solve(lu, Y)
        return Z + la.lu_solve(lu, Y - X @ Z)
    except (la.LinAlgError, ValueError) as exc:
        raise NumericalError(f"linear solve failed: {exc}") from exc


def validate_plant(A, B, C, name="plant"):
    """Check dimensions and the rank conditions on ``B``, ``C`` and ``CB``.

    Raises
    ------
    DimensionError
        Inconsistent shapes or ``m > n``.
    AssumptionViolation
        ``B``, ``C`` or ``CB`` is rank deficient (smallest singular value
        not above ``1e-8`` times the largest).
    """
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    n = A.shape[0]
    if B.shape[0] != n:
        raise DimensionError(f"B has {B.shape[0]} rows, expected {n}")
    m = B.shape[1]
    if C.shape != (m, n):
        raise DimensionError(f"C has shape {C.shape}, expected {(m, n)}")
    if m > n:
        raise DimensionError(f"more channels than states (m={m} > n={n})")
    if not _rank_ok(B):
        raise AssumptionViolation("rank(B)", "B does not have full column rank")
    if not _rank_ok(C):
        raise AssumptionViolation("rank(C)", "C does not have full row rank")
    if not _rank_ok(C @ B):
        raise AssumptionViolation("rank(CB)", "CB is singular")
    return Plant(A, B, C, name)


def build_decomposition(p):
    """Build ``M``, ``N``, ``T``, ``T^-1`` and the transformed blocks of `p`.

    ``M`` is an orthonormal basis of the null space of ``C``, so
    ``N = M^T (I - B (CB)^-1 C)``.  When ``m == n`` the transform reduces to
    ``T = C`` and only the output block ``A22 = C A C^-1`` is populated.
    """
    A, B, C = p.A, p.B, p.C
    n, m = p.n, p.m
    CB = C @ B
    if m == n:
        T = C.copy()
        T_inv = refined_solve(C, np.eye(n))
        empty = np.zeros((0, 0))
        return Decomposition(
            M=np.zeros((n, 0)), N=np.zeros((0, n)), T=T, T_inv=T_inv,
            A11=empty, A12=np.zeros((0, m)), A21=np.zeros((m, 0)),
            A22=C @ A @ T_inv, CB=CB, square_case=True)

    M = la.null_space(C, rcond=RANK_RTOL)
    if M.shape[1] != n - m:
        raise NumericalError(f"null space of C has dimension {M.shape[1]}, expected {n - m}")
    # B (CB)^-1 as the solution of (CB)^T Z^T = B^T
    B_CBinv = refined_solve(CB.T, B.T).T
    N = M.T @ (np.eye(n) - B_CBinv @ C)
    T = np.vstack([N, C])
    T_inv = np.hstack([M, B_CBinv])
    return Decomposition(
        M=M, N=N, T=T, T_inv=T_inv,
        A11=N @ A @ M, A12=N @ A @ B_CBinv, A21=C @ A @ M, A22=C @ A @ B_CBinv,
        CB=CB, square_case=False)


def minimum_phase_report(d):
    """Minimum-phase verdict from the spectrum of the zero-dynamics block."""
    if d.square_case or d.A11.size == 0:
        return MinimumPhaseReport(False, None, True)
    rep = spectral_report(d.A11)
    return MinimumPhaseReport(True, rep, rep.is_hurwitz)


def apply_scaling(d, D):
    """Apply the output-coordinate scaling ``xbar_2 -> D xbar_2``.

    Returns a new `Decomposition` with ``A12 D^-1``, ``D A21``,
    ``D A22 D^-1`` and ``D CB D^-1``.  Because ``D`` and any diagonal gain
    commute, ``D (CB K) D^-1 = (D CB D^-1) K`` and the gain enters the scaled
    block exactly as before.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim == 2:
        if np.any(D != np.diag(np.diag(D))):
            raise DomainError("scaling must be diagonal")
        D = np.diag(D)
    D = D.ravel()
    if D.shape != (d.m,):
        raise DimensionError(f"scaling has length {D.size}, expected {d.m}")
    if not np.all(D > 0) or not np.all(np.isfinite(D)):
        raise DomainError("scaling entries must be finite and strictly positive")
    Dinv = 1.0 / D
    return replace(
        d,
        A12=d.A12 * Dinv[None, :],
        A21=D[:, None] * d.A21,
        A22=D[:, None] * d.A22 * Dinv[None, :],
        CB=D[:, None] * d.CB * Dinv[None, :],
        D=d.D * D,
    )
