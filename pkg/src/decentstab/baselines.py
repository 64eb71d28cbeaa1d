"""Reference stabilization schemes with unstructured or scalar periodic gains.

* `moreau_gain`: scalar periodic output gain ``k1 + k2 omega sin(omega t)``
  (second-order plants) or ``k1 + k2 omega^2 sin(omega t)`` (third order),
  certified through Floquet multipliers.
* `trivial_unstructured_gain`: for square invertible ``B`` and ``C``, the full
  matrix gain ``K(t) = B^-1 (Q(t) - A) C^-1`` that places the closed loop at
  any prescribed ``Q(t)``.  It is generally not diagonal.
"""

from dataclasses import dataclass

import numpy as np

from .decomposition import refined_solve
from .errors import DimensionError, DomainError
from .gain_synthesis import GainSchedule
from .matrix_analysis import as_matrix, generalized_dominance_check, spectral_report
from .simulation import integrate_linear

__all__ = [
    'MULTIPLIER_TOL', 'OFFDIAG_TOL', 'PeriodicGain', 'FloquetReport',
    'UnstructuredGain', 'moreau_gain', 'floquet_report',
    'trivial_unstructured_gain', 'static_output_feedback_abscissa',
]

MULTIPLIER_TOL = 1e-6
OFFDIAG_TOL = 1e-9


@dataclass(frozen=True)
class PeriodicGain:
    k1: float
    k2: float
    omega: float
    order: int = 2

    @property
    def period(self):
        return 2 * np.pi / self.omega


@dataclass(frozen=True)
class FloquetReport:
    monodromy: np.ndarray
    multipliers: np.ndarray
    stable: bool

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(self.multipliers)))


def moreau_gain(pg):
    """Scalar periodic schedule for a SISO plant of order ``pg.order``."""
    if pg.order not in (2, 3):
        raise DomainError(f"periodic gain defined for order 2 or 3, got {pg.order}")
    if not pg.omega > 0:
        raise DomainError("omega must be positive")
    return GainSchedule('periodic', {'k1': pg.k1, 'k2': pg.k2, 'omega': pg.omega,
                                     'order': pg.order})


def floquet_report(A_of_t, period, dt, tol=MULTIPLIER_TOL):
    """Monodromy matrix of a periodic ``x' = A(t) x`` and its multipliers.

    The state-transition matrix is integrated with RK4 from ``X(0) = I``
    over one period; `dt` must divide `period` (to relative accuracy 1e-9).
    The system is reported stable when every multiplier has modulus below
    ``1 - tol``.
    """
    if not period > 0 or not dt > 0:
        raise DomainError("period and dt must be positive")
    steps = period / dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise DomainError(f"dt={dt!r} does not divide the period {period!r}")
    steps = max(1, int(round(steps)))
    n = np.asarray(A_of_t(0.0)).shape[0]
    times = np.linspace(0.0, period, steps + 1)
    X = integrate_linear(A_of_t, np.eye(n), times)[-1]
    mult = np.linalg.eigvals(X)
    return FloquetReport(X, mult, bool(np.all(np.abs(mult) < 1 - tol)))


def static_output_feedback_abscissa(plant, gains):
    """Spectral abscissa of ``A + k B C`` for each scalar gain (SISO plants)."""
    return np.array([spectral_report(plant.A + k * plant.B @ plant.C).spectral_abscissa
                     for k in np.asarray(gains, dtype=float)])


class UnstructuredGain:
    """``K(t) = B^-1 (Q(t) - A) C^-1`` together with diagnostics."""

    def __init__(self, plant, Q_of_t):
        self.plant = plant
        self.Q_of_t = Q_of_t

    def __call__(self, t):
        p = self.plant
        R = as_matrix(self.Q_of_t(t), "Q(t)", square=True) - p.A
        K = refined_solve(p.B, refined_solve(p.C.T, R.T).T)
        # one refinement sweep on the closed-loop residual
        res = R - p.B @ K @ p.C
        return K + refined_solve(p.B, refined_solve(p.C.T, res.T).T)

    def closed_loop(self, t):
        p = self.plant
        return p.A + p.B @ self(t) @ p.C

    def identity_residual(self, t):
        """``||A + B K(t) C - Q(t)||_F / ||Q(t)||_F``."""
        Q = np.asarray(self.Q_of_t(t), dtype=float)
        return float(np.linalg.norm(self.closed_loop(t) - Q) / max(np.linalg.norm(Q), 1e-300))

    def off_diagonal_mass(self, t):
        K = self(t)
        return float(np.linalg.norm(K - np.diag(np.diag(K))))

    def is_diagonal(self, times, tol=OFFDIAG_TOL):
        return all(self.off_diagonal_mass(t) <= tol for t in times)

    def target_properties(self, t):
        """Whether ``Q(t)`` is Hurwitz and row- and column-diagonally dominant."""
        Q = as_matrix(self.Q_of_t(t), "Q(t)", square=True)
        ones = np.ones(Q.shape[0])
        return {
            'hurwitz': spectral_report(Q).is_hurwitz,
            'row_dominant': generalized_dominance_check(Q, ones, 'row'),
            'column_dominant': generalized_dominance_check(Q, ones, 'column'),
        }


def trivial_unstructured_gain(p, Q_of_t, check_times=(0.0,)):
    """Full gain that makes the closed loop equal the user's target ``Q(t)``.

    Requires square, invertible ``B`` and ``C``.  The identity
    ``A + B K(t) C = Q(t)`` is asserted at `check_times`.
    """
    if p.B.shape[0] != p.B.shape[1] or p.C.shape[0] != p.C.shape[1]:
        raise DimensionError("trivial gain needs square B and C")
    K = UnstructuredGain(p, Q_of_t)
    for t in check_times:
        r = K.identity_residual(t)
        assert r <= 1e-10, f"closed loop misses Q(t) at t={t}: relative residual {r:.3e}"
    return K
