"""Random test matrices and plants built backwards from their certificates."""

import numpy as np
import scipy.linalg as la

from .decomposition import validate_plant

__all__ = [
    'random_hurwitz', 'random_hurwitz_h_matrix', 'random_m_matrix',
    'random_certified_plant', 'random_square_plant', 'SinusoidalLTV', 'random_ltv',
]


def random_hurwitz(rng, n, margin=(0.5, 2.0)):
    """Gaussian matrix shifted so its spectral abscissa is ``-U(margin)``."""
    G = rng.standard_normal((n, n))
    shift = np.max(la.eigvals(G).real) + rng.uniform(*margin)
    return G - shift * np.eye(n)


def random_hurwitz_h_matrix(rng, n, scale_range=(0.2, 5.0), return_scaling=False):
    """Hurwitz H-matrix ``diag(d)^-1 S diag(d)`` with ``S`` column-dominant.

    ``S`` has random off-diagonal entries (random signs, some zeros) and a
    negative diagonal exceeding each absolute column sum by a random margin.
    """
    S = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.8)
    np.fill_diagonal(S, 0.0)
    col = np.abs(S).sum(axis=0)
    np.fill_diagonal(S, -(col * rng.uniform(1.05, 2.0, n) + rng.uniform(0.2, 1.0, n)))
    d = np.exp(rng.uniform(np.log(scale_range[0]), np.log(scale_range[1]), n))
    H = S * d[None, :] / d[:, None]
    return (H, d) if return_scaling else H


def random_m_matrix(rng, n):
    """Nonsingular M-matrix ``s I - P`` with ``P >= 0`` and ``s > rho(P)``."""
    P = rng.random((n, n)) * (rng.random((n, n)) < 0.7)
    rho = np.max(np.abs(la.eigvals(P))) if n else 0.0
    return (rho + rng.uniform(0.05, 2.0)) * np.eye(n) - P


def random_certified_plant(rng, n, m, name=None):
    """Minimum-phase plant whose ``CB`` is a Hurwitz H-matrix.

    The plant is assembled in output coordinates: a Hurwitz zero-dynamics
    block and Gaussian coupling blocks are mapped back through
    ``T^-1 = [M, B (CB)^-1]`` with ``M`` an orthonormal null-space basis of a
    random ``C``.
    """
    C = rng.standard_normal((m, n))
    H = random_hurwitz_h_matrix(rng, m)
    if m == n:
        B = la.solve(C, H)
        A = rng.standard_normal((n, n))
        return validate_plant(A, B, C, name or f"square-{n}")
    M = la.null_space(C)
    B = la.pinv(C) @ H + M @ rng.standard_normal((n - m, m))
    BH = B @ la.inv(H)
    T = np.vstack([M.T @ (np.eye(n) - BH @ C), C])
    T_inv = np.hstack([M, BH])
    blocks = np.block([
        [random_hurwitz(rng, n - m), rng.standard_normal((n - m, m))],
        [rng.standard_normal((m, n - m)), rng.standard_normal((m, m))],
    ])
    A = T_inv @ blocks @ T
    return validate_plant(A, B, C, name or f"random-{n}x{m}")


def random_square_plant(rng, n, cond_max=1e3):
    """Gaussian ``(A, B, C)`` with square ``B``, ``C`` of bounded condition number."""
    while True:
        B = rng.standard_normal((n, n))
        C = rng.standard_normal((n, n))
        if np.linalg.cond(B) < cond_max and np.linalg.cond(C) < cond_max \
                and np.linalg.cond(C @ B) < cond_max:
            return validate_plant(rng.standard_normal((n, n)), B, C, f"square-{n}")


class SinusoidalLTV:
    """``A(t) = A0 + A1 sin(w1 t) + A2 cos(w2 t)``."""

    def __init__(self, A0, A1, A2, w1, w2):
        self.A0, self.A1, self.A2 = A0, A1, A2
        self.w1, self.w2 = w1, w2

    def __call__(self, t):
        return self.A0 + self.A1 * np.sin(self.w1 * t) + self.A2 * np.cos(self.w2 * t)

    def stack(self, times):
        t = np.asarray(times, dtype=float)[:, None, None]
        return self.A0 + self.A1 * np.sin(self.w1 * t) + self.A2 * np.cos(self.w2 * t)


def random_ltv(rng, n, amplitude=1.0):
    """Random smooth `SinusoidalLTV` system."""
    A0 = rng.standard_normal((n, n)) - 0.5 * np.eye(n)
    A1 = amplitude * rng.standard_normal((n, n))
    A2 = amplitude * rng.standard_normal((n, n))
    w1, w2 = rng.uniform(0.5, 3.0, 2)
    return SinusoidalLTV(A0, A1, A2, w1, w2)
