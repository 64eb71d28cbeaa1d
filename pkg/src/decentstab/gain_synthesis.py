"""Per-channel gain floors for decentralized output feedback and gain schedules.

Working in the scaled block coordinates produced by
:func:`decentstab.decomposition.apply_scaling`, the output block evolves as

    d/dt xbar_2 = A21~ xbar_1 + (A22~ + B~ K(t)) xbar_2,    B~ = D CB D^-1,

and the zero dynamics ``xbar_1`` enter through a convolution with
``exp(A11 t)``.  Bounding ``||exp(A11 t)||_1 <= M11 exp(-beta11 t)`` gives the
coupling constant ``gamma = M11 ||A21~||_1 ||A12~||_1 / beta11``; any diagonal
gain with ``mu_1(A22~ + B~ K) < -gamma`` then makes the closed loop
exponentially convergent.  All norms are the induced 1-norm.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import CertificateError, DimensionError, DomainError, NumericalError, \
    ScheduleValidationError
from .matrix_analysis import RTOL, as_matrix, matrix_measure_1, norm_1, spectral_report

__all__ = [
    'K_FLOOR', 'BETA_FRACTION', 'M_SAFETY', 'ExpBound', 'GainSchedule',
    'GainSynthesis', 'exp_bound', 'exp_bound_ratio', 'gamma',
    'key_condition_columns', 'gain_lower_bounds', 'verify_key_condition',
    'make_schedule',
]

K_FLOOR = 1e-6
BETA_FRACTION = 0.9
M_SAFETY = 1.1


@dataclass(frozen=True)
class ExpBound:
    """``||exp(A11 t)||_1 <= M11 exp(-beta11 t)`` for all ``t >= 0``."""
    M11: float
    beta11: float


def exp_bound_ratio(A11, beta, times):
    """``||exp(A11 t)||_1 exp(beta t)`` at each of `times`."""
    A11 = np.asarray(A11, dtype=float)
    return np.array([norm_1(la.expm(A11 * t)) * np.exp(beta * t) for t in times])


def _uniform_ratio(A11, beta, t_max, steps):
    # propagate exp(A11 h)^k instead of calling expm at every point
    h = t_max / steps
    E = la.expm(A11 * h)
    P = np.eye(A11.shape[0])
    out = np.empty(steps + 1)
    out[0] = 1.0
    for k in range(1, steps + 1):
        P = E @ P
        out[k] = norm_1(P) * np.exp(beta * k * h)
    return out


def exp_bound(A11, grid_points=200, verify_steps=4000, horizon=100.0):
    """Exponential envelope of ``exp(A11 t)`` in the induced 1-norm.

    ``beta11`` is 90% of the distance of the spectrum from the imaginary
    axis.  ``M11`` is 10% above the largest ratio
    ``||exp(A11 t)||_1 exp(beta11 t)`` on a geometric grid over
    ``[0, horizon / beta11]``; it is then re-checked on a uniform grid of
    `verify_steps` steps and enlarged if the finer grid finds a larger ratio.

    Raises
    ------
    DomainError
        If `A11` is not Hurwitz.
    """
    A11 = as_matrix(A11, "A11", square=True)
    rep = spectral_report(A11)
    if not rep.is_hurwitz:
        raise DomainError(
            f"A11 is not Hurwitz (spectral abscissa {rep.spectral_abscissa:.6g})")
    beta = BETA_FRACTION * abs(rep.spectral_abscissa)
    t_max = horizon / beta
    rho = max(np.max(np.abs(rep.eigenvalues)), beta)
    times = np.concatenate([[0.0], np.geomspace(1e-3 / rho, t_max, grid_points)])
    peak = float(np.max(exp_bound_ratio(A11, beta, times)))
    M11 = M_SAFETY * peak
    fine_peak = float(np.max(_uniform_ratio(A11, beta, t_max, verify_steps)))
    if fine_peak > M11:
        M11 = M_SAFETY * fine_peak
    return ExpBound(M11=M11, beta11=beta)


def gamma(eb, A21_tilde, A12_tilde):
    """Coupling constant ``M11 ||A21~||_1 ||A12~||_1 / beta11``.

    Zero when there are no zero dynamics (`eb` is None or the blocks are
    empty).
    """
    if eb is None:
        return 0.0
    a21 = norm_1(A21_tilde)
    a12 = norm_1(A12_tilde)
    if a21 == 0.0 or a12 == 0.0:
        return 0.0
    return eb.M11 * a21 * a12 / eb.beta11


def _offdiag_abs_colsum(X):
    return np.abs(X).sum(axis=0) - np.abs(np.diag(X))


def _gain_vector(K, m):
    K = np.asarray(K, dtype=float)
    k = np.diag(K).copy() if K.ndim == 2 else np.broadcast_to(K, (m,)).astype(float)
    if K.ndim == 2 and np.any(K != np.diag(k)):
        raise DomainError("gain matrix must be diagonal")
    if k.shape != (m,):
        raise DimensionError(f"gain has length {k.size}, expected {m}")
    return k


def key_condition_columns(A22_tilde, CB_scaled, K):
    """Column-wise upper bounds on the 1-norm measure of ``A22~ + B~ K``.

    Column ``j`` evaluates
    ``k_j b~_jj + a~_jj + k_j sum_{i != j} |b~_ij| + sum_{i != j} |a~_ij|``,
    which dominates the exact column term
    ``a~_jj + k_j b~_jj + sum_{i != j} |a~_ij + k_j b~_ij|`` by the triangle
    inequality (equal when the off-diagonal signs agree).
    """
    A = as_matrix(A22_tilde, "A22~", square=True)
    B = as_matrix(CB_scaled, "CB~", square=True)
    k = _gain_vector(K, A.shape[0])
    return (k * np.diag(B) + np.diag(A) + k * _offdiag_abs_colsum(B)
            + _offdiag_abs_colsum(A))


def gain_lower_bounds(A22_tilde, CB_scaled, gamma, k_floor=K_FLOOR):
    """Per-channel gain floors ``k~_j``.

    ``k~_j = (sum_{i != j} |a~_ij| + a~_jj + gamma) / -(b~_jj + sum_{i != j} |b~_ij|)``,
    replaced by `k_floor` when the numerator is not positive.  Any gain with
    ``k_j > k~_j`` for every channel satisfies the column inequality
    ``key_condition_columns(...)[j] < -gamma``.

    Raises
    ------
    CertificateError
        If some column of ``CB_scaled`` has a non-negative diagonal or is not
        strictly diagonally dominant.
    """
    A = as_matrix(A22_tilde, "A22~", square=True)
    B = as_matrix(CB_scaled, "CB~", square=True)
    if A.shape != B.shape:
        raise DimensionError(f"A22~ {A.shape} and CB~ {B.shape} differ in shape")
    if gamma < 0:
        raise DomainError("gamma must be non-negative")
    bdiag = np.diag(B)
    boff = _offdiag_abs_colsum(B)
    slope = bdiag + boff
    bad = np.flatnonzero((bdiag >= 0) | (slope >= -RTOL * (np.abs(bdiag) + boff)))
    if bad.size:
        raise CertificateError(
            f"scaled CB is not strictly column-dominant with negative diagonal "
            f"in column(s) {bad.tolist()}")
    num = _offdiag_abs_colsum(A) + np.diag(A) + gamma
    k_tilde = np.where(num > 0, num / -slope, k_floor)
    check = key_condition_columns(A, B, k_tilde * (1 + 1e-6))
    if np.any(check >= -gamma):
        raise NumericalError(
            f"gain floors fail their own column inequality: {check} vs {-gamma}")
    return k_tilde


def verify_key_condition(A22_tilde, CB_scaled, K, gamma):
    """Sufficient decay condition ``max_j key_condition_columns(...)_j < -gamma``.

    The strict inequality is decided with relative tolerance ``RTOL``.  The
    exact measure ``mu_1(A22~ + B~ K)`` never exceeds the column bound; a
    violation of that ordering raises `NumericalError`.
    """
    A = as_matrix(A22_tilde, "A22~", square=True)
    B = as_matrix(CB_scaled, "CB~", square=True)
    k = _gain_vector(K, A.shape[0])
    if not np.all(k >= 0):
        raise DomainError("gains must be non-negative")
    cols = key_condition_columns(A, B, k)
    bound = float(cols.max())
    mu = matrix_measure_1(A + B * k[None, :])
    scale = max(1.0, abs(gamma), float(np.max(np.abs(A))), float(np.max(k * np.abs(B))))
    if mu > bound + 1e-12 * scale:
        raise NumericalError(f"measure {mu!r} exceeds its column bound {bound!r}")
    return bool(bound < -gamma - RTOL * scale)


class GainSchedule:
    """Diagonal gain ``k(t)`` for all channels.

    Kinds
    -----
    ``constant``
        ``params['gains']``: one value per channel.
    ``ramp``
        Linear from ``params['start']`` at ``t = 0`` to ``params['gains']``
        at ``t_bar``; constant afterwards.
    ``custom``
        Piecewise-linear through ``params['times']`` (increasing) and
        ``params['values']`` (one row per time), held constant outside.
    ``periodic``
        ``k1 + k2 omega^(order-1) sin(omega t)``; see
        :func:`decentstab.baselines.moreau_gain`.
    """

    KINDS = ('constant', 'ramp', 'custom', 'periodic')

    def __init__(self, kind, params, k_tilde=None, t_bar=0.0):
        if kind not in self.KINDS:
            raise DomainError(f"unknown schedule kind {kind!r}")
        self.kind = kind
        self.params = {key: (np.asarray(v, dtype=float) if key != 'order' else int(v))
                       for key, v in params.items()}
        self.k_tilde = None if k_tilde is None else np.asarray(k_tilde, dtype=float).ravel()
        self.t_bar = float(t_bar)
        self.m = self._channels()

    def _channels(self):
        p = self.params
        if self.kind in ('constant', 'ramp'):
            return np.atleast_1d(p['gains']).size
        if self.kind == 'custom':
            return 1 if p['values'].ndim == 1 else p['values'].shape[1]
        return 1

    def evaluate(self, times):
        """Gains at each of `times`; shape ``(len(times), m)``."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        p = self.params
        if self.kind == 'constant':
            return np.broadcast_to(np.atleast_1d(p['gains']), (t.size, self.m)).copy()
        if self.kind == 'ramp':
            end = np.atleast_1d(p['gains'])
            start = np.broadcast_to(np.atleast_1d(p.get('start', 0.0)), end.shape)
            if self.t_bar <= 0:
                frac = np.ones_like(t)
            else:
                frac = np.clip(t / self.t_bar, 0.0, 1.0)
            return start[None, :] + frac[:, None] * (end - start)[None, :]
        if self.kind == 'custom':
            ts = p['times']
            vals = p['values'].reshape(ts.size, -1)
            return np.column_stack([np.interp(t, ts, vals[:, j]) for j in range(vals.shape[1])])
        k1, k2, omega, order = p['k1'], p['k2'], p['omega'], p['order']
        return (k1 + k2 * omega ** (order - 1) * np.sin(omega * t))[:, None]

    def __call__(self, t):
        return self.evaluate([t])[0]

    def to_dict(self):
        params = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                  for k, v in self.params.items()}
        return {
            'kind': self.kind,
            'params': params,
            'k_tilde': None if self.k_tilde is None else self.k_tilde.tolist(),
            't_bar': self.t_bar,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data['kind'], data['params'], data.get('k_tilde'), data.get('t_bar', 0.0))

    def violations(self, extra_times=()):
        """``(channel, time)`` pairs where ``k_j(t) < k~_j`` for ``t >= t_bar``.

        Constant and ramp schedules are checked exactly; custom schedules at
        their sample times after ``t_bar`` and at ``t_bar`` itself, which
        suffices for piecewise-linear interpolation.
        """
        if self.k_tilde is None:
            return []
        if self.kind in ('constant', 'ramp'):
            times = np.array([self.t_bar])
        elif self.kind == 'custom':
            ts = self.params['times']
            times = np.concatenate([[self.t_bar], ts[ts >= self.t_bar]])
        else:
            period = 2 * np.pi / float(self.params['omega'])
            times = self.t_bar + np.linspace(0.0, period, 257)
        times = np.concatenate([times, np.asarray(extra_times, dtype=float)])
        vals = self.evaluate(times)
        bad = np.argwhere(vals < self.k_tilde[None, :])
        return [(int(j), float(times[i])) for i, j in bad]

    def __repr__(self):
        return f"GainSchedule(kind={self.kind!r}, m={self.m}, t_bar={self.t_bar})"


@dataclass(frozen=True)
class GainSynthesis:
    gamma: float
    k_tilde: np.ndarray
    t_bar: float
    schedule: GainSchedule
    exp_bound: ExpBound | None = None
    decomposition: object = None

    @property
    def k_bar(self):
        return float(np.max(self.k_tilde))


def make_schedule(kind, k_tilde, t_bar=None, params=None, validate=True):
    """Build a `GainSchedule` that respects the floors `k_tilde` after `t_bar`.

    Parameters
    ----------
    kind : {'constant', 'ramp', 'custom'}
    k_tilde : (m,) array_like
        Per-channel gain floors.
    t_bar : float, optional
        Activation time.  Defaults to 0 for constant schedules; a ramp must
        give its end time here.
    params : dict, optional
        ``constant`` and ``ramp`` accept ``gains`` (per channel or scalar) or
        ``safety`` (multiplier on `k_tilde`, default 1.05); ``ramp`` also
        takes ``start`` (default 0).  ``custom`` needs ``times`` and
        ``values``.
    validate : bool
        If false the floor is not enforced, which allows deliberately
        under-gained runs.

    Raises
    ------
    ScheduleValidationError
        The schedule dips below `k_tilde` at some ``t >= t_bar``.
    """
    k_tilde = np.atleast_1d(np.asarray(k_tilde, dtype=float))
    params = dict(params or {})
    m = k_tilde.size
    if kind in ('constant', 'ramp'):
        if 'gains' in params:
            gains = np.broadcast_to(np.asarray(params.pop('gains'), dtype=float), (m,)).copy()
        else:
            gains = k_tilde * float(params.pop('safety', 1.05))
        spec = {'gains': gains}
        if kind == 'ramp':
            if t_bar is None or t_bar <= 0:
                raise DomainError("a ramp schedule needs a positive end time t_bar")
            spec['start'] = np.broadcast_to(
                np.asarray(params.pop('start', 0.0), dtype=float), (m,)).copy()
        elif t_bar is None:
            t_bar = 0.0
        if params:
            raise DomainError(f"unexpected parameters for {kind}: {sorted(params)}")
    elif kind == 'custom':
        if 'times' not in params or 'values' not in params:
            raise DomainError("custom schedule needs 'times' and 'values'")
        times = np.asarray(params['times'], dtype=float).ravel()
        values = np.asarray(params['values'], dtype=float).reshape(times.size, -1)
        if values.shape[1] not in (1, m):
            raise DimensionError(f"custom values have {values.shape[1]} channels, expected {m}")
        if times.size < 1 or np.any(np.diff(times) <= 0):
            raise DomainError("custom sample times must be strictly increasing")
        spec = {'times': times, 'values': np.broadcast_to(values, (times.size, m)).copy()}
        t_bar = 0.0 if t_bar is None else t_bar
    else:
        raise DomainError(f"unsupported schedule kind {kind!r}")
    if t_bar < 0:
        raise DomainError("t_bar must be non-negative")
    sched = GainSchedule(kind, spec, k_tilde, t_bar)
    if validate:
        bad = sched.violations()
        if bad:
            raise ScheduleValidationError(bad)
    return sched
