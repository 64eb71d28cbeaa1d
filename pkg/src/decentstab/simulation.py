"""Fixed-step RK4 integration of linear time-varying systems and bound checks.

All integrators in this module work on uniform grids so that trajectories of
the plant and of the scalar comparison system can be compared sample by
sample.  Inequality checks allow a multiplicative discretization slack of
``1 + SLACK * dt``.
"""

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DimensionError, DivergenceError, DomainError, FitError, PreconditionError
from .matrix_analysis import RTOL, matrix_measure_1

__all__ = [
    'SLACK', 'NORM_FLOOR', 'OVERFLOW', 'Trajectory', 'DecayFit', 'CheckResult',
    'ClosedLoopMatrix', 'time_grid', 'matrix_stack', 'rk4_propagators',
    'integrate_linear', 'simulate_closed_loop', 'coppel_check',
    'column_dominant_decay_check', 'simulate_comparison_z',
    'comparison_domination_check', 'fit_decay_rate', 'integro_decay_condition',
]

SLACK = 10.0
NORM_FLOOR = 1e-30
OVERFLOW = 1e300
# steps per block of precomputed propagators, bounding memory on long stiff runs
CHUNK = 1 << 15


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.states.ndim != 2 or self.states.shape[0] != self.times.size:
            raise DimensionError(
                f"states shape {self.states.shape} does not match {self.times.size} samples")

    @cached_property
    def norms_1(self):
        return np.abs(self.states).sum(axis=1)

    @cached_property
    def norms_2(self):
        return np.linalg.norm(self.states, axis=1)

    @property
    def dt(self):
        return float(self.metadata.get('dt', self.times[1] - self.times[0]))

    def transformed(self, T, **metadata):
        """Trajectory of ``T x(t)`` on the same grid."""
        return Trajectory(self.times, self.states @ np.asarray(T).T,
                          {**self.metadata, **metadata})

    def to_csv(self, path, names=None):
        """Write ``t, x_1..x_n, norm_1, norm_2`` rows at 17 significant digits."""
        n = self.states.shape[1]
        names = list(names) if names else [f"x{i + 1}" for i in range(n)]
        with open(path, 'w', newline='') as fh:
            w = csv.writer(fh)
            w.writerow(['t', *names, 'norm_1', 'norm_2'])
            for t, x, n1, n2 in zip(self.times, self.states, self.norms_1, self.norms_2):
                w.writerow([f"{v:.17g}" for v in (t, *x, n1, n2)])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
        return cls(data[:, 0].copy(), data[:, 1:-2].copy())


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    r_squared: float
    window: tuple


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a sampled inequality check; truthy when it passed."""
    passed: bool
    first_violation: float | None = None
    worst_ratio: float = 0.0
    detail: str = ""

    def __bool__(self):
        return self.passed


class ClosedLoopMatrix:
    """``t -> A + B diag(k(t)) C`` with vectorized evaluation over time grids."""

    def __init__(self, plant, schedule):
        self.A, self.B, self.C = plant.A, plant.B, plant.C
        self.schedule = schedule

    def __call__(self, t):
        return self.A + (self.B * self.schedule(t)[None, :]) @ self.C

    def stack(self, times):
        K = self.schedule.evaluate(times)
        return self.A[None] + (self.B[None] * K[:, None, :]) @ self.C[None]


def time_grid(t0, t_end, dt):
    """Uniform grid from `t0` to `t_end` with step at most `dt`."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not t_end > t0:
        raise DomainError("t_end must exceed t0")
    steps = max(1, int(np.ceil((t_end - t0) / dt - 1e-9)))
    return np.linspace(t0, t_end, steps + 1)


def matrix_stack(A_of_t, times):
    if hasattr(A_of_t, 'stack'):
        return np.asarray(A_of_t.stack(times), dtype=float)
    return np.array([A_of_t(t) for t in times], dtype=float)


def rk4_propagators(A_half, h):
    """One-step RK4 maps for ``x' = A(t) x``.

    `A_half` holds ``A`` at ``t0, t0 + h/2, t0 + h, ...`` (``2N + 1``
    matrices).  Step ``k`` of classical RK4 is the linear map

        P = I + h/6 (A1 + 2 A2 S1 + 2 A2 S2 + A3 S3),
        S1 = I + h/2 A1,  S2 = I + h/2 A2 S1,  S3 = I + h A2 S2,

    with ``A1, A2, A3`` the matrices at the start, middle and end of the step.
    """
    A1, A2, A3 = A_half[0:-1:2], A_half[1::2], A_half[2::2]
    eye = np.eye(A_half.shape[-1])
    S1 = eye + 0.5 * h * A1
    A2S1 = A2 @ S1
    S2 = eye + 0.5 * h * A2S1
    A2S2 = A2 @ S2
    S3 = eye + h * A2S2
    return eye + (h / 6.0) * (A1 + 2.0 * A2S1 + 2.0 * A2S2 + A3 @ S3)


def integrate_linear(A_of_t, x0, times):
    """Classical RK4 for ``x' = A(t) x`` on a uniform grid.

    `x0` may be a vector or an ``(n, p)`` matrix (e.g. the identity, for the
    state-transition matrix).  Returns an array of shape
    ``(len(times),) + x0.shape``.

    Raises
    ------
    DivergenceError
        If the state becomes non-finite or exceeds ``OVERFLOW`` in magnitude.
    """
    times = np.asarray(times, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    steps = times.size - 1
    h = (times[-1] - times[0]) / steps
    atol = 8 * np.finfo(float).eps * np.abs(times[[0, -1]]).max()
    if not np.allclose(np.diff(times), h, rtol=1e-9, atol=atol):
        raise DomainError("RK4 integration needs a uniform time grid")
    n = x0.shape[0]
    out = np.empty((steps + 1,) + x0.shape)
    out[0] = x = x0
    for k0 in range(0, steps, CHUNK):
        k1 = min(k0 + CHUNK, steps)
        half = np.empty(2 * (k1 - k0) + 1)
        half[0::2] = times[k0:k1 + 1]
        half[1::2] = 0.5 * (times[k0:k1] + times[k0 + 1:k1 + 1])
        A_half = matrix_stack(A_of_t, half)
        if A_half.shape[1:] != (n, n):
            raise DimensionError(f"A(t) has shape {A_half.shape[1:]}, state has {x0.shape}")
        P = rk4_propagators(A_half, h)
        with np.errstate(over='ignore', invalid='ignore'):
            for k in range(k1 - k0):
                x = P[k] @ x
                out[k0 + k + 1] = x
    size = np.abs(out).reshape(steps + 1, -1).max(axis=1)
    bad = np.flatnonzero(~(size <= OVERFLOW))
    if bad.size:
        raise DivergenceError(float(times[bad[0]]))
    return out


def simulate_closed_loop(p, schedule, x0, t0=0.0, t_end=10.0, dt=1e-3):
    """Integrate ``x' = (A + B K(t) C) x`` with RK4, ``K`` evaluated at stage times."""
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != p.n:
        raise DimensionError(f"x0 has length {x0.size}, expected {p.n}")
    times = time_grid(t0, t_end, dt)
    states = integrate_linear(ClosedLoopMatrix(p, schedule), x0, times)
    return Trajectory(times, states, {
        'dt': float(times[1] - times[0]), 'plant': p.name, 'schedule': schedule.kind})


def _sandwich(traj, exponent_upper, exponent_lower, slack):
    # compared in log space so that exp overflow or a zero state cannot give nan
    n = traj.norms_1
    log_f = np.log1p(slack * traj.dt)
    with np.errstate(divide='ignore'):
        log_n = np.log(n)
    log_up = log_n[0] + exponent_upper + log_f
    log_lo = np.full_like(n, -np.inf) if exponent_lower is None else \
        log_n[0] + exponent_lower - log_f
    zero = n == 0
    ok = zero | ((log_n <= log_up) & (log_n >= log_lo))
    with np.errstate(over='ignore', invalid='ignore'):
        ratio = np.where(zero, 0.0, np.exp(log_n - log_up))
    worst = float(np.max(ratio))
    if np.all(ok):
        return CheckResult(True, None, worst)
    i = int(np.flatnonzero(~ok)[0])
    with np.errstate(over='ignore'):
        lo, up = np.exp(log_lo[i]), np.exp(log_up[i])
    return CheckResult(False, float(traj.times[i]), worst,
                       f"norm {n[i]:.6g} outside [{lo:.6g}, {up:.6g}]")


def coppel_check(traj, A_of_t, slack=SLACK):
    """Two-sided 1-norm envelope from integrated matrix measures.

    ``|x0|_1 exp(-int mu_1(-A)) <= |x(t)|_1 <= |x0|_1 exp(int mu_1(A))`` at
    every sample, integrals by the trapezoid rule on the trajectory grid.
    """
    mu_pos, mu_neg = [], []
    for i in range(0, len(traj.times), CHUNK):
        A_s = matrix_stack(A_of_t, traj.times[i:i + CHUNK])
        mu_pos.append(matrix_measure_1(A_s))
        mu_neg.append(matrix_measure_1(-A_s))
    up = cumulative_trapezoid(np.concatenate(mu_pos), traj.times, initial=0.0)
    low = cumulative_trapezoid(np.concatenate(mu_neg), traj.times, initial=0.0)
    return _sandwich(traj, up, -low, slack)


def column_dominant_decay_check(traj, A_of_t, slack=SLACK):
    """Decay bound ``|x(t)|_1 <= |x0|_1 exp(int alpha_c)`` for column-dominant ``A(t)``.

    ``alpha_c = mu_1(A(t))`` must be negative at every sample, i.e. each
    ``A(t)`` has a negative diagonal and is strictly column-diagonal dominant.

    Raises
    ------
    PreconditionError
        At the first sample where ``alpha_c >= 0``.
    """
    alpha, scale = [], []
    for i in range(0, len(traj.times), CHUNK):
        A_s = matrix_stack(A_of_t, traj.times[i:i + CHUNK])
        alpha.append(matrix_measure_1(A_s))
        scale.append(np.abs(A_s).reshape(len(A_s), -1).max(axis=1))
    alpha, scale = np.concatenate(alpha), np.concatenate(scale)
    bad = np.flatnonzero(alpha >= -RTOL * scale)
    if bad.size:
        t = float(traj.times[bad[0]])
        raise PreconditionError(t, f"A(t) not column-dominant Hurwitz at t={t:.6g} "
                                   f"(measure {alpha[bad[0]]:.6g})")
    up = cumulative_trapezoid(alpha, traj.times, initial=0.0)
    return _sandwich(traj, up, None, slack)


class _ComparisonMatrix:
    def __init__(self, mu_of_t, coupling, beta):
        self.mu_of_t = mu_of_t
        self.coupling = coupling
        self.beta = beta

    def stack(self, times):
        if hasattr(self.mu_of_t, 'stack'):
            mu = np.asarray(self.mu_of_t.stack(times), dtype=float)
        else:
            mu = np.array([self.mu_of_t(t) for t in times], dtype=float)
        out = np.zeros((len(times), 3, 3))
        out[:, 0, 0] = mu
        out[:, 0, 1] = self.coupling
        out[:, 0, 2] = 1.0
        out[:, 1, 0] = 1.0
        out[:, 1, 1] = -self.beta
        out[:, 2, 2] = -self.beta
        return out


def simulate_comparison_z(mu_of_t, M11, beta11, A21_tilde_norm, A12_tilde_norm, z0,
                          grid, x1_init_norm=0.0):
    """Integrate the scalar integro-differential majorant of ``|xbar_2|_1``.

        z' = mu(t) z + |A21~| |xbar_1(0)| M11 exp(-beta11 t)
             + M11 |A21~| |A12~| int_0^t exp(-beta11 (t - s)) z(s) ds

    The convolution is carried exactly by ``w' = -beta11 w + z`` and the
    forcing by ``f' = -beta11 f``, so RK4 runs on the linear system in
    ``(z, w, f)``.  The returned trajectory has ``z`` as its only state;
    ``metadata['w']`` holds the convolution state.
    """
    if not z0 > 0:
        raise DomainError("z0 must be positive")
    if not beta11 > 0:
        raise DomainError("beta11 must be positive")
    coupling = M11 * A21_tilde_norm * A12_tilde_norm
    forcing = A21_tilde_norm * x1_init_norm * M11
    grid = np.asarray(grid, dtype=float)
    states = integrate_linear(_ComparisonMatrix(mu_of_t, coupling, beta11),
                              np.array([z0, 0.0, forcing]), grid)
    return Trajectory(grid, states[:, :1].copy(), {
        'dt': float(grid[1] - grid[0]), 'w': states[:, 1].copy(),
        'coupling': coupling, 'forcing': forcing})


def comparison_domination_check(traj_x2, traj_z, slack=SLACK):
    """``|xbar_2(t)|_1 <= z(t) (1 + slack dt)`` at every sample.

    `traj_x2` is the trajectory of the scaled output coordinates; only its
    1-norms are used.
    """
    if traj_x2.times.shape != traj_z.times.shape or not np.allclose(
            traj_x2.times, traj_z.times, rtol=1e-12, atol=1e-12):
        raise DomainError("trajectories are not on the same grid")
    x = traj_x2.norms_1
    z = traj_z.states[:, 0]
    bound = z * (1.0 + slack * traj_z.dt)
    ok = x <= bound
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(bound > 0, x / bound, np.where(x > 0, np.inf, 0.0))
    worst = float(np.max(ratio))
    if np.all(ok):
        return CheckResult(True, None, worst)
    i = int(np.flatnonzero(~ok)[0])
    return CheckResult(False, float(traj_z.times[i]), worst,
                       f"|xbar_2|_1 = {x[i]:.6g} exceeds z = {z[i]:.6g}")


def fit_decay_rate(traj, window=None, floor=NORM_FLOOR, min_samples=10):
    """Least-squares line through ``(t, log |x(t)|_2)`` over `window`.

    Samples with norm at or below `floor` are ignored.

    Raises
    ------
    FitError
        Fewer than `min_samples` usable samples.
    """
    t = traj.times
    lo, hi = window if window is not None else (t[0], t[-1])
    norms = traj.norms_2
    use = (t >= lo) & (t <= hi) & (norms > floor)
    if np.count_nonzero(use) < min_samples:
        raise FitError(f"only {np.count_nonzero(use)} samples above {floor:g} in "
                       f"[{lo:.6g}, {hi:.6g}]")
    ts, ys = t[use], np.log(norms[use])
    slope, intercept = np.polyfit(ts, ys, 1)
    resid = ys - (slope * ts + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    # a flat log-norm leaves only rounding noise in ss_tot
    flat = ys.size * (1e-13 * max(1.0, abs(float(ys.mean())))) ** 2
    if ss_tot > flat:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= flat else 0.0
    return DecayFit(float(slope), float(intercept), r2, (float(lo), float(hi)))


def integro_decay_condition(mu_sup, kernel_integral):
    """Strict test ``-gamma + int_0^inf b(t) dt < 0`` with ``gamma = -mu_sup``.

    `mu_sup` bounds the local rate ``a(t)`` from above and `kernel_integral`
    is the total mass of the non-negative memory kernel.
    """
    scale = max(1.0, abs(mu_sup), abs(kernel_integral))
    return bool(mu_sup + kernel_integral < -RTOL * scale)
