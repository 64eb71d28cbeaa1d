"""Analyze -> synthesize -> simulate, as used by the command line and the test suite."""

from dataclasses import dataclass, field

import numpy as np

from .decomposition import apply_scaling, build_decomposition, minimum_phase_report
from .errors import AssumptionViolation, DomainError, FitError
from .gain_synthesis import GainSynthesis, exp_bound, gain_lower_bounds, gamma, \
    make_schedule, verify_key_condition
from .matrix_analysis import h_matrix_certificate, is_hurwitz_h_matrix, \
    matrix_measure_1, norm_1, spectral_report
from .simulation import ClosedLoopMatrix, comparison_domination_check, coppel_check, \
    fit_decay_rate, integro_decay_condition, simulate_closed_loop, simulate_comparison_z

__all__ = [
    'DEFAULT_SAFETY', 'DECAY_THRESHOLD', 'Analysis', 'SimulationReport',
    'MeasureOfTime', 'analyze', 'synthesize', 'default_horizon', 'run_simulation',
]

DEFAULT_SAFETY = 1.05
DECAY_THRESHOLD = 1e-6
# horizon in characteristic times; step as a fraction of the slow and fast time scales
HORIZON_TAUS = 60.0
STEP_SLOW = 1e-3
STEP_FAST = 1.0
# refuse default horizons longer than this many steps
MAX_STEPS = 5_000_000


@dataclass(frozen=True)
class Analysis:
    plant: object
    cb_certificate: object
    cb_hurwitz_h: bool
    decomposition: object
    minimum_phase: object

    @property
    def failed_hypotheses(self):
        failed = []
        if not self.cb_hurwitz_h:
            failed.append("CB Hurwitz H-matrix")
        if not self.minimum_phase.minimum_phase:
            failed.append("minimum phase")
        return failed

    @property
    def certified(self):
        return not self.failed_hypotheses

    def to_dict(self):
        cert = self.cb_certificate
        mp = self.minimum_phase
        zeros = None
        if mp.zero_spectrum is not None:
            zeros = [[float(z.real), float(z.imag)] for z in mp.zero_spectrum.eigenvalues]
        return {
            'plant': self.plant.name,
            'n': self.plant.n,
            'm': self.plant.m,
            'cb_h_matrix': bool(cert.verdict),
            'cb_hurwitz_h_matrix': bool(self.cb_hurwitz_h),
            'scaling_d': None if cert.scaling_d is None else cert.scaling_d.tolist(),
            'dominance_margin': float(cert.margin),
            'has_zeros': bool(mp.has_zeros),
            'zero_spectrum': zeros,
            'minimum_phase': bool(mp.minimum_phase),
            'failed_hypotheses': self.failed_hypotheses,
        }


def analyze(plant):
    """Check the synthesis hypotheses for a validated plant.

    The returned decomposition is already scaled by the H-matrix witness of
    ``CB`` when one exists.
    """
    cert = h_matrix_certificate(plant.CB)
    hurwitz_h = is_hurwitz_h_matrix(plant.CB)
    dec = build_decomposition(plant)
    if cert.verdict:
        dec = apply_scaling(dec, cert.scaling_d)
    return Analysis(plant, cert, hurwitz_h, dec, minimum_phase_report(dec))


def synthesize(analysis, kind='constant', safety=DEFAULT_SAFETY, t_bar=None, params=None,
               validate=True):
    """Gain floors and a schedule for a certified plant.

    Raises
    ------
    AssumptionViolation
        Naming the first failed hypothesis.
    """
    for name in analysis.failed_hypotheses:
        raise AssumptionViolation(name, f"plant {analysis.plant.name!r} fails this hypothesis")
    dec = analysis.decomposition
    eb = None if dec.square_case else exp_bound(dec.A11)
    g = gamma(eb, dec.A21, dec.A12)
    k_tilde = gain_lower_bounds(dec.A22, dec.CB, g)
    params = dict(params or {})
    if kind in ('constant', 'ramp') and 'gains' not in params:
        params.setdefault('safety', safety)
    sched = make_schedule(kind, k_tilde, t_bar, params, validate=validate)
    return GainSynthesis(gamma=g, k_tilde=k_tilde, t_bar=sched.t_bar, schedule=sched,
                         exp_bound=eb, decomposition=dec)


class MeasureOfTime:
    """``t -> mu_1(A22~ + B~ K(t))`` in scaled output coordinates."""

    def __init__(self, dec, schedule):
        self.A22, self.CB = dec.A22, dec.CB
        self.schedule = schedule

    def __call__(self, t):
        return matrix_measure_1(self.A22 + self.CB * self.schedule(t)[None, :])

    def stack(self, times):
        K = self.schedule.evaluate(times)
        return matrix_measure_1(self.A22[None] + self.CB[None] * K[:, None, :])


def default_horizon(plant, schedule, t_bar=0.0):
    """``(t_end, dt)`` from the closed loop at the gains reached after `t_bar`.

    With ``tau = 1 / |spectral abscissa|`` the horizon is ``t_bar + 60 tau``
    and the step is the smaller of ``1e-3 tau`` and ``1 / spectral radius``.
    """
    AK = plant.closed_loop(schedule(t_bar))
    rep = spectral_report(AK)
    rho = max(float(np.max(np.abs(rep.eigenvalues))), 1e-12)
    alpha = rep.spectral_abscissa
    tau = 1.0 / abs(alpha) if alpha < 0 else 1.0 / rho
    return t_bar + HORIZON_TAUS * tau, min(STEP_SLOW * tau, STEP_FAST / rho)


@dataclass
class SimulationReport:
    trajectory: object
    output_trajectory: object
    z_trajectory: object
    fit: object
    checks: dict
    values: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        out = {
            'checks': {k: bool(v) for k, v in self.checks.items()},
            'passed': self.passed,
            'notes': list(self.notes),
            **self.values,
        }
        if self.fit is not None:
            out['decay_rate'] = self.fit.rate
            out['decay_r_squared'] = self.fit.r_squared
            out['fit_window'] = list(self.fit.window)
        return out


def run_simulation(plant, synthesis, x0, t_end=None, dt=None, fit_window=None,
                   decay_threshold=DECAY_THRESHOLD):
    """Simulate the closed loop and evaluate every certificate along the run.

    Checks (all must hold for the run to pass): the two-sided measure
    envelope on ``x``; domination of ``|xbar_2|_1`` by the comparison state
    ``z``; the integro-differential decay condition and the key measure
    condition for the gains after ``t_bar``; a negative fitted decay rate;
    and ``|x(t_end)|_2 <= decay_threshold |x(0)|_2``.
    """
    sched = synthesis.schedule
    dec = synthesis.decomposition
    x0 = np.asarray(x0, dtype=float).ravel()
    auto_end, auto_dt = default_horizon(plant, sched, synthesis.t_bar)
    t_end = auto_end if t_end is None else t_end
    dt = auto_dt if dt is None else dt
    if (t_end / dt) > MAX_STEPS:
        raise DomainError(
            f"run needs {t_end / dt:.3g} steps (t_end={t_end:.6g}, dt={dt:.3g}); the closed "
            f"loop is too stiff or too slow for the default horizon, give t_end and dt")
    traj = simulate_closed_loop(plant, sched, x0, 0.0, t_end, dt)
    checks, values, notes = {}, {}, []

    checks['coppel'] = coppel_check(traj, ClosedLoopMatrix(plant, sched))

    W = dec.state_transform
    p = plant.n - plant.m
    x2 = traj.transformed(W[p:], coordinates='xbar_2')
    x1_init = float(np.abs(W[:p] @ x0).sum())
    z_traj = None
    mu_t = MeasureOfTime(dec, sched)
    after = traj.times >= synthesis.t_bar
    mu_samples = mu_t.stack(traj.times)
    mu_sup = float(mu_samples[after].max())
    if x2.norms_1[0] > 0:
        eb = synthesis.exp_bound
        z_traj = simulate_comparison_z(
            mu_t, eb.M11 if eb else 0.0, eb.beta11 if eb else 1.0,
            norm_1(dec.A21), norm_1(dec.A12), x2.norms_1[0], traj.times, x1_init)
        checks['domination'] = comparison_domination_check(x2, z_traj)
    else:
        notes.append("comparison system skipped: xbar_2(0) = 0")
    checks['integro_condition'] = integro_decay_condition(mu_sup, synthesis.gamma)
    k_min = sched.evaluate(traj.times[after]).min(axis=0)
    checks['key_condition'] = bool(np.all(k_min >= 0)) and verify_key_condition(
        dec.A22, dec.CB, k_min, synthesis.gamma)

    n0 = float(np.linalg.norm(x0))
    fit = None
    if n0 == 0.0:
        notes.append("decay fit skipped: zero initial state")
    else:
        if fit_window is None:
            fit_window = (synthesis.t_bar + 0.1 * (t_end - synthesis.t_bar), t_end)
        try:
            fit = fit_decay_rate(traj, fit_window)
            checks['decay_rate'] = fit.rate < 0
        except FitError as exc:
            notes.append(f"decay fit skipped: {exc}")
        ratio = float(traj.norms_2[-1] / n0)
        values['final_norm_ratio'] = ratio
        checks['final_decay'] = ratio <= decay_threshold

    values.update({
        't_end': float(traj.times[-1]), 'dt': traj.dt, 'mu_sup': mu_sup,
        'final_norm_1': float(traj.norms_1[-1]), 'final_norm_2': float(traj.norms_2[-1]),
        'coppel_worst_ratio': checks['coppel'].worst_ratio,
    })
    if 'domination' in checks:
        values['domination_worst_ratio'] = checks['domination'].worst_ratio
        values['final_z'] = float(z_traj.states[-1, 0])
    checks = {k: bool(v) for k, v in checks.items()}
    return SimulationReport(traj, x2, z_traj, fit, checks, values, notes)

