"""Command-line front end.

Verbs::

    decentstab analyze    --plant P.json [--out DIR]
    decentstab synthesize --plant P.json [--kind constant|ramp] [--safety S] [--t-bar T] [--out DIR]
    decentstab simulate   --plant P.json [--schedule S.json | --force-gains CSV]
                          [--x0 CSV] [--t-end T] [--dt H] [--out DIR]
    decentstab compare    --plant P.json [--methods paper,moreau,trivial] [--out DIR]
    decentstab gen-plant  --seed N -n N -m M [--out FILE]

A structured report is written to ``DIR/report.json`` and a summary is
printed.  Exit status: 0 when every executed check passed, 1 on a check
failure or violated hypothesis, 2 on bad input, 3 on a numerical failure.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .baselines import PeriodicGain, floquet_report, moreau_gain, trivial_unstructured_gain
from .errors import AssumptionViolation, CertificateError, DecentStabError, \
    DivergenceError, NumericalError
from .gain_synthesis import GainSchedule, make_schedule, verify_key_condition
from .generators import random_certified_plant
from .pipeline import DEFAULT_SAFETY, analyze, run_simulation, synthesize
from .plantfile import PlantFileError, dump_plant, load_plant
from .simulation import ClosedLoopMatrix, Trajectory, fit_decay_rate, integrate_linear, \
    time_grid

__all__ = ['main', 'build_parser', 'EXIT_OK', 'EXIT_CHECK', 'EXIT_INPUT', 'EXIT_NUMERICAL']

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3
METHODS = ('paper', 'moreau', 'trivial')
MAX_ROWS = 20000


class InputError(DecentStabError, ValueError):
    pass


def _csv_floats(text, name):
    try:
        return np.array([float(v) for v in text.split(',') if v.strip()])
    except ValueError as exc:
        raise InputError(f"{name}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _write_json(path, data):
    with open(path, 'w') as fh:
        json.dump(data, fh, indent=2, default=_jsonable)
        fh.write("\n")


def _outdir(args):
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    return args.out


def _export(traj, path, names, every):
    """Write every `every`-th sample (0: at most ``MAX_ROWS`` rows), keeping the last."""
    N = len(traj.times)
    step = every if every > 0 else max(1, -(-N // MAX_ROWS))
    idx = np.unique(np.append(np.arange(0, N, step), N - 1))
    Trajectory(traj.times[idx], traj.states[idx]).to_csv(path, names)


def _print_summary(report, stream):
    def walk(d, indent):
        for k, v in d.items():
            if isinstance(v, dict):
                print(f"{indent}{k}:", file=stream)
                walk(v, indent + "  ")
            elif isinstance(v, list) and v and isinstance(v[0], dict):
                print(f"{indent}{k}:", file=stream)
                for row in v:
                    print(f"{indent}  - " + ", ".join(f"{a}={b}" for a, b in row.items()),
                          file=stream)
            else:
                print(f"{indent}{k}: {v}", file=stream)
    walk(report, "")


def _synthesis_dict(syn):
    eb = syn.exp_bound
    return {
        'gamma': syn.gamma,
        'M11': None if eb is None else eb.M11,
        'beta11': None if eb is None else eb.beta11,
        'k_tilde': syn.k_tilde,
        't_bar': syn.t_bar,
        'scaling_D': syn.decomposition.D,
        'schedule': syn.schedule.to_dict(),
    }


def _key_condition_at(syn):
    k = syn.schedule(syn.t_bar)
    dec = syn.decomposition
    return bool(np.all(k >= 0)) and verify_key_condition(dec.A22, dec.CB, k, syn.gamma)


# verbs ---------------------------------------------------------------------

def cmd_analyze(args, report):
    plant = load_plant(args.plant)
    an = analyze(plant)
    report['certificate'] = an.to_dict()
    report['checks'] = {'cb_hurwitz_h_matrix': an.cb_hurwitz_h,
                        'minimum_phase': bool(an.minimum_phase.minimum_phase)}
    return an


def cmd_synthesize(args, report):
    an = cmd_analyze(args, report)
    if args.kind == 'ramp' and args.t_bar is None:
        raise InputError("--kind ramp needs --t-bar")
    syn = synthesize(an, args.kind, args.safety, args.t_bar)
    report['synthesis'] = _synthesis_dict(syn)
    report['checks']['key_condition'] = _key_condition_at(syn)
    out = _outdir(args)
    if out:
        _write_json(os.path.join(out, 'schedule.json'),
                    {'plant': an.plant.name, **_synthesis_dict(syn)})
    return syn


def _load_schedule(path, m):
    try:
        with open(path) as fh:
            data = json.load(fh)
        sched = GainSchedule.from_dict(data['schedule'] if 'schedule' in data else data)
    except OSError as exc:
        raise InputError(f"cannot read schedule {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"schedule {path}: invalid JSON at line {exc.lineno}, "
                         f"column {exc.colno}: {exc.msg}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"schedule {path}: {exc}") from exc
    if sched(sched.t_bar).size != m:
        raise InputError(f"schedule {path} has {sched(sched.t_bar).size} channels, plant has {m}")
    return sched


def cmd_simulate(args, report):
    if args.schedule and args.force_gains:
        raise InputError("--schedule and --force-gains are exclusive")
    an = cmd_analyze(args, report)
    plant = an.plant
    syn = synthesize(an, safety=args.safety)
    if args.schedule:
        sched = _load_schedule(args.schedule, plant.m)
        syn = replace(syn, schedule=sched, t_bar=sched.t_bar)
    elif args.force_gains:
        gains = _csv_floats(args.force_gains, "--force-gains")
        if gains.size not in (1, plant.m):
            raise InputError(f"--force-gains needs 1 or {plant.m} values")
        sched = make_schedule('constant', syn.k_tilde, 0.0, {'gains': gains}, validate=False)
        syn = replace(syn, schedule=sched, t_bar=0.0)
        report['notes'] = [f"gains forced to {sched(0.0).tolist()} without floor validation"]
    report['synthesis'] = _synthesis_dict(syn)
    report['checks']['schedule_floor'] = not syn.schedule.violations()
    x0 = np.ones(plant.n) if args.x0 is None else _csv_floats(args.x0, "--x0")
    if x0.size != plant.n:
        raise InputError(f"--x0 has {x0.size} entries, plant has n={plant.n}")
    sim = run_simulation(plant, syn, x0, args.t_end, args.dt)
    report['simulation'] = sim.to_dict()
    report['checks'].update(sim.checks)
    out = _outdir(args)
    if out:
        _export(sim.trajectory, os.path.join(out, 'trajectory.csv'), None, args.every)
        p = plant.n - plant.m
        _export(sim.output_trajectory, os.path.join(out, 'output_coordinates.csv'),
                [f"xbar{p + i + 1}" for i in range(plant.m)], args.every)
        if sim.z_trajectory is not None:
            _export(sim.z_trajectory, os.path.join(out, 'comparison.csv'), ['z'], args.every)
    return sim


def _compare_paper(plant, args):
    an = analyze(plant)
    if not an.certified:
        return {'status': 'skipped', 'reason': "fails hypothesis: " + an.failed_hypotheses[0]}
    syn = synthesize(an, safety=args.safety)
    sim = run_simulation(plant, syn, np.ones(plant.n), args.t_end, args.dt)
    K = syn.schedule.evaluate(sim.trajectory.times)
    return {'status': 'ok', 'stable': sim.passed,
            'decay_rate': None if sim.fit is None else sim.fit.rate,
            'gain_sup': float(np.abs(K).max()), 'diagonal': 'yes'}


def _compare_moreau(plant, args):
    if plant.m != 1:
        return {'status': 'skipped', 'reason': "SISO only"}
    if plant.n not in (2, 3):
        return {'status': 'skipped', 'reason': "plant order must be 2 or 3"}
    pg = PeriodicGain(args.k1, args.k2, args.omega, plant.n)
    sched = moreau_gain(pg)
    rep = floquet_report(ClosedLoopMatrix(plant, sched), pg.period, pg.period / 1000)
    t = np.linspace(0.0, pg.period, 1001)
    return {'status': 'ok', 'stable': rep.stable,
            'decay_rate': float(np.log(rep.spectral_radius) / pg.period),
            'gain_sup': float(np.abs(sched.evaluate(t)).max()), 'diagonal': 'yes',
            'floquet_spectral_radius': rep.spectral_radius}


def _compare_trivial(plant, args):
    if plant.n != plant.m:
        return {'status': 'skipped', 'reason': "needs square B and C"}
    Q = -np.eye(plant.n)
    t_end = 20.0 if args.t_end is None else args.t_end
    checks = np.linspace(0.0, t_end, 11)
    K = trivial_unstructured_gain(plant, lambda t: Q, checks)
    # the closed loop is Q(t) by construction
    times = time_grid(0.0, t_end, 1e-2 if args.dt is None else args.dt)
    traj = Trajectory(times, integrate_linear(lambda t: Q, np.ones(plant.n), times))
    fit = fit_decay_rate(traj)
    props = K.target_properties(0.0)
    return {'status': 'ok', 'stable': fit.rate < 0, 'decay_rate': fit.rate,
            'gain_sup': max(float(np.linalg.norm(K(t), 2)) for t in checks),
            'diagonal': 'yes' if K.is_diagonal(checks) else 'no',
            'target_hurwitz': props['hurwitz'],
            'target_dominant': bool(props['row_dominant'] and props['column_dominant'])}


def cmd_compare(args, report):
    plant = load_plant(args.plant)
    methods = [s.strip() for s in args.methods.split(',') if s.strip()]
    unknown = sorted(set(methods) - set(METHODS))
    if unknown or not methods:
        raise InputError(f"--methods must be drawn from {', '.join(METHODS)}; "
                         f"got {unknown or 'none'}")
    runners = {'paper': _compare_paper, 'moreau': _compare_moreau, 'trivial': _compare_trivial}
    rows = []
    for name in methods:
        try:
            rows.append({'method': name, **runners[name](plant, args)})
        except (DecentStabError, ValueError, ArithmeticError) as exc:
            rows.append({'method': name, 'status': 'error', 'stable': False, 'reason': str(exc)})
    report['comparison'] = rows
    ran = [r for r in rows if r['status'] != 'skipped']
    if not ran:
        raise InputError("no applicable method: " + "; ".join(
            f"{r['method']}: {r['reason']}" for r in rows))
    report['checks'] = {f"{r['method']}_stable": bool(r['stable']) for r in ran}
    return rows


def cmd_gen_plant(args, report):
    if not 1 <= args.m <= args.n:
        raise InputError("need 1 <= m <= n")
    plant = random_certified_plant(np.random.default_rng(args.seed), args.n, args.m,
                                   f"random-{args.n}x{args.m}-seed{args.seed}")
    if args.out:
        dump_plant(plant, args.out)
        report['written'] = args.out
    else:
        sys.stdout.write(dump_plant(plant))
    report['plant'] = plant.name
    report['checks'] = {}
    return plant


# entry point ----------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog='decentstab', description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest='verb', required=True)

    def common(p, plant=True):
        if plant:
            p.add_argument('--plant', required=True, help="plant JSON file")
        p.add_argument('--out', help="output directory for report and data files")
        p.add_argument('--json', action='store_true', help="print the JSON report")

    p = sub.add_parser('analyze', help="check the synthesis hypotheses")
    common(p)
    p.set_defaults(func=cmd_analyze)

    def synth_opts(p):
        p.add_argument('--safety', type=float, default=DEFAULT_SAFETY,
                       help="multiplier on the gain floors (default %(default)s)")

    p = sub.add_parser('synthesize', help="gain floors and a schedule file")
    common(p)
    synth_opts(p)
    p.add_argument('--kind', choices=('constant', 'ramp'), default='constant')
    p.add_argument('--t-bar', type=float, help="ramp end time")
    p.set_defaults(func=cmd_synthesize)

    def sim_opts(p):
        p.add_argument('--t-end', type=float, help="final time (default: from the spectrum)")
        p.add_argument('--dt', type=float, help="step (default: from the spectrum)")

    p = sub.add_parser('simulate', help="closed-loop run with all certificates")
    common(p)
    synth_opts(p)
    sim_opts(p)
    p.add_argument('--schedule', help="schedule JSON written by synthesize")
    p.add_argument('--force-gains', metavar='CSV',
                   help="constant gains used as given, bypassing the floor check")
    p.add_argument('--x0', metavar='CSV', help="initial state (default: ones)")
    p.add_argument('--every', type=int, default=0,
                   help=f"export every N-th sample (default: at most {MAX_ROWS} rows)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('compare', help="structured gain against the reference schemes")
    common(p)
    synth_opts(p)
    sim_opts(p)
    p.add_argument('--methods', default=','.join(METHODS))
    p.add_argument('--k1', type=float, default=-3.0, help="periodic gain offset")
    p.add_argument('--k2', type=float, default=2.0, help="periodic gain amplitude")
    p.add_argument('--omega', type=float, default=10.0, help="periodic gain frequency")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser('gen-plant', help="random plant satisfying the hypotheses")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('-n', type=int, default=4, help="state dimension")
    p.add_argument('-m', type=int, default=2, help="number of channels")
    p.add_argument('--out', help="plant file to write (default: stdout)")
    p.add_argument('--json', action='store_true')
    p.set_defaults(func=cmd_gen_plant)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    report = {'command': args.verb}
    if getattr(args, 'plant', None):
        report['plant_file'] = args.plant
    try:
        args.func(args, report)
        failed = [k for k, v in report.get('checks', {}).items() if not v]
        report['status'] = 'check_failure' if failed else 'ok'
        report['failed_checks'] = failed
        code = EXIT_CHECK if failed else EXIT_OK
    except AssumptionViolation as exc:
        report.update(status='assumption_violation', failed_hypothesis=exc.condition,
                      error=str(exc))
        code = EXIT_CHECK
    except CertificateError as exc:
        report.update(status='check_failure', error=str(exc))
        code = EXIT_CHECK
    except DivergenceError as exc:
        report.update(status='numerical_error', error=str(exc), diverged_at=exc.time)
        code = EXIT_NUMERICAL
    except NumericalError as exc:
        report.update(status='numerical_error', error=str(exc))
        code = EXIT_NUMERICAL
    except (PlantFileError, InputError, ValueError) as exc:
        report.update(status='input_error', error=str(exc))
        code = EXIT_INPUT
    report['exit_status'] = code
    if args.verb != 'gen-plant' and getattr(args, 'out', None):
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, 'report.json'), report)
    stream = sys.stderr if args.verb == 'gen-plant' and not args.out else sys.stdout
    if args.json:
        print(json.dumps(report, indent=2, default=_jsonable), file=stream)
    else:
        _print_summary(report, stream)
    return code


if __name__ == '__main__':
    sys.exit(main())
