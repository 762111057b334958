"""Command-line surface: simulate, constants, sweep, eigen, verify.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 numeric
divergence (partial output flushed first), 4 verification failure.
"""

import argparse
import sys

import numpy as np

from .analysis import (dissipativity_residual, frozen_spectrum,
                       poincare_check, tension_sweep)
from .config import parse_config
from .errors import DivergenceError, PipeflexError
from .fem import build_space
from .model import (BeamParams, Constant, InitialCondition, SineMode,
                    SinusoidalOffset, Zero, check_assumptions, compute_bounds,
                    compute_decay_certificate)
from .output import (format_constants_report, format_spectrum_report,
                     plot_timeseries, write_sweep_csv, write_timeseries)
from .timestep import SimulationConfig, State, simulate

__all__ = ["cli", "main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting itself."""

    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="pipeflex",
                     description="beam-conveying-fluid simulator and "
                                 "stability toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the configured simulation "
                                        "and write the timeseries CSV")
    p.add_argument("config", help="path to the run configuration file")
    p.add_argument("--output", default=None,
                   help="override the [output] timeseries path")
    p.add_argument("--plots", default=None,
                   help="override the [output] plots prefix")
    p.add_argument("--backend", default=None,
                   help="force a stepping kernel (compiled|python)")

    p = sub.add_parser("constants", help="print the stability constants "
                                         "and the assumptions verdict")
    p.add_argument("config")
    p.add_argument("--report", choices=("human", "machine"), default="human")

    p = sub.add_parser("sweep", help="run the tension sweep from [sweep] "
                                     "and write one CSV row per value")
    p.add_argument("config")
    p.add_argument("--output", default="sweep.csv")

    p = sub.add_parser("eigen", help="frozen-coefficient spectrum report")
    p.add_argument("config")
    p.add_argument("--t", type=float, default=0.0,
                   help="time at which the coefficients are frozen")
    p.add_argument("--n-show", type=int, default=10)

    sub.add_parser("verify", help="run the built-in oracle suite")
    return parser


def _load(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise PipeflexError("cannot read config %r: %s" % (path, exc))
    return parse_config(text)


def _cmd_simulate(args):
    run = _load(args.config)
    out_path = args.output if args.output is not None else run.timeseries
    plots = args.plots if args.plots is not None else run.plots
    try:
        traj = simulate(run.simulation(backend=args.backend))
    except DivergenceError as exc:
        if exc.partial is not None and exc.partial.times.size:
            write_timeseries(exc.partial, out_path, run.config_hash)
            print("partial timeseries written to %s" % out_path,
                  file=sys.stderr)
        print("divergence: %s" % exc, file=sys.stderr)
        return 3
    write_timeseries(traj, out_path, run.config_hash)
    print("wrote %s (%d samples, backend %s)"
          % (out_path, traj.times.size, traj.metadata["backend"]))
    if plots:
        for path in plot_timeseries(traj, plots, run.config_hash):
            print("wrote %s" % path)
    final = traj.samples[-1]
    print("final t=%g E=%.6g Lcal=%.6g" % (traj.times[-1], final.E,
                                           final.Lcal))
    return 0


def _cmd_constants(args):
    run = _load(args.config)
    bounds = compute_bounds(run.profile)
    report = check_assumptions(run.params, bounds)
    constants = (compute_decay_certificate(run.params, bounds)
                 if report.holds else None)
    print(format_constants_report(run.params, bounds, report, constants,
                                  machine=(args.report == "machine")))
    return 0


def _cmd_sweep(args):
    run = _load(args.config)
    if not run.sweep_T:
        raise PipeflexError("sweep requires T_values in a [sweep] section")
    report = tension_sweep(run.simulation(), list(run.sweep_T))
    write_sweep_csv(report, args.output, run.config_hash)
    n_bad = sum(1 for row in report["rows"] if row["error"] is not None)
    print("wrote %s (%d rows, %d failed, k1 monotone: %s)"
          % (args.output, len(report["rows"]), n_bad,
             report["k1_monotone"]))
    return 0


def _cmd_eigen(args):
    run = _load(args.config)
    space = build_space(run.n_elements, run.params.L)
    rep = frozen_spectrum(space, run.params, run.profile, args.t)
    print(format_spectrum_report(rep, n_show=args.n_show))
    return 0


# ---------------------------------------------------------------------------
# built-in oracle suite
# ---------------------------------------------------------------------------

_REF_PARAMS = BeamParams(m_p=0.5, m_f=0.25, EI=1.0, T=5.0, c=3.0, L=1.0)


def _check_poincare():
    space = build_space(16, 1.3)
    rng = np.random.default_rng(0)
    worst = -np.inf
    for _ in range(200):
        out = poincare_check(rng.standard_normal(space.n_dofs), space=space)
        worst = max(worst, out["lhs"] - out["rhs"])
        if not out["holds"]:
            return False, "violated by %g" % (out["lhs"] - out["rhs"])
    return True, "200 random fields, worst lhs-rhs margin %.3g" % worst


def _check_conservation():
    params = BeamParams(m_p=0.5, m_f=0.25, EI=1.0, T=5.0, c=0.0, L=1.0)
    cfg = SimulationConfig(params=params, profile=Constant(1.0),
                           ic=InitialCondition(SineMode(1, 0.1), Zero()),
                           n_elements=16, dt=1e-3, t_end=1.0,
                           output_stride=10)
    traj = simulate(cfg)
    E = np.array([s.E for s in traj.samples])
    drift = float(np.max(np.abs(E - E[0])) / E[0])
    return drift <= 1e-8, "undamped constant-V energy drift %.3g" % drift


def _series_trial(space, params, V):
    """Deterministic trial state compatible with the end conditions."""
    rng = np.random.default_rng(3)
    a = rng.standard_normal(4) * [1.0, 0.5, 0.25, 0.125]
    b = rng.standard_normal(3) * [1.0, 0.5, 0.25]
    L = space.L
    alpha = params.EI / (2.0 * params.m_f)
    beta = (params.T - 2.0 * params.m_f * V * V) / (2.0 * params.m_f)
    wxxx_L = sum(ak * ((k + 1) * np.pi / L) ** 3 * -np.cos((k + 1) * np.pi)
                 for k, ak in enumerate(a))
    wx_L = sum(ak * ((k + 1) * np.pi / L) * np.cos((k + 1) * np.pi)
               for k, ak in enumerate(a))
    v_tip = (-alpha * wxxx_L + beta * wx_L) / V
    nodes = np.linspace(0.0, L, space.n_elements + 1)
    q = np.empty(space.n_dofs)
    q_dot = np.empty(space.n_dofs)

    def series(x, coeffs, deriv):
        total = 0.0
        for k, ck in enumerate(coeffs):
            w = (k + 1) * np.pi / L
            total += ck * (w * np.cos(w * x) if deriv else np.sin(w * x))
        return total

    w_tip = np.pi / (2.0 * L)
    q[0] = series(0.0, a, 1)
    q[1::2] = series(nodes[1:], a, 0)
    q[2::2] = series(nodes[1:], a, 1)
    q_dot[0] = series(0.0, b, 1) + v_tip * w_tip
    q_dot[1::2] = series(nodes[1:], b, 0) + v_tip * np.sin(w_tip * nodes[1:])
    q_dot[2::2] = (series(nodes[1:], b, 1)
                   + v_tip * w_tip * np.cos(w_tip * nodes[1:]))
    return State(t=0.0, q=q, q_dot=q_dot, q_ddot=np.zeros_like(q))


def _check_dissipativity():
    residuals = []
    for n_el in (8, 16, 32):
        space = build_space(n_el, 1.0)
        st0 = _series_trial(space, _REF_PARAMS, 1.0)
        residuals.append(abs(dissipativity_residual(space, _REF_PARAMS, 1.0,
                                                    st0)))
    ok = residuals[0] > residuals[1] > residuals[2]
    return ok, ("residuals under refinement: "
                + " -> ".join("%.3g" % r for r in residuals))


def _check_energy_identity():
    # stride 1: the centered difference needs the finest sampling available
    cfg = SimulationConfig(params=_REF_PARAMS,
                           profile=SinusoidalOffset(2.0, 0.3, 0.5),
                           ic=InitialCondition(SineMode(1, 0.1), Zero()),
                           n_elements=16, dt=5e-4, t_end=1.0,
                           output_stride=1)
    traj = simulate(cfg)
    t = traj.times
    E = np.array([s.E for s in traj.samples])
    rhs = np.array([s.dE_dt_analytic for s in traj.samples])
    fd = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    err = float(np.max(np.abs(fd - rhs[1:-1])))
    scale = float(np.max(np.abs(rhs)))
    ok = err <= 1e-3 * scale
    return ok, "max |centered dE/dt - analytic| = %.3g (scale %.3g)" % (
        err, scale)


def _cmd_verify(args):
    checks = [("poincare", _check_poincare),
              ("conservation", _check_conservation),
              ("dissipativity-refinement", _check_dissipativity),
              ("energy-identity", _check_energy_identity)]
    all_ok = True
    for name, fn in checks:
        ok, detail = fn()
        all_ok = all_ok and ok
        print("%s %s: %s" % ("PASS" if ok else "FAIL", name, detail))
    return 0 if all_ok else 4


_HANDLERS = {"simulate": _cmd_simulate, "constants": _cmd_constants,
             "sweep": _cmd_sweep, "eigen": _cmd_eigen, "verify": _cmd_verify}


def cli(argv):
    """Run one command; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 1
    except SystemExit as exc:        # --help paths
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except DivergenceError as exc:
        print("divergence: %s" % exc, file=sys.stderr)
        return 3
    except PipeflexError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2


def main(argv=None):
    return cli(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
