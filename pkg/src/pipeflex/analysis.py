"""Stability analysis: decay fitting, bound checking, frozen spectra, sweeps.

Everything here consumes trajectories or assembled operators and produces
verdicts, so it sits downstream of timestep/functionals and upstream of the
CLI.  The discrete dissipativity check mirrors the cancellation argument
that makes the undamped generator non-expansive in the weighted norm

    <f, f>_t = alpha |w_xx|^2 + beta(t) |w_x|^2 + gamma |v|^2,

with alpha = EI/(2 m_f), beta = (T - 2 m_f V^2)/(2 m_f) and
gamma = (m_p + 2 m_f)/(2 m_f): after integrating the fourth-order pairing
by parts, the interior terms cancel pairwise and the boundary terms cancel
through the dynamical end condition, leaving exactly V v(L)^2 - V v(L)^2.
On the discrete field the end condition holds only weakly, so the leftover
is the measurable O(h) defect returned by dissipativity_residual.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import (ConfigError, DivergenceError, InsufficientDataError,
                     NotApplicableError, PipeflexError)
from .fem import (_element_blocks, _scatter, assemble_constant_matrices,
                  assemble_time_varying, build_space, end_derivatives)
from .model import check_assumptions, compute_bounds, compute_decay_certificate

__all__ = ["DecayFit", "WeightedInnerProduct", "SpectrumReport", "fit_decay",
           "check_decay_bound", "check_sandwich", "dissipativity_residual",
           "poincare_check", "first_order_matrix", "frozen_spectrum",
           "tension_sweep"]


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    """Log-linear fit E(t) ~ amplitude * exp(-rate * t) over a window."""

    t_start: float
    t_end: float
    rate: float
    amplitude: float
    r_squared: float
    n_points: int


class WeightedInnerProduct:
    """Weights of the norm in which the undamped generator is dissipative.

    alpha and gamma are constants; beta depends on the instantaneous
    velocity.  Undefined for m_f = 0 (every weight divides by m_f).
    """

    def __init__(self, params):
        if params.m_f == 0.0:
            raise NotApplicableError(
                "weighted inner product undefined for m_f = 0")
        self.params = params
        self.alpha = params.EI / (2.0 * params.m_f)
        self.gamma = params.m_total / (2.0 * params.m_f)

    def beta(self, V):
        return (self.params.T - 2.0 * self.params.m_f * V * V) \
            / (2.0 * self.params.m_f)


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues of the frozen-coefficient first-order system at time t."""

    t: float
    eigenvalues: np.ndarray        # sorted by real part, descending
    spectral_abscissa: float


# ---------------------------------------------------------------------------
# decay fitting and bound checks
# ---------------------------------------------------------------------------

def fit_decay(trajectory, window=None):
    """Least-squares line through (t, ln E) on samples with E > 0.

    window defaults to the second half of the trajectory, past the
    mode-mixing transient.
    """
    times = np.asarray(trajectory.times, dtype=float)
    E = np.array([s.E for s in trajectory.samples])
    if window is None:
        t_start = times[0] + 0.5 * (times[-1] - times[0])
        t_end = times[-1]
    else:
        t_start, t_end = float(window[0]), float(window[1])
    if not t_start < t_end:
        raise ConfigError("decay window [%g, %g] is empty" % (t_start, t_end))

    keep = (times >= t_start) & (times <= t_end) & (E > 0.0)
    if int(np.count_nonzero(keep)) < 10:
        raise InsufficientDataError(
            "decay fit needs >= 10 samples with E > 0 in [%g, %g], got %d"
            % (t_start, t_end, int(np.count_nonzero(keep))))
    t = times[keep]
    logE = np.log(E[keep])
    slope, intercept = np.polyfit(t, logE, 1)
    residuals = logE - (slope * t + intercept)
    ss_res = float(residuals @ residuals)
    centered = logE - np.mean(logE)
    ss_tot = float(centered @ centered)
    # a flat series has ss_tot at rounding level; the fit is then exact
    floor = t.size * (1e-12 * max(1.0, float(np.max(np.abs(logE))))) ** 2
    r2 = 1.0 if ss_tot <= floor else 1.0 - ss_res / ss_tot
    return DecayFit(t_start=t_start, t_end=t_end, rate=-float(slope),
                    amplitude=float(np.exp(intercept)), r_squared=r2,
                    n_points=int(t.size))


def check_decay_bound(trajectory, constants, tol=1e-3, max_anchors=100):
    """Does E(t) <= k0 E(s) exp(-k1 (t-s)) hold on the sampled trajectory?

    s runs over <= max_anchors decimated anchor samples, t over everything
    later; margins are normalized by E(s) and the worst one is reported.
    holds <=> worst margin >= -tol.
    """
    times = np.asarray(trajectory.times, dtype=float)
    E = np.array([s.E for s in trajectory.samples])
    n = times.size
    anchors = np.unique(np.linspace(0, n - 1, min(max_anchors, n)).astype(int))
    worst = np.inf
    for i in anchors:
        bound = constants.k0 * E[i] * np.exp(-constants.k1 * (times[i:] - times[i]))
        gap = bound - E[i:]
        if E[i] > 0.0:
            worst = min(worst, float(np.min(gap / E[i])))
        elif np.any(E[i:] > 0.0):
            worst = -np.inf        # E grew out of an exactly dead state
    if not np.isfinite(worst):
        worst = 0.0 if worst > 0 else worst
    return {"holds": bool(worst >= -tol), "worst_margin": worst}


def check_sandwich(trajectory, constants):
    """Empirical range of Lcal/E against the certified [xi1, xi2] band."""
    E = np.array([s.E for s in trajectory.samples])
    Lcal = np.array([s.Lcal for s in trajectory.samples])
    keep = E > 0.0
    conservative = (constants.xi1, constants.xi2)
    literal = (constants.xi1_literal, constants.xi2_literal)
    if not np.any(keep):
        return {"holds": True, "vacuous": True,
                "emp_min_ratio": np.nan, "emp_max_ratio": np.nan,
                "conservative": conservative, "literal": literal}
    ratios = Lcal[keep] / E[keep]
    emp_min = float(np.min(ratios))
    emp_max = float(np.max(ratios))
    holds = (emp_min > 0.0
             and constants.xi1 <= emp_min
             and emp_max <= constants.xi2)
    return {"holds": bool(holds), "vacuous": False,
            "emp_min_ratio": emp_min, "emp_max_ratio": emp_max,
            "conservative": conservative, "literal": literal}


# ---------------------------------------------------------------------------
# dissipativity and Poincare oracles
# ---------------------------------------------------------------------------

def dissipativity_residual(space, params, V, trial_state):
    """<f, A0 f>_t for the discrete pair f = (w, v) = (q, q_dot).

    After the pairwise cancellation of the interior terms (exact for the
    quadrature, so omitted), the weighted product reduces to boundary
    terms that vanish for the continuous solution:

        -alpha v(L) w_xxx(L) + alpha v_x(L) w_xx(L) - alpha v_x(0) w_xx(0)
        + beta v(L) w_x(L) - V v(L)^2

    The discrete field satisfies the end conditions only weakly, so this
    is O(h) times the squared weighted norm of f.
    """
    wp = WeightedInnerProduct(params)
    beta = wp.beta(V)
    q, q_dot = trial_state.q, trial_state.q_dot
    wxx0, wxxL, wxxxL = end_derivatives(space, q)
    vL = q_dot[space.i_wL]
    vxL = q_dot[space.i_thL]
    vx0 = q_dot[0]
    wxL = q[space.i_thL]
    return float(-wp.alpha * vL * wxxxL + wp.alpha * vxL * wxxL
                 - wp.alpha * vx0 * wxx0 + beta * vL * wxL - V * vL * vL)


def poincare_check(v, space=None, L=None, n_elements=64):
    """Check int v^2 <= (L^2/2) int v_x^2 on the Hermite representation.

    v may be a DOF vector for an existing space (every such field vanishes
    at x = 0 by construction) or a callable on [0, L] with v(0) = 0, which
    is interpolated first.
    """
    if callable(v):
        if L is None:
            raise ConfigError("poincare_check needs L for a callable input")
        space = build_space(n_elements, L)
        nodes = np.linspace(0.0, L, n_elements + 1)
        vals = np.array([float(v(x)) for x in nodes])
        if abs(vals[0]) > 1e-12 * max(1.0, np.max(np.abs(vals))):
            raise ConfigError("v(0) must vanish, got %r" % vals[0])
        h_fd = 1e-6 * L
        grid = np.clip(nodes, h_fd, L - h_fd)
        slopes = np.array([(float(v(x + h_fd)) - float(v(x - h_fd)))
                           / (2.0 * h_fd) for x in grid])
        q = np.empty(space.n_dofs)
        q[0] = slopes[0]
        q[1::2] = vals[1:]
        q[2::2] = slopes[1:]
    else:
        if space is None:
            raise ConfigError("poincare_check needs the space of a DOF vector")
        q = np.asarray(v, dtype=float)
        if q.shape != (space.n_dofs,):
            raise ConfigError("DOF vector has length %d, space wants %d"
                              % (q.size, space.n_dofs))

    # quadratic forms on the unit blocks; assemble once per call
    mass_el, _, string_el, _, _ = _element_blocks(space.h)
    M_unit = _scatter(space, mass_el)
    Ks = _scatter(space, string_el)
    lhs = float(q @ M_unit @ q)
    rhs = float(0.5 * space.L * space.L * (q @ Ks @ q))
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs * (1.0 + 1e-12))}


# ---------------------------------------------------------------------------
# frozen-coefficient spectra
# ---------------------------------------------------------------------------

def first_order_matrix(M, A, K):
    """[[0, I], [-M^-1 K, -M^-1 A]] for the companion first-order system."""
    n = M.shape[0]
    MinvK = np.linalg.solve(M, K)
    MinvA = np.linalg.solve(M, A)
    top = np.hstack([np.zeros((n, n)), np.eye(n)])
    bottom = np.hstack([-MinvK, -MinvA])
    return np.vstack([top, bottom])


def frozen_spectrum(space, params, profile, t, matrices=None):
    """All eigenvalues of the coefficient-frozen system at time t."""
    if matrices is None:
        matrices = assemble_constant_matrices(space, params)
    V, Vt = profile.eval(t)
    A_eff, K_eff = assemble_time_varying(space, params, matrices, V, Vt)
    S = first_order_matrix(matrices.M, A_eff, K_eff)
    try:
        lam = scipy.linalg.eigvals(S)
    except np.linalg.LinAlgError as exc:
        raise PipeflexError("eigenvalue solver failed at t=%g (n_dofs=%d): %s"
                            % (t, space.n_dofs, exc))
    order = np.lexsort((-lam.imag, -lam.real))
    lam = lam[order]
    return SpectrumReport(t=float(t), eigenvalues=lam,
                          spectral_abscissa=float(np.max(lam.real)))


# ---------------------------------------------------------------------------
# tension sweep
# ---------------------------------------------------------------------------

def _sweep_workers():
    raw = os.environ.get("PIPEFLEX_THREADS", "")
    if raw:
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigError("PIPEFLEX_THREADS must be an integer, got %r"
                              % raw)
        if workers < 1:
            raise ConfigError("PIPEFLEX_THREADS must be >= 1, got %d"
                              % workers)
        return workers
    return os.cpu_count() or 1


def _characteristic_frequency(params):
    """First-mode scale used to floor the flutter detection threshold."""
    k = np.pi / params.L
    return float(np.sqrt((params.EI * k ** 4 + params.T * k * k)
                         / params.m_total))


def _sweep_row(base_config, T):
    row = {"T": float(T), "assumptions_hold": None, "T_star": None,
           "k1": None, "k0": None, "abscissa": None, "unstable": None,
           "fitted_rate": None, "blowup_t": None, "error": None}
    try:
        params = replace(base_config.params, T=float(T))
        cfg = replace(base_config, params=params)
        bounds = compute_bounds(cfg.profile)
        report = check_assumptions(params, bounds)
        row["assumptions_hold"] = report.holds
        row["T_star"] = report.T_star
        if report.holds:
            cert = compute_decay_certificate(params, bounds)
            row["k1"] = cert.k1
            row["k0"] = cert.k0

        space = build_space(cfg.n_elements, params.L)
        rep = frozen_spectrum(space, params, cfg.profile, 0.0)
        row["abscissa"] = rep.spectral_abscissa
        row["unstable"] = bool(rep.spectral_abscissa
                               > 1e-8 * _characteristic_frequency(params))

        from .timestep import simulate
        try:
            traj = simulate(cfg)
            row["fitted_rate"] = fit_decay(traj).rate
        except DivergenceError as exc:
            row["blowup_t"] = exc.t_blowup
    except Exception as exc:          # a bad row must not kill the sweep
        row["error"] = "%s: %s" % (type(exc).__name__, exc)
    return row


def tension_sweep(base_config, T_values):
    """One certificate + spectrum + simulation row per tension value.

    Rows are independent and computed concurrently (PIPEFLEX_THREADS bounds
    the pool); the result keeps the input order.  A k1 monotonicity probe
    over the certified rows is attached to the report.
    """
    T_values = [float(T) for T in T_values]
    if not T_values:
        raise ConfigError("tension_sweep needs at least one T value")
    if any(T <= 0.0 for T in T_values):
        raise ConfigError("tension values must be positive")

    workers = min(_sweep_workers(), len(T_values))
    if workers == 1:
        rows = [_sweep_row(base_config, T) for T in T_values]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda T: _sweep_row(base_config, T),
                                 T_values))

    certified = [(row["T"], row["k1"]) for row in rows
                 if row["k1"] is not None]
    certified.sort()
    k1_monotone = all(b[1] >= a[1] * (1.0 - 1e-12)
                      for a, b in zip(certified, certified[1:]))
    return {"rows": rows, "k1_monotone": bool(k1_monotone)}
