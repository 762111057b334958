"""Implicit time integration of M q_ddot + A_eff(t) q_dot + K_eff(t) q = 0.

The scheme is Newmark average acceleration (beta = 1/4, gamma = 1/2) with
the time-varying operators frozen at each step midpoint and the acceleration
re-anchored to the frozen operator before the update.  That combination is
algebraically the trapezoidal rule for the first-order system, so it is
unconditionally stable, second order in dt, and exactly energy-conserving
when c = 0 and V is constant.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend as _backend
from .errors import ConfigError, DivergenceError, StepError
from .fem import (assemble_constant_matrices, assemble_time_varying,
                  build_space, project_initial_condition)

__all__ = ["State", "Trajectory", "SimulationConfig", "newmark_step",
           "simulate"]


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class State:
    """Discrete (w, w_t, w_tt) triple at one instant."""

    t: float
    q: np.ndarray
    q_dot: np.ndarray
    q_ddot: np.ndarray


@dataclass
class Trajectory:
    """Decimated snapshots plus per-sample functional values.

    times are strictly increasing starting at 0; samples is filled by the
    functionals module (one FunctionalSample per snapshot).
    """

    times: np.ndarray
    states: list
    samples: list
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SimulationConfig:
    """Everything simulate needs; io builds this from a config file."""

    params: object
    profile: object
    ic: object
    n_elements: int = 32
    dt: float = 1e-3
    t_end: float = 10.0
    output_stride: int = 10
    backend: str = None
    config_hash: str = None

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive, got %r" % self.dt)
        if self.t_end < self.dt:
            raise ConfigError("t_end=%r shorter than one step dt=%r"
                              % (self.t_end, self.dt))
        if int(self.output_stride) < 1:
            raise ConfigError("output_stride must be >= 1")


# ---------------------------------------------------------------------------
# single dense step (reference used by the kernels' unit tests)
# ---------------------------------------------------------------------------

def _newmark_coeffs(dt):
    return 4.0 / (dt * dt), 2.0 / dt, 4.0 / dt


def newmark_step(state, space, params, profile, dt, matrices=None):
    """One Newmark step with dense solves; the kernels inline this logic."""
    if dt <= 0.0:
        raise ConfigError("dt must be positive, got %r" % dt)
    if matrices is None:
        matrices = assemble_constant_matrices(space, params)
    V, Vt = profile.eval(state.t + 0.5 * dt)
    A_mid, K_mid = assemble_time_varying(space, params, matrices, V, Vt)
    a0, a1, a2 = _newmark_coeffs(dt)

    a_n = np.linalg.solve(matrices.M,
                          -(A_mid @ state.q_dot + K_mid @ state.q))
    H = a0 * matrices.M + a1 * A_mid + K_mid
    rhs = (matrices.M @ (a0 * state.q + a2 * state.q_dot + a_n)
           + A_mid @ (a1 * state.q + state.q_dot))
    try:
        q_new = np.linalg.solve(H, rhs)
    except np.linalg.LinAlgError as exc:
        raise StepError("effective matrix singular at t=%g, dt=%g (%s)"
                        % (state.t, dt, exc))
    q_ddot = a0 * (q_new - state.q) - a2 * state.q_dot - a_n
    q_dot = state.q_dot + 0.5 * dt * (a_n + q_ddot)
    return State(t=state.t + dt, q=q_new, q_dot=q_dot, q_ddot=q_ddot)


# ---------------------------------------------------------------------------
# banded extraction
# ---------------------------------------------------------------------------

def _to_band(dense):
    """Pack a half-bandwidth-3 matrix into the 7-row banded layout."""
    n = dense.shape[0]
    ab = np.zeros((7, n))
    for k in range(-3, 4):
        d = np.diagonal(dense, offset=k)          # entries A[i, i+k]
        ab[3 - k, max(0, k):max(0, k) + d.size] = d
    # everything outside the band must vanish for this layout to be exact
    rebuilt = np.zeros_like(dense)
    for k in range(-3, 4):
        idx = np.arange(max(0, -k), min(n, n - k))
        rebuilt[idx + k, idx] = ab[3 + k, idx]
    if not np.array_equal(rebuilt, dense):
        raise AssertionError("matrix exceeds half-bandwidth 3")
    return ab


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def simulate(config):
    """March the configured system from t=0 to t_end.

    Returns a Trajectory with functional samples attached.  A state leaving
    the finite range raises DivergenceError carrying the blow-up time and
    the partial trajectory (a legitimate finding in the low-tension regime).
    """
    params, profile = config.params, config.profile
    kernel, kernel_name = _backend.select_backend(config.backend)

    space = build_space(config.n_elements, params.L)
    mats = assemble_constant_matrices(space, params)
    ab_M = _to_band(mats.M)
    ab_C = _to_band(mats.C_visc)
    ab_D = _to_band(mats.G_gyro_unit)
    ab_Kb = _to_band(mats.K_bend)
    ab_Ks = _to_band(mats.K_string_unit)

    q0, qd0 = project_initial_condition(space, config.ic)
    V0, Vt0 = profile.eval(0.0)
    A0, K0 = assemble_time_varying(space, params, mats, V0, Vt0)
    qdd0 = np.linalg.solve(mats.M, -(A0 @ qd0 + K0 @ q0))

    dt = float(config.dt)
    n_steps = max(1, int(round(config.t_end / dt)))
    stride = int(config.output_stride)
    t_mid = (np.arange(n_steps) + 0.5) * dt
    V_mid, Vt_mid = profile.eval_many(t_mid)
    V_mid = np.ascontiguousarray(V_mid, dtype=float)
    Vt_mid = np.ascontiguousarray(Vt_mid, dtype=float)

    n_full = n_steps // stride
    extra = 1 if n_steps % stride else 0
    n_snap = n_full + 1 + extra
    out_Q = np.zeros((n_snap, space.n_dofs))
    out_Qd = np.zeros((n_snap, space.n_dofs))
    out_Qdd = np.zeros((n_snap, space.n_dofs))
    out_Q[0], out_Qd[0], out_Qdd[0] = q0, qd0, qdd0

    status = kernel.run_loop(ab_M, ab_C, ab_D, ab_Kb, ab_Ks,
                             space.i_wL, params.m_f, params.T, dt,
                             V_mid, Vt_mid, q0, qd0, qdd0, stride,
                             out_Q, out_Qd, out_Qdd)

    times = np.arange(n_full + 1) * (stride * dt)
    if extra:
        times = np.append(times, n_steps * dt)

    metadata = {
        "n_elements": config.n_elements, "dt": dt,
        "t_end": n_steps * dt, "output_stride": stride,
        "params": params, "profile": profile, "backend": kernel_name,
        "config_hash": config.config_hash, "space": space,
    }

    def build_trajectory(upto):
        states = [State(t=float(times[s]), q=out_Q[s].copy(),
                        q_dot=out_Qd[s].copy(), q_ddot=out_Qdd[s].copy())
                  for s in range(upto)]
        traj = Trajectory(times=times[:upto].copy(), states=states,
                          samples=[], metadata=dict(metadata))
        from .functionals import attach_samples
        attach_samples(traj)
        return traj

    if status < 0:
        t_bad = -status * dt
        raise StepError("effective matrix factorization failed at t=%g "
                        "(dt=%g)" % (t_bad, dt))
    if status > 0:
        t_blowup = status * dt
        n_ok = (status - 1) // stride + 1    # snapshots strictly before blowup
        partial = build_trajectory(n_ok)
        partial.metadata["t_blowup"] = t_blowup
        raise DivergenceError("solution left the finite range at t=%g "
                              "(step %d)" % (t_blowup, status),
                              t_blowup=t_blowup, partial=partial)
    return build_trajectory(n_snap)
