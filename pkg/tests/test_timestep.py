import numpy as np
import pytest
from helpers import DofIC, first_eigenmode

from pipeflex import backend
from pipeflex.errors import ConfigError, DivergenceError
from pipeflex.fem import assemble_constant_matrices, build_space
from pipeflex.model import (BeamParams, Constant, InitialCondition, SineMode,
                            SinusoidalOffset, Zero)
from pipeflex.timestep import (SimulationConfig, _to_band, newmark_step,
                               simulate)

PARAMS_DAMPED = BeamParams(m_p=0.5, m_f=0.25, EI=1.0, T=5.0, c=3.0, L=1.0)
PARAMS_CONS = BeamParams(m_p=0.5, m_f=0.25, EI=1.0, T=5.0, c=0.0, L=1.0)
SINE_IC = InitialCondition(SineMode(1, 0.1), Zero())


def test_scalar_newmark_conserves_energy():
    """The update formulas applied to q'' + q = 0 keep (q^2 + qdot^2)/2
    constant to rounding noise, step by step."""
    dt = 0.01
    a0, a1, a2 = 4.0 / dt**2, 2.0 / dt, 4.0 / dt
    q, qd = 1.0, 0.0
    E_prev = 0.5 * (qd * qd + q * q)
    worst = 0.0
    for _ in range(1000):
        a_n = -q
        q_new = (a0 * q + a2 * qd + a_n) / (a0 + 1.0)
        qdd = a0 * (q_new - q) - a2 * qd - a_n
        qd = qd + 0.5 * dt * (a_n + qdd)
        q = q_new
        E = 0.5 * (qd * qd + q * q)
        worst = max(worst, abs(E - E_prev))
        E_prev = E
    assert worst <= 1e-13
    assert abs(E_prev - 0.5) <= 1e-12


def test_zero_ic_stays_zero():
    cfg = SimulationConfig(params=PARAMS_DAMPED, profile=Constant(1.0),
                           ic=InitialCondition(Zero(), Zero()),
                           n_elements=8, dt=1e-3, t_end=0.05, output_stride=10)
    traj = simulate(cfg)
    for st in traj.states:
        assert np.all(st.q == 0.0)
        assert np.all(st.q_dot == 0.0)
    assert all(s.E == 0.0 for s in traj.samples)


def test_energy_conserved_without_damping():
    """c = 0 with constant V kills every term of the energy identity, so the
    sampled energy must hold its initial value over ten thousand steps."""
    cfg = SimulationConfig(params=PARAMS_CONS, profile=Constant(1.0),
                           ic=SINE_IC, n_elements=32, dt=1e-3, t_end=10.0,
                           output_stride=10)
    traj = simulate(cfg)
    E = np.array([s.E for s in traj.samples])
    assert E[0] > 0.0
    assert np.max(np.abs(E - E[0])) / E[0] <= 1e-6


def test_energy_decreases_with_damping():
    cfg = SimulationConfig(params=PARAMS_DAMPED, profile=Constant(1.0),
                           ic=SINE_IC, n_elements=32, dt=1e-3, t_end=2.0,
                           output_stride=10)
    traj = simulate(cfg)
    E = np.array([s.E for s in traj.samples])
    assert np.all(np.diff(E) <= 1e-12 * E[0])
    assert E[-1] < 0.9 * E[0]


def test_self_convergence_second_order():
    """Halving dt cuts the error against a dt/64 reference by ~4x."""
    params = BeamParams(m_p=1.0, m_f=0.2, EI=2.0, T=12.0, c=4.0, L=1.0)
    profile = SinusoidalOffset(2.0, 0.3, 0.5)
    space, vec = first_eigenmode(params, 2.0, 16)
    ic = InitialCondition(DofIC(space, vec), Zero())

    def energies(dt, stride):
        cfg = SimulationConfig(params=params, profile=profile, ic=ic,
                               n_elements=16, dt=dt, t_end=1.0,
                               output_stride=stride)
        return np.array([s.E for s in simulate(cfg).samples])

    E_ref = energies(2e-3 / 64, 320)
    err_coarse = np.max(np.abs(energies(2e-3, 5) - E_ref))
    err_fine = np.max(np.abs(energies(1e-3, 10) - E_ref))
    ratio = err_coarse / err_fine
    # observed order in [1.8, 2.2]
    assert 2.0 ** 1.8 <= ratio <= 2.0 ** 2.2


def test_newmark_step_matches_kernel():
    """The dense single-step routine and the banded kernel integrate the
    same trajectory (different factorizations, same scheme)."""
    profile = SinusoidalOffset(1.0, 0.3, 2.0)
    cfg = SimulationConfig(params=PARAMS_DAMPED, profile=profile,
                           ic=SINE_IC, n_elements=8, dt=1e-3, t_end=0.01,
                           output_stride=1)
    traj = simulate(cfg)
    space = build_space(8, 1.0)
    mats = assemble_constant_matrices(space, PARAMS_DAMPED)
    st = traj.states[0]
    for _ in range(10):
        st = newmark_step(st, space, PARAMS_DAMPED, profile, 1e-3,
                          matrices=mats)
    assert st.t == pytest.approx(traj.states[-1].t, abs=1e-12)
    np.testing.assert_allclose(st.q, traj.states[-1].q, rtol=0, atol=1e-11)
    np.testing.assert_allclose(st.q_dot, traj.states[-1].q_dot,
                               rtol=0, atol=1e-8)


def test_newmark_step_zero_state():
    space = build_space(4, 1.0)
    from pipeflex.timestep import State
    n = space.n_dofs
    st = State(t=0.0, q=np.zeros(n), q_dot=np.zeros(n), q_ddot=np.zeros(n))
    out = newmark_step(st, space, PARAMS_DAMPED, Constant(1.0), 0.1)
    assert out.t == pytest.approx(0.1)
    assert np.all(out.q == 0.0) and np.all(out.q_dot == 0.0)


def test_newmark_step_rejects_bad_dt():
    space = build_space(4, 1.0)
    from pipeflex.timestep import State
    n = space.n_dofs
    st = State(t=0.0, q=np.zeros(n), q_dot=np.zeros(n), q_ddot=np.zeros(n))
    with pytest.raises(ConfigError):
        newmark_step(st, space, PARAMS_DAMPED, Constant(1.0), 0.0)


def test_determinism_bitwise():
    profile = SinusoidalOffset(1.0, 0.3, 2.0)

    def run():
        cfg = SimulationConfig(params=PARAMS_DAMPED, profile=profile,
                               ic=SINE_IC, n_elements=16, dt=1e-3,
                               t_end=1.0, output_stride=10)
        return simulate(cfg)

    a, b = run(), run()
    assert np.array_equal(a.times, b.times)
    for sa, sb in zip(a.states, b.states):
        assert np.array_equal(sa.q, sb.q)
        assert np.array_equal(sa.q_dot, sb.q_dot)
        assert np.array_equal(sa.q_ddot, sb.q_ddot)
    assert [s.E for s in a.samples] == [s.E for s in b.samples]


@pytest.mark.skipif("compiled" not in backend.available_backends(),
                    reason="compiled kernel not built")
def test_backends_agree():
    profile = SinusoidalOffset(1.0, 0.3, 2.0)

    def run(bk):
        cfg = SimulationConfig(params=PARAMS_DAMPED, profile=profile,
                               ic=SINE_IC, n_elements=16, dt=1e-3,
                               t_end=1.0, output_stride=10, backend=bk)
        return simulate(cfg)

    a, b = run("python"), run("compiled")
    assert a.metadata["backend"] == "python"
    assert b.metadata["backend"] == "compiled"
    qa, qb = a.states[-1].q, b.states[-1].q
    np.testing.assert_allclose(qa, qb, rtol=0, atol=1e-10)
    Ea = np.array([s.E for s in a.samples])
    Eb = np.array([s.E for s in b.samples])
    np.testing.assert_allclose(Ea, Eb, rtol=0, atol=1e-10)


def test_divergence_reported_with_partial_trajectory():
    """Far beyond the critical tension the run must end in a divergence
    error carrying the blow-up time and the finite prefix."""
    params = BeamParams(m_p=1.0, m_f=2.0, EI=1.0, T=1.0, c=0.0, L=1.0)
    cfg = SimulationConfig(params=params, profile=Constant(12.0),
                           ic=SINE_IC, n_elements=16, dt=1e-3, t_end=30.0,
                           output_stride=100)
    with pytest.raises(DivergenceError) as exc_info, \
            pytest.warns(RuntimeWarning, match="effective tension"):
        simulate(cfg)
    err = exc_info.value
    assert 1.0 < err.t_blowup < 30.0
    part = err.partial
    assert part is not None
    assert part.metadata["t_blowup"] == err.t_blowup
    assert len(part.times) >= 2
    assert part.times[0] == 0.0
    assert np.all(np.diff(part.times) > 0)
    assert part.times[-1] < err.t_blowup
    for st in part.states:
        assert np.all(np.isfinite(st.q))
    # the prefix should show the amplitude growth that killed the run
    assert (np.max(np.abs(part.states[-1].q))
            > 1e6 * np.max(np.abs(part.states[0].q)))


def test_sample_times_and_stride():
    cfg = SimulationConfig(params=PARAMS_DAMPED, profile=Constant(1.0),
                           ic=SINE_IC, n_elements=4, dt=1e-3, t_end=0.1,
                           output_stride=7)
    traj = simulate(cfg)
    # 100 steps at stride 7 -> 14 full strides plus the ragged end point
    assert len(traj.times) == 16
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(0.1, abs=1e-15)
    np.testing.assert_allclose(traj.times[1:-1],
                               7e-3 * np.arange(1, 15), atol=1e-15)
    assert len(traj.states) == len(traj.times) == len(traj.samples)


def test_stride_larger_than_run():
    cfg = SimulationConfig(params=PARAMS_DAMPED, profile=Constant(1.0),
                           ic=SINE_IC, n_elements=4, dt=1e-3, t_end=0.1,
                           output_stride=100000)
    traj = simulate(cfg)
    assert len(traj.times) == 2
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(0.1, abs=1e-15)


def test_metadata_contents():
    cfg = SimulationConfig(params=PARAMS_DAMPED, profile=Constant(1.0),
                           ic=SINE_IC, n_elements=8, dt=1e-3, t_end=0.05,
                           output_stride=10, config_hash="abc123")
    traj = simulate(cfg)
    md = traj.metadata
    assert md["n_elements"] == 8
    assert md["dt"] == 1e-3
    assert md["output_stride"] == 10
    assert md["config_hash"] == "abc123"
    assert md["backend"] in ("python", "compiled")


@pytest.mark.parametrize("kwargs", [
    dict(dt=0.0),
    dict(dt=-1e-3),
    dict(t_end=1e-4),        # shorter than one step
    dict(output_stride=0),
])
def test_config_validation(kwargs):
    base = dict(params=PARAMS_DAMPED, profile=Constant(1.0), ic=SINE_IC,
                n_elements=8, dt=1e-3, t_end=1.0, output_stride=10)
    base.update(kwargs)
    with pytest.raises(ConfigError):
        SimulationConfig(**base)


def test_to_band_round_trip():
    rng = np.random.default_rng(7)
    n = 12
    dense = np.zeros((n, n))
    for k in range(-3, 4):
        d = rng.standard_normal(n - abs(k))
        dense += np.diag(d, k)
    ab = _to_band(dense)
    assert ab.shape == (7, n)
    # spot-check the layout convention ab[3 + i - j, j] = A[i, j]
    assert ab[3, 5] == dense[5, 5]
    assert ab[2, 5] == dense[4, 5]
    assert ab[6, 2] == dense[5, 2]


def test_to_band_rejects_wide_matrix():
    dense = np.zeros((10, 10))
    dense[0, 9] = 1.0
    with pytest.raises(AssertionError):
        _to_band(dense)


class TestBackendSelection:
    def test_python_always_available(self):
        assert "python" in backend.available_backends()

    def test_explicit_name(self):
        mod, name = backend.select_backend("python")
        assert name == "python"
        assert hasattr(mod, "run_loop")

    def test_unknown_name_rejected(self):
        with pytest.raises(ConfigError):
            backend.select_backend("fortran")

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("PIPEFLEX_BACKEND", "python")
        _, name = backend.select_backend()
        assert name == "python"

    def test_env_bogus_value(self, monkeypatch):
        monkeypatch.setenv("PIPEFLEX_BACKEND", "cuda")
        with pytest.raises(ConfigError):
            backend.select_backend()

    def test_missing_compiled_reported(self, monkeypatch):
        monkeypatch.setitem(backend._NAMES, "compiled", None)
        with pytest.raises(ImportError, match="PIPEFLEX_BACKEND=python"):
            backend.select_backend("compiled")

    def test_simulate_respects_env(self, monkeypatch):
        monkeypatch.setenv("PIPEFLEX_BACKEND", "python")
        cfg = SimulationConfig(params=PARAMS_DAMPED, profile=Constant(1.0),
                               ic=SINE_IC, n_elements=4, dt=1e-3, t_end=0.01,
                               output_stride=10)
        traj = simulate(cfg)
        assert traj.metadata["backend"] == "python"
