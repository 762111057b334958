"""Physical parameters, flow-velocity profiles, and the stability constants.

The transverse displacement w(t, x) of a tensioned pipe of length L carrying
fluid at axial speed V(t) obeys

    (m_p + 2 m_f) w_tt + EI w_xxxx - (T - 2 m_f V^2) w_xx
        + c w_t + 2 m_f V_t w_x + 4 m_f V w_xt = 0,

with w(0) = 0, w_xx(0) = w_xx(L) = 0 and the dynamical end condition
EI w_xxx(L) - (T - 2 m_f V^2) w_x(L) + 2 m_f V w_t(L) = 0.

This module owns the parameter records, the velocity profiles V(t) with their
certified sup/inf bounds, the initial-condition evaluators, and the full
explicit-constants pipeline that turns (params, bounds) into a certified
exponential decay rate: tension thresholds T1/T2/T*, the sandwich pair
(xi1, xi2), and the decay constants (delta, gamma0, gamma1, vartheta, k1, k0).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .errors import CertificateError, ConfigError, HorizonError, \
    InitialConditionError

__all__ = [
    "BeamParams", "VelocityBounds", "Constant", "SinusoidalOffset",
    "SmoothRamp", "SplineTable", "SineMode", "Polynomial", "Zero",
    "InitialCondition", "StabilityConstants", "SandwichConstants",
    "AssumptionsReport", "eval_velocity", "compute_bounds", "compute_T1",
    "compute_T2", "check_assumptions", "compute_sandwich_constants",
    "compute_decay_certificate", "eval_initial_condition",
]


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BeamParams:
    """Physical constants of the pipe-fluid system.

    m_p : mass per unit length of the pipe [kg/m]
    m_f : mass per unit length of the fluid [kg/m]
    EI  : bending stiffness [N m^2]
    T   : tension [N]
    c   : distributed damping coefficient [N s/m^2]
    L   : pipe length [m]

    c > 0 is required only by the decay certificate, not by simulation.
    """

    m_p: float
    m_f: float
    EI: float
    T: float
    c: float
    L: float

    def __post_init__(self):
        checks = [("m_p", self.m_p > 0), ("m_f", self.m_f >= 0),
                  ("EI", self.EI > 0), ("T", self.T > 0),
                  ("c", self.c >= 0), ("L", self.L > 0)]
        for name, ok in checks:
            if not ok or not math.isfinite(getattr(self, name)):
                raise ConfigError("invalid parameter %s=%r" %
                                  (name, getattr(self, name)))

    @property
    def m_total(self):
        """Inertia coefficient m_p + 2 m_f of the transverse motion."""
        return self.m_p + 2.0 * self.m_f


@dataclass(frozen=True)
class VelocityBounds:
    """Suprema/infima of the flow speed used by the constants pipeline."""

    sup_V2: float
    inf_V2: float
    sup_absV: float
    sup_absVtV: float

    def __post_init__(self):
        if not (self.sup_V2 >= self.inf_V2 >= 0.0):
            raise ConfigError("velocity bounds out of order: sup_V2=%r "
                              "inf_V2=%r" % (self.sup_V2, self.inf_V2))
        if self.sup_absVtV < 0.0:
            raise ConfigError("sup_absVtV must be nonnegative")


# ---------------------------------------------------------------------------
# velocity profiles
# ---------------------------------------------------------------------------
#
# Every profile is C^2 in t, keeps one strict sign on its horizon, and knows
# how to evaluate (V, V_t) at scalar times and at arrays of times.  Bounds
# are closed-form where the profile allows it and certified scans otherwise.

def _require_one_sign(lo, hi, detail):
    if lo <= 0.0 <= hi:
        raise ConfigError("velocity sign not constant (%s)" % detail)


class _Profile:
    """Shared behaviour; concrete kinds define _eval_arrays and bounds."""

    kind = "?"
    horizon = None

    def eval(self, t):
        """Return (V(t), V_t(t)) at a scalar time t >= 0."""
        if t < 0.0:
            raise HorizonError("profile evaluated at negative time t=%r" % t)
        v, vt = self._eval_arrays(np.asarray([float(t)]))
        return float(v[0]), float(vt[0])

    def eval_many(self, times):
        """Vectorized (V, V_t) over an array of times (used by the stepper)."""
        times = np.asarray(times, dtype=float)
        if times.size and times.min() < 0.0:
            raise HorizonError("profile evaluated at negative time")
        return self._eval_arrays(times)


class Constant(_Profile):
    """Steady flow V(t) = V0.

    V0 = 0 is allowed: a constant never crosses zero while moving, and the
    flow-free beam is a legitimate configuration (all V-derived bounds
    degenerate to zero).
    """

    kind = "Constant"

    def __init__(self, V0, horizon=None):
        if not np.isfinite(V0):
            raise ConfigError("V0 must be finite, got %r" % V0)
        self.V0 = float(V0)
        self.horizon = horizon

    def _eval_arrays(self, times):
        return np.full_like(times, self.V0), np.zeros_like(times)

    def bounds(self):
        a = abs(self.V0)
        return VelocityBounds(a * a, a * a, a, 0.0)


class SinusoidalOffset(_Profile):
    """Pulsating flow V(t) = V0 + A sin(omega t); requires |V0| > |A|."""

    kind = "SinusoidalOffset"

    def __init__(self, V0, A, omega, horizon=None):
        if abs(V0) <= abs(A):
            raise ConfigError("velocity sign not constant "
                              "(SinusoidalOffset needs |V0| > |A|, got "
                              "V0=%r A=%r)" % (V0, A))
        self.V0 = float(V0)
        self.A = float(A)
        self.omega = float(omega)
        self.horizon = horizon

    def _eval_arrays(self, times):
        s = self.omega * times
        return (self.V0 + self.A * np.sin(s),
                self.A * self.omega * np.cos(s))

    def bounds(self):
        # Extremes of V over a full period; |V0| > |A| keeps one sign.
        hi = abs(self.V0) + abs(self.A)
        lo = abs(self.V0) - abs(self.A)
        # |V_t V| = |A w cos(wt)| |V0 + A sin(wt)|; with s = sin(wt) the
        # squared objective (1 - s^2)(V0 + A s)^2 has interior critical
        # points at 2 A s^2 + V0 s - A = 0 (the root product is -1/2, so at
        # least one root lies in (-1, 1)); endpoints s = +-1 give zero.
        # Roots via the cancellation-free formula (a may be tiny next to b).
        best = 0.0
        if self.A != 0.0 and self.omega != 0.0:
            a, b, c = 2.0 * self.A, self.V0, -self.A
            q = -0.5 * (b + math.copysign(math.sqrt(b * b - 4 * a * c), b))
            candidates = [c / q]
            if abs(q) <= abs(a):  # the second root q/a can reach [-1, 1]
                candidates.append(q / a)
            for s in candidates:
                if abs(s) <= 1.0:
                    val = (abs(self.A * self.omega) * math.sqrt(1.0 - s * s)
                           * abs(self.V0 + self.A * s))
                    best = max(best, val)
        return VelocityBounds(hi * hi, lo * lo, hi, best)


def _smootherstep(u):
    """C^2 ramp shape 6u^5 - 15u^4 + 10u^3 on [0, 1], clamped outside."""
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (6.0 * u * u - 15.0 * u + 10.0)


def _smootherstep_deriv(u):
    inside = (u > 0.0) & (u < 1.0)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * u * u * (1.0 - u) ** 2, 0.0)


class SmoothRamp(_Profile):
    """C^2 ramp from V_start to V_end over [0, t_ramp], constant after."""

    kind = "SmoothRamp"

    def __init__(self, V_start, V_end, t_ramp, horizon=None):
        if t_ramp <= 0.0:
            raise ConfigError("t_ramp must be positive, got %r" % t_ramp)
        lo = min(V_start, V_end)
        hi = max(V_start, V_end)
        _require_one_sign(lo, hi, "SmoothRamp %r -> %r" % (V_start, V_end))
        self.V_start = float(V_start)
        self.V_end = float(V_end)
        self.t_ramp = float(t_ramp)
        self.horizon = horizon

    def _eval_arrays(self, times):
        u = times / self.t_ramp
        dV = self.V_end - self.V_start
        V = self.V_start + dV * _smootherstep(u)
        Vt = dV * _smootherstep_deriv(u) / self.t_ramp
        return V, Vt

    def bounds(self):
        # V is monotone between the endpoints; |V| extremes are closed form.
        hi = max(abs(self.V_start), abs(self.V_end))
        lo = min(abs(self.V_start), abs(self.V_end))

        # |V_t V| needs a scan over the ramp interval (V_t = 0 outside it).
        def abs_vtv(t):
            V, Vt = self._eval_arrays(np.atleast_1d(np.asarray(t, float)))
            return np.abs(V * Vt)

        return VelocityBounds(hi * hi, lo * lo, hi,
                              _scanned_sup(abs_vtv, 0.0, self.t_ramp))


class SplineTable(_Profile):
    """Tabulated speed interpolated by a natural cubic spline (C^2)."""

    kind = "SplineTable"

    def __init__(self, knots_t, knots_V, horizon=None):
        knots_t = np.asarray(knots_t, dtype=float)
        knots_V = np.asarray(knots_V, dtype=float)
        if knots_t.size != knots_V.size or knots_t.size < 2:
            raise ConfigError("knots_t and knots_V need equal length >= 2")
        if np.any(np.diff(knots_t) <= 0.0):
            raise ConfigError("knots_t must be strictly increasing")
        self.knots_t = knots_t
        self.knots_V = knots_V
        self._spline = CubicSpline(knots_t, knots_V, bc_type="natural")
        self._dspline = self._spline.derivative()
        # The spline may overshoot the table, so the sign check must look at
        # the interpolant itself, not just the knot values.
        roots = self._spline.roots(extrapolate=False)
        if len(roots):
            raise ConfigError("velocity sign not constant (spline crosses "
                              "zero near t=%.6g)" % roots[0])
        self.horizon = (float(knots_t[0]), float(knots_t[-1])) \
            if horizon is None else horizon

    def _eval_arrays(self, times):
        t0, t1 = float(self.knots_t[0]), float(self.knots_t[-1])
        # Accumulated step times may overshoot the span by a few ulps; clamp
        # those, reject anything genuinely outside.
        slack = 1e-9 * max(1.0, abs(t1 - t0))
        if times.size and (times.min() < t0 - slack or
                           times.max() > t1 + slack):
            raise HorizonError(
                "time outside spline table span [%g, %g]" % (t0, t1))
        times = np.clip(times, t0, t1)
        return self._spline(times), self._dspline(times)

    def bounds(self):
        t0, t1 = float(self.knots_t[0]), float(self.knots_t[-1])

        def absV(t):
            return np.abs(self._spline(np.atleast_1d(t)))

        def absVtV(t):
            t = np.atleast_1d(t)
            return np.abs(self._spline(t) * self._dspline(t))

        sup_a = _scanned_sup(absV, t0, t1)
        inf_a = _scanned_inf(absV, t0, t1)
        return VelocityBounds(sup_a * sup_a, inf_a * inf_a, sup_a,
                              _scanned_sup(absVtV, t0, t1))


def _scan_refine(f, t0, t1, sign, n=20001):
    """max of sign*f over [t0, t1]: dense scan plus bounded refinement
    around every sampled local extremum."""
    ts = np.linspace(t0, t1, n)
    vals = sign * np.asarray(f(ts), dtype=float)
    best = float(vals.max())
    interior = np.nonzero((vals[1:-1] >= vals[:-2]) &
                          (vals[1:-1] >= vals[2:]))[0] + 1
    for i in interior:
        res = minimize_scalar(lambda t: -sign * float(f(t)[0]),
                              bounds=(ts[i - 1], ts[i + 1]),
                              method="bounded",
                              options={"xatol": 1e-12 * max(t1 - t0, 1.0)})
        best = max(best, -float(res.fun))
    return best


def _scanned_sup(f, t0, t1):
    """Certified sup of f >= 0 over [t0, t1] (outward = upward nudge)."""
    return _scan_refine(f, t0, t1, +1.0) * (1.0 + 1e-12)


def _scanned_inf(f, t0, t1):
    """Certified inf of f >= 0 over [t0, t1] (outward = downward nudge)."""
    return max(-_scan_refine(f, t0, t1, -1.0), 0.0) * (1.0 - 1e-12)


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------

class SineMode:
    """a sin(n pi x / L): vanishes at 0 and has zero curvature at both ends."""

    kind = "SineMode"

    def __init__(self, n=1, amplitude=0.1):
        if int(n) < 1:
            raise InitialConditionError("mode number must be >= 1")
        self.n = int(n)
        self.amplitude = float(amplitude)

    def eval(self, x, L):
        k = self.n * math.pi / L
        return (self.amplitude * np.sin(k * np.asarray(x, dtype=float)),
                self.amplitude * k * np.cos(k * np.asarray(x, dtype=float)))


class Polynomial:
    """sum c_k x^k; the constant coefficient must be zero so w(0) = 0."""

    kind = "Polynomial"

    def __init__(self, coeffs):
        coeffs = [float(c) for c in coeffs]
        if not coeffs or coeffs[0] != 0.0:
            raise InitialConditionError(
                "polynomial initial data must vanish at x = 0 "
                "(first coefficient 0), got coeffs=%r" % (coeffs,))
        self.coeffs = coeffs

    def eval(self, x, L):
        x = np.asarray(x, dtype=float)
        p = np.polynomial.Polynomial(self.coeffs)
        return p(x), p.deriv()(x)


class Zero:
    """Identically zero field."""

    kind = "Zero"

    def eval(self, x, L):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x), np.zeros_like(x)


@dataclass(frozen=True)
class InitialCondition:
    """Displacement and velocity parts of the initial state."""

    displacement: object = field(default_factory=lambda: SineMode(1, 0.1))
    velocity: object = field(default_factory=Zero)


def eval_initial_condition(ic, x, L):
    """Evaluate (w0, w0_x, v0, v0_x) at positions x in [0, L]."""
    x = np.asarray(x, dtype=float)
    if x.size and (x.min() < 0.0 or x.max() > L):
        raise InitialConditionError("position outside [0, L]")
    w0, w0x = ic.displacement.eval(x, L)
    v0, v0x = ic.velocity.eval(x, L)
    return w0, w0x, v0, v0x


# ---------------------------------------------------------------------------
# constants pipeline
# ---------------------------------------------------------------------------

def eval_velocity(profile, t):
    """(V(t), V_t(t)) for any profile kind."""
    return profile.eval(t)


def compute_bounds(profile):
    """VelocityBounds over the profile's horizon.

    Constant and SinusoidalOffset use closed forms (exact over any horizon
    covering a full period); SmoothRamp and SplineTable use a dense scan with
    local refinement and outward rounding, so sup values are certified upper
    bounds.
    """
    return profile.bounds()


def compute_T1(params, bounds):
    """First tension threshold: L^2/4 (m_p + 2 m_f) + 2 sqrt(2) L m_f sup|V|."""
    return (params.L ** 2 / 4.0 * params.m_total
            + 2.0 * math.sqrt(2.0) * params.L * params.m_f * bounds.sup_absV)


def compute_T2(params, bounds):
    """Second threshold: c^2 L^2 / (8 (c - m_p - 2 m_f)) + 2 m_f sup|V_t V|.

    Requires c > m_p + 2 m_f; otherwise the decay certificate does not apply
    (simulation itself is still fine).
    """
    gap = params.c - params.m_total
    if gap <= 0.0:
        raise CertificateError(
            "decay certificate needs c > m_p + 2 m_f "
            "(c=%g, m_p + 2 m_f=%g)" % (params.c, params.m_total))
    return (params.c ** 2 * params.L ** 2 / (8.0 * gap)
            + 2.0 * params.m_f * bounds.sup_absVtV)


@dataclass(frozen=True)
class AssumptionsReport:
    """Outcome of the tension-threshold test T > T*."""

    holds: bool
    T_star: float
    margin: float
    c_too_small: bool


def check_assumptions(params, bounds):
    """Diagnostic test of T > 2 m_f sup V^2 + max{T1, T2}; never raises."""
    c_too_small = params.c <= params.m_total
    T1 = compute_T1(params, bounds)
    T2 = math.inf if c_too_small else compute_T2(params, bounds)
    T_star = 2.0 * params.m_f * bounds.sup_V2 + max(T1, T2)
    margin = params.T - T_star
    return AssumptionsReport(holds=params.T > T_star, T_star=T_star,
                             margin=margin, c_too_small=c_too_small)


# The sandwich argument bounds the cross terms G1, G2 by Young/Poincare with
# a free alpha1, giving per-term coefficient ratios between the Lyapunov
# functional and the energy.  The time-dependent V^2(t) inside the source
# formulas is frozen conservatively: sup where it must not shrink an upper
# bound, inf where it must not inflate a lower bound.  The literal displayed
# pair (max for the lower constant, min for the upper, i.e. apparently
# interchanged) is recorded alongside for comparison, with V^2(t) -> sup V^2.

_LITERAL_NOTE = "literal_formulas_swapped_in_source"


@dataclass(frozen=True)
class SandwichConstants:
    alpha1: float
    xi1: float
    xi2: float
    margin: float
    xi1_literal: float
    xi2_literal: float
    note: str = _LITERAL_NOTE


def _sandwich_margin(params, bounds, alpha1):
    P = params.L ** 2 / 2.0
    return (params.T / 2.0 - params.m_f * bounds.sup_V2
            - P * params.m_total / (2.0 * alpha1)
            - 2.0 * params.m_f * bounds.sup_absV * math.sqrt(P))


def compute_sandwich_constants(params, bounds):
    """Select alpha1 in [1, 2) and return the equivalence pair (xi1, xi2).

    alpha1 maximizes the positivity margin over a 1000-point grid (the margin
    is increasing in alpha1, so this lands on the last grid point whenever
    the margin is positive at all).  xi1 E <= L <= xi2 E then holds uniformly
    in t for the conservative pair.
    """
    grid = np.linspace(1.0, 2.0, 1000, endpoint=False)
    margins = np.array([_sandwich_margin(params, bounds, a) for a in grid])
    ok = margins > 0.0
    if not ok.any():
        raise CertificateError(
            "no alpha1 in [1, 2) gives a positive sandwich margin; "
            "tension assumptions do not hold")
    i = int(np.argmax(np.where(ok, margins, -np.inf)))
    a1 = float(grid[i])
    P = params.L ** 2 / 2.0
    m = params.m_total
    sqP = math.sqrt(P)
    up_hi = params.T / 2.0 - params.m_f * bounds.inf_V2 \
        + P * m / (2.0 * a1) + 2.0 * params.m_f * bounds.sup_absV * sqP
    lo_lo = params.T / 2.0 - params.m_f * bounds.sup_V2 \
        - P * m / (2.0 * a1) - 2.0 * params.m_f * bounds.sup_absV * sqP
    den_sup = params.T / 2.0 - params.m_f * bounds.sup_V2
    den_inf = params.T / 2.0 - params.m_f * bounds.inf_V2
    xi2 = max(up_hi / den_sup, 2.0 + a1, 2.0)
    xi1 = min(lo_lo / den_inf, 2.0 - a1, 2.0)
    # Literal displayed pair, V^2(t) frozen to sup V^2, parenthesis closed at
    # the comma; kept only as a record (xi1_literal > xi2_literal).
    lit_num_1 = den_sup + P * m / (2.0 * a1) \
        + 2.0 * params.m_f * bounds.sup_absV * sqP
    lit_num_2 = den_sup - P * m / (2.0 * a1) \
        - 2.0 * params.m_f * bounds.sup_absV * sqP
    xi1_lit = max(lit_num_1 / den_sup, 2.0 + a1, 2.0)
    xi2_lit = min(lit_num_2 / den_inf, 2.0 - a1, 2.0)
    return SandwichConstants(alpha1=a1, xi1=xi1, xi2=xi2,
                             margin=float(margins[i]),
                             xi1_literal=xi1_lit, xi2_literal=xi2_lit)


@dataclass(frozen=True)
class StabilityConstants:
    """Every explicit constant of the decay certificate."""

    P: float
    T1: float
    T2: float
    T_star: float
    alpha1_sandwich: float
    xi1: float
    xi2: float
    delta: float
    alpha1_decay: float
    gamma0: float
    gamma1: float
    vartheta: float
    k1: float
    k0: float
    xi1_literal: float
    xi2_literal: float
    note: str = _LITERAL_NOTE


def _decay_branches(params, bounds, delta):
    """(alpha1_decay, gamma0, gamma1, vartheta) at a given delta."""
    c, m = params.c, params.m_total
    P = params.L ** 2 / 2.0
    a1 = 2.0 * (c - m - delta) / c
    g0 = c - c * a1 / 2.0 - m
    g1 = (params.T - 2.0 * params.m_f * bounds.sup_absVtV
          - 2.0 * params.m_f * bounds.sup_V2 - c * P / (2.0 * a1))
    vth = min(2.0 * g0 / m,
              2.0 * g1 / (params.T - 2.0 * params.m_f * bounds.inf_V2),
              2.0)
    return a1, g0, g1, vth


def compute_decay_certificate(params, bounds):
    """Full StabilityConstants record with delta chosen to maximize k1.

    delta ranges over (0, c - m_p - 2 m_f); only values satisfying the
    refined tension condition (gamma1 > 0) are admissible.  The certified
    rate k1 = vartheta/xi2 is scanned on a 500-point grid and polished by
    bounded golden-section refinement (xi2 does not depend on delta, so this
    is a one-dimensional unimodal maximization of vartheta).
    """
    report = check_assumptions(params, bounds)
    if report.c_too_small:
        raise CertificateError(
            "decay certificate needs c > m_p + 2 m_f "
            "(c=%g, m_p + 2 m_f=%g)" % (params.c, params.m_total))
    if not report.holds:
        raise CertificateError(
            "tension assumptions fail: T=%g <= T*=%g"
            % (params.T, report.T_star))
    sw = compute_sandwich_constants(params, bounds)

    D = params.c - params.m_total
    grid = np.linspace(0.0, D, 502)[1:-1]
    vth_grid = np.array([_decay_branches(params, bounds, d)[3] for d in grid])
    g1_grid = np.array([_decay_branches(params, bounds, d)[2] for d in grid])
    adm = g1_grid > 0.0
    if not adm.any():
        raise CertificateError("no admissible delta in (0, c - m_p - 2 m_f); "
                               "refined tension condition infeasible")
    i = int(np.argmax(np.where(adm, vth_grid, -np.inf)))
    lo = grid[i - 1] if i > 0 else 0.0
    hi = grid[i + 1] if i + 1 < grid.size else D
    res = minimize_scalar(
        lambda d: -_decay_branches(params, bounds, d)[3],
        bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-13 * D})
    delta = float(res.x)
    if _decay_branches(params, bounds, delta)[2] <= 0.0:
        delta = float(grid[i])
    a1d, g0, g1, vth = _decay_branches(params, bounds, delta)

    return StabilityConstants(
        P=params.L ** 2 / 2.0,
        T1=compute_T1(params, bounds),
        T2=compute_T2(params, bounds),
        T_star=report.T_star,
        alpha1_sandwich=sw.alpha1,
        xi1=sw.xi1, xi2=sw.xi2,
        delta=delta, alpha1_decay=a1d,
        gamma0=g0, gamma1=g1, vartheta=vth,
        k1=vth / sw.xi2, k0=sw.xi2 / sw.xi1,
        xi1_literal=sw.xi1_literal, xi2_literal=sw.xi2_literal)
