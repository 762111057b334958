"""C1 finite elements for the pipe deflection.

Hermite cubics on a uniform mesh discretize the weak form of

    m w_tt + EI w_xxxx - (T - 2 m_f V^2) w_xx + c w_t
        + 2 m_f V_t w_x + 4 m_f V w_xt = 0,       m = m_p + 2 m_f.

Multiplying by a test function phi with phi(0) = 0 and integrating by parts
twice moves the dynamical end condition into a natural boundary term:

    m (w_tt, phi) + EI (w_xx, phi_xx) + (T - 2 m_f V^2)(w_x, phi_x)
        + c (w_t, phi) + 2 m_f V_t (w_x, phi) + 4 m_f V (w_xt, phi)
        - 2 m_f V w_t(L) phi(L) = 0,

so only w(0) = 0 is imposed on the space; w_xx(0) = w_xx(L) = 0 hold weakly.
Each node carries (w, w_x); the single eliminated DOF is w at node 0.

Matrix entry convention: row = test function, column = trial function.  The
first-derivative block D with D[i, j] = integral of phi_i phi_j' serves both
the convective term (scaled by 2 m_f V_t, acting on q) and the gyroscopic
term (scaled by 4 m_f V, acting on q_dot); D + D^T = e_L e_L^T exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InitialConditionError
from .model import eval_initial_condition

__all__ = [
    "HermiteSpace", "SystemMatrices", "build_space",
    "assemble_constant_matrices", "assemble_time_varying",
    "boundary_residual", "second_derivative_pairing",
    "project_initial_condition", "eval_field", "end_derivatives",
]


# ---------------------------------------------------------------------------
# space and shape functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HermiteSpace:
    """Uniform C1 mesh on [0, L] with w(0) eliminated.

    dof_map[e] gives the 4 constrained global indices of element e in local
    order (w_left, slope_left, w_right, slope_right); -1 marks the
    eliminated w(0) DOF of the first element.
    """

    n_elements: int
    L: float
    h: float
    n_dofs: int
    dof_map: np.ndarray

    @property
    def i_wL(self):
        """Constrained index of the tip deflection w(L)."""
        return self.n_dofs - 2

    @property
    def i_thL(self):
        """Constrained index of the tip slope w_x(L)."""
        return self.n_dofs - 1


def build_space(n_elements, L):
    if n_elements < 2:
        raise ConfigError("need at least 2 elements, got %d" % n_elements)
    if L <= 0.0:
        raise ConfigError("length must be positive, got %r" % L)
    n_el = int(n_elements)
    dof_map = np.empty((n_el, 4), dtype=np.int64)
    for e in range(n_el):
        full = np.array([2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3])
        dof_map[e] = full - 1          # w(0) is full DOF 0
    dof_map[0, 0] = -1
    return HermiteSpace(n_elements=n_el, L=float(L), h=float(L) / n_el,
                        n_dofs=2 * n_el + 1, dof_map=dof_map)


def _shape_values(s, h):
    """Rows of (N, dN/dx, d2N/dx2) at local coordinates s in [0, 1]."""
    s = np.asarray(s, dtype=float)
    N = np.stack([1 - 3 * s ** 2 + 2 * s ** 3,
                  h * (s - 2 * s ** 2 + s ** 3),
                  3 * s ** 2 - 2 * s ** 3,
                  h * (s ** 3 - s ** 2)], axis=-1)
    dN = np.stack([(-6 * s + 6 * s ** 2) / h,
                   1 - 4 * s + 3 * s ** 2,
                   (6 * s - 6 * s ** 2) / h,
                   3 * s ** 2 - 2 * s], axis=-1)
    d2N = np.stack([(-6 + 12 * s) / h ** 2,
                    (-4 + 6 * s) / h,
                    (6 - 12 * s) / h ** 2,
                    (6 * s - 2) / h], axis=-1)
    return N, dN, d2N


def _element_blocks(h, n_gauss=4):
    """4x4 element integrals by 4-point Gauss (exact through degree 7):
    mass, bending, string, first-derivative, and second-derivative blocks."""
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    s = 0.5 * (xg + 1.0)
    w = 0.5 * wg * h                     # physical dx = h ds
    N, dN, d2N = _shape_values(s, h)
    mass = np.einsum("g,gi,gj->ij", w, N, N)
    bend = np.einsum("g,gi,gj->ij", w, d2N, d2N)
    string = np.einsum("g,gi,gj->ij", w, dN, dN)
    first = np.einsum("g,gi,gj->ij", w, N, dN)     # row test, column trial
    second = np.einsum("g,gi,gj->ij", w, N, d2N)
    return mass, bend, string, first, second


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemMatrices:
    """Cached global blocks; unit blocks carry no physical scaling."""

    M: np.ndarray              # (m_p + 2 m_f) * <phi_i, phi_j>
    C_visc: np.ndarray         # c * <phi_i, phi_j>
    K_bend: np.ndarray         # EI * <phi_i'', phi_j''>
    K_string_unit: np.ndarray  # <phi_i', phi_j'>
    K_conv_unit: np.ndarray    # <phi_i, phi_j'>, scaled by 2 m_f V_t on q
    G_gyro_unit: np.ndarray    # <phi_i, phi_j'>, scaled by 4 m_f V on q_dot
    B_L_unit: np.ndarray       # -e_L e_L^T, scaled by 2 m_f V on q_dot


def _scatter(space, block):
    n = space.n_dofs
    out = np.zeros((n, n))
    for e in range(space.n_elements):
        idx = space.dof_map[e]
        for a in range(4):
            ia = idx[a]
            if ia < 0:
                continue
            for b in range(4):
                ib = idx[b]
                if ib >= 0:
                    out[ia, ib] += block[a, b]
    return out


def assemble_constant_matrices(space, params):
    mass, bend, string, first, _ = _element_blocks(space.h)
    M_unit = _scatter(space, mass)
    D = _scatter(space, first)
    B_L = np.zeros((space.n_dofs, space.n_dofs))
    B_L[space.i_wL, space.i_wL] = -1.0
    return SystemMatrices(
        M=params.m_total * M_unit,
        C_visc=params.c * M_unit,
        K_bend=params.EI * _scatter(space, bend),
        K_string_unit=_scatter(space, string),
        K_conv_unit=D,
        G_gyro_unit=D,
        B_L_unit=B_L)


def assemble_time_varying(space, params, matrices, V, V_t):
    """(A_eff, K_eff) at flow state (V, V_t): fresh arrays, cheap rescaling.

    A_eff acts on q_dot, K_eff on q:
      A_eff = C_visc + 4 m_f V * G_gyro_unit + 2 m_f V * B_L_unit
      K_eff = K_bend + (T - 2 m_f V^2) * K_string_unit
              + 2 m_f V_t * K_conv_unit
    """
    if not (np.isfinite(V) and np.isfinite(V_t)):
        raise ConfigError("non-finite flow state V=%r V_t=%r" % (V, V_t))
    twofV = 2.0 * params.m_f * V
    A_eff = (matrices.C_visc + 2.0 * twofV * matrices.G_gyro_unit
             + twofV * matrices.B_L_unit)
    K_eff = (matrices.K_bend
             + (params.T - twofV * V) * matrices.K_string_unit
             + 2.0 * params.m_f * V_t * matrices.K_conv_unit)
    return A_eff, K_eff


def second_derivative_pairing(space):
    """Global <phi_i, phi_j''>; equals e_wL e_thL^T - K_string_unit by parts
    (phi(0) = 0 and phi_j'(L) = delta at the tip slope kill the rest)."""
    _, _, _, _, second = _element_blocks(space.h)
    return _scatter(space, second)


# ---------------------------------------------------------------------------
# field evaluation
# ---------------------------------------------------------------------------

def _locate(space, x):
    """(element index, local coordinate) for each position in x."""
    x = np.asarray(x, dtype=float)
    e = np.clip((x / space.h).astype(int), 0, space.n_elements - 1)
    s = x / space.h - e
    return e, s


def eval_field(space, q, x, deriv=0):
    """Evaluate the Hermite field (deriv = 0, 1, or 2) at positions x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    e, s = _locate(space, x)
    N = _shape_values(s, space.h)[deriv]
    out = np.zeros_like(x)
    for k in range(x.size):
        idx = space.dof_map[e[k]]
        coeffs = np.where(idx >= 0, q[np.maximum(idx, 0)], 0.0)
        out[k] = N[k] @ coeffs
    return out


def end_derivatives(space, q):
    """(w_xx(0+), w_xx(L-), w_xxx(L-)) from the boundary elements.

    The third derivative is constant on the last element:
    w_xxx = (12 (w_l - w_r) + 6 h (th_l + th_r)) / h^3.
    """
    h = space.h
    first = np.where(space.dof_map[0] >= 0,
                     q[np.maximum(space.dof_map[0], 0)], 0.0)
    last = q[space.dof_map[-1]]
    _, _, d2N0 = _shape_values(np.array([0.0]), h)
    _, _, d2N1 = _shape_values(np.array([1.0]), h)
    wxx0 = float(d2N0[0] @ first)
    wxxL = float(d2N1[0] @ last)
    wxxxL = (12.0 * (last[0] - last[2])
             + 6.0 * h * (last[1] + last[3])) / h ** 3
    return wxx0, wxxL, wxxxL


def boundary_residual(space, state, params, V):
    """Residual of EI w_xxx(L) - (T - 2 m_f V^2) w_x(L) + 2 m_f V w_t(L).

    The weak form enforces this end condition only weakly, so the pointwise
    residual of the discrete solution is a mesh-quality diagnostic, O(h).
    """
    _, _, wxxxL = end_derivatives(space, state.q)
    w_xL = state.q[space.i_thL]
    wt_L = state.q_dot[space.i_wL]
    return (params.EI * wxxxL
            - (params.T - 2.0 * params.m_f * V * V) * w_xL
            + 2.0 * params.m_f * V * wt_L)


def project_initial_condition(space, ic):
    """Nodal interpolation of the initial condition onto (q, q_dot)."""
    nodes = np.linspace(0.0, space.L, space.n_elements + 1)
    w0, w0x, v0, v0x = eval_initial_condition(ic, nodes, space.L)
    if abs(w0[0]) > 1e-12 * max(1.0, np.max(np.abs(w0))):
        raise InitialConditionError(
            "initial displacement must vanish at x=0, got %r" % w0[0])
    q = np.empty(space.n_dofs)
    q_dot = np.empty(space.n_dofs)
    q[0] = w0x[0]              # slope at node 0 sits first
    q[1::2] = w0[1:]
    q[2::2] = w0x[1:]
    q_dot[0] = v0x[0]
    q_dot[1::2] = v0[1:]
    q_dot[2::2] = v0x[1:]
    return q, q_dot
