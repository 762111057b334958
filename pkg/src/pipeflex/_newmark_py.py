"""Reference time-stepping kernel on banded matrices (pure numpy/scipy).

The compiled kernel in _newmark.pyx mirrors this file operation for
operation (same banded layout, same LAPACK routines, same accumulation
order), so the two backends agree to rounding noise and either can serve as
the oracle for the other.

Banded layout: the system has half-bandwidth 3 (Hermite elements couple 4
neighbouring DOFs), stored as the 7-row matrix ab[3 + i - j, j] = A[i, j].
LAPACK factorization pads this to 10 rows of fill-in workspace.
"""

import numpy as np
from scipy.linalg import lapack

KL = KU = 3  # half-bandwidths of every system matrix


def band_matvec(ab, x, out):
    """out = A @ x for the 7-row band ab; diagonal-by-diagonal, ascending."""
    n = x.shape[0]
    out[:] = 0.0
    for k in range(-KL, KU + 1):
        j_lo = max(0, -k)
        j_hi = min(n, n - k)
        if j_lo < j_hi:
            out[j_lo + k:j_hi + k] += ab[3 + k, j_lo:j_hi] * x[j_lo:j_hi]


def _pad_for_factor(ab):
    """Copy the 7-row band into LAPACK's 10-row working layout (F-order)."""
    n = ab.shape[1]
    padded = np.zeros((2 * KL + KU + 1, n), order="F")
    padded[KL:, :] = ab
    return padded


def _factor(ab):
    lu, ipiv, info = lapack.dgbtrf(_pad_for_factor(ab), KL, KU)
    return lu, ipiv, int(info)


def _solve(lu, ipiv, b):
    x, info = lapack.dgbtrs(lu, KL, KU, b.reshape(-1, 1), ipiv)
    return x.ravel(), int(info)


def run_loop(ab_M, ab_C, ab_D, ab_Kb, ab_Ks, iL, m_f, T, dt,
             V_mid, Vt_mid, q, q_dot, q_ddot, stride,
             out_Q, out_Qd, out_Qdd):
    """March n_steps of Newmark average acceleration with midpoint-frozen
    coefficients, writing decimated snapshots into the out arrays.

    State arrays are taken over (not mutated in place for the caller); the
    snapshot at index 0 must already hold the initial state.  Returns 0 on
    success, +s if the state left the finite range after step s, -s if the
    effective matrix factorization failed at step s.
    """
    n = q.shape[0]
    n_steps = V_mid.shape[0]
    q = q.copy()
    q_dot = q_dot.copy()
    q_ddot = q_ddot.copy()

    a0 = 4.0 / (dt * dt)
    a1 = 2.0 / dt
    a2 = 4.0 / dt

    lu_M, ipiv_M, info = _factor(ab_M)
    if info != 0:
        return -1

    tmp1 = np.empty(n)
    tmp2 = np.empty(n)
    # divergence is a detected outcome, not a numpy error condition
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            V = V_mid[k]
            Vt = Vt_mid[k]
            twofV = 2.0 * m_f * V

            # midpoint-frozen operator bands
            ab_A = ab_C + (2.0 * twofV) * ab_D
            ab_A[3, iL] -= twofV             # tip term -2 m_f V e_L e_L^T
            ab_K = ab_Kb + (T - twofV * V) * ab_Ks + (2.0 * m_f * Vt) * ab_D

            # re-anchor the acceleration on the frozen operator:
            # M a_n = -(A q_dot + K q); keeps the update trapezoidal-exact
            band_matvec(ab_A, q_dot, tmp1)
            band_matvec(ab_K, q, tmp2)
            a_n, info = _solve(lu_M, ipiv_M, -(tmp1 + tmp2))
            if info != 0:
                return -(k + 1)

            # effective system and right-hand side
            ab_H = a0 * ab_M + a1 * ab_A + ab_K
            band_matvec(ab_M, a0 * q + a2 * q_dot + a_n, tmp1)
            band_matvec(ab_A, a1 * q + q_dot, tmp2)
            lu_H, ipiv_H, info = _factor(ab_H)
            if info != 0:
                return -(k + 1)
            q_new, info = _solve(lu_H, ipiv_H, tmp1 + tmp2)
            if info != 0:
                return -(k + 1)

            q_ddot = a0 * (q_new - q) - a2 * q_dot - a_n
            q_dot = q_dot + (0.5 * dt) * (a_n + q_ddot)
            q = q_new

            if not np.all(np.isfinite(q)):
                return k + 1

            if (k + 1) % stride == 0:
                s = (k + 1) // stride
                out_Q[s] = q
                out_Qd[s] = q_dot
                out_Qdd[s] = q_ddot
            elif k + 1 == n_steps:
                out_Q[-1] = q
                out_Qd[-1] = q_dot
                out_Qdd[-1] = q_ddot
    return 0
