# cython: language_level=3
"""Compiled time-stepping kernel.

Mirror of _newmark_py.run_loop: same banded layout, same LAPACK routines,
same accumulation order, so results agree with the reference kernel to
rounding noise.  Keep the two files in sync when touching either.
"""

import numpy as np

from scipy.linalg.cython_lapack cimport dgbtrf, dgbtrs
from libc.math cimport isfinite


cdef void band_matvec(double[:, ::1] ab, double[::1] x, double[::1] out):
    """out = A @ x, diagonal by diagonal in ascending offset order."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, j, j_lo, j_hi
    for j in range(n):
        out[j] = 0.0
    for k in range(-3, 4):
        j_lo = -k if k < 0 else 0
        j_hi = n - k if k > 0 else n
        for j in range(j_lo, j_hi):
            out[j + k] += ab[3 + k, j] * x[j]


def run_loop(double[:, ::1] ab_M, double[:, ::1] ab_C, double[:, ::1] ab_D,
             double[:, ::1] ab_Kb, double[:, ::1] ab_Ks,
             Py_ssize_t iL, double m_f, double T, double dt,
             double[::1] V_mid, double[::1] Vt_mid,
             double[::1] q_in, double[::1] q_dot_in, double[::1] q_ddot_in,
             Py_ssize_t stride,
             double[:, ::1] out_Q, double[:, ::1] out_Qd,
             double[:, ::1] out_Qdd):
    """Same contract as _newmark_py.run_loop."""
    cdef int n = <int> q_in.shape[0]
    cdef Py_ssize_t n_steps = V_mid.shape[0]
    cdef int kl = 3, ku = 3, ldab = 10, nrhs = 1, info = 0
    cdef char trans = b'N'

    cdef double a0 = 4.0 / (dt * dt)
    cdef double a1 = 2.0 / dt
    cdef double a2 = 4.0 / dt

    q = np.array(q_in, dtype=np.float64)
    q_dot = np.array(q_dot_in, dtype=np.float64)
    cdef double[::1] qv = q
    cdef double[::1] qdv = q_dot

    # scratch storage
    A_band = np.empty((7, n))
    K_band = np.empty((7, n))
    cdef double[:, ::1] Ab = A_band
    cdef double[:, ::1] Kb = K_band
    Mf_arr = np.zeros((10, n), order="F")
    Hf_arr = np.empty((10, n), order="F")
    cdef double[::1, :] Mf = Mf_arr
    cdef double[::1, :] Hf = Hf_arr
    ipiv_M_arr = np.empty(n, dtype=np.int32)
    ipiv_H_arr = np.empty(n, dtype=np.int32)
    cdef int[::1] ipiv_M = ipiv_M_arr
    cdef int[::1] ipiv_H = ipiv_H_arr
    cdef double[::1] tmp1 = np.empty(n)
    cdef double[::1] tmp2 = np.empty(n)
    cdef double[::1] a_n = np.empty(n)
    cdef double[::1] vec = np.empty(n)
    cdef double[::1] q_new = np.empty(n)
    cdef double[::1] q_ddot = np.empty(n)

    cdef Py_ssize_t k, i, r, s
    cdef double V, Vt, twofV, fourfV, sT, sVt

    # factor the constant mass matrix once
    for r in range(7):
        for i in range(n):
            Mf[3 + r, i] = ab_M[r, i]
    dgbtrf(&n, &n, &kl, &ku, &Mf[0, 0], &ldab, &ipiv_M[0], &info)
    if info != 0:
        return -1

    for k in range(n_steps):
        V = V_mid[k]
        Vt = Vt_mid[k]
        twofV = 2.0 * m_f * V
        fourfV = 2.0 * twofV
        sT = T - twofV * V
        sVt = 2.0 * m_f * Vt

        # midpoint-frozen operator bands
        for r in range(7):
            for i in range(n):
                Ab[r, i] = ab_C[r, i] + fourfV * ab_D[r, i]
                Kb[r, i] = ab_Kb[r, i] + sT * ab_Ks[r, i] + sVt * ab_D[r, i]
        Ab[3, iL] -= twofV

        # M a_n = -(A q_dot + K q) with the prefactored mass matrix
        band_matvec(Ab, qdv, tmp1)
        band_matvec(Kb, qv, tmp2)
        for i in range(n):
            a_n[i] = -(tmp1[i] + tmp2[i])
        dgbtrs(&trans, &n, &kl, &ku, &nrhs, &Mf[0, 0], &ldab, &ipiv_M[0],
               &a_n[0], &n, &info)
        if info != 0:
            return -(k + 1)

        # effective system and right-hand side
        for r in range(7):
            for i in range(n):
                Hf[3 + r, i] = a0 * ab_M[r, i] + a1 * Ab[r, i] + Kb[r, i]
            if r < 3:
                for i in range(n):
                    Hf[r, i] = 0.0
        for i in range(n):
            vec[i] = a0 * qv[i] + a2 * qdv[i] + a_n[i]
        band_matvec(ab_M, vec, tmp1)
        for i in range(n):
            vec[i] = a1 * qv[i] + qdv[i]
        band_matvec(Ab, vec, tmp2)
        for i in range(n):
            q_new[i] = tmp1[i] + tmp2[i]
        dgbtrf(&n, &n, &kl, &ku, &Hf[0, 0], &ldab, &ipiv_H[0], &info)
        if info != 0:
            return -(k + 1)
        dgbtrs(&trans, &n, &kl, &ku, &nrhs, &Hf[0, 0], &ldab, &ipiv_H[0],
               &q_new[0], &n, &info)
        if info != 0:
            return -(k + 1)

        for i in range(n):
            q_ddot[i] = a0 * (q_new[i] - qv[i]) - a2 * qdv[i] - a_n[i]
        for i in range(n):
            qdv[i] = qdv[i] + (0.5 * dt) * (a_n[i] + q_ddot[i])
        for i in range(n):
            qv[i] = q_new[i]

        for i in range(n):
            if not isfinite(qv[i]):
                return k + 1

        if (k + 1) % stride == 0:
            s = (k + 1) // stride
            for i in range(n):
                out_Q[s, i] = qv[i]
                out_Qd[s, i] = qdv[i]
                out_Qdd[s, i] = q_ddot[i]
        elif k + 1 == n_steps:
            s = out_Q.shape[0] - 1
            for i in range(n):
                out_Q[s, i] = qv[i]
                out_Qd[s, i] = qdv[i]
                out_Qdd[s, i] = q_ddot[i]
    return 0
