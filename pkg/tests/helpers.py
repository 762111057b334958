"""Shared helpers for the test suite."""

import numpy as np
from scipy.linalg import eigh

from pipeflex.fem import assemble_constant_matrices, build_space, eval_field


class DofIC:
    """Initial-condition shape backed by a discrete coefficient vector.

    Lets tests start a simulation from an exactly representable field
    (e.g. a discrete eigenmode), so projection introduces no
    interpolation noise on top of what we mean to measure.
    """

    def __init__(self, space, vec):
        self.space = space
        self.vec = np.asarray(vec, dtype=float)

    def eval(self, x, L):
        return (eval_field(self.space, self.vec, x),
                eval_field(self.space, self.vec, x, deriv=1))


def first_eigenmode(params, V0, n_elements, amplitude=0.1):
    """First generalized eigenvector of (K_bend + (T - 2 m_f V0^2) Ks, M).

    Returns (space, vec) with the mode scaled so its largest nodal
    displacement is `amplitude`.
    """
    space = build_space(n_elements, params.L)
    mats = assemble_constant_matrices(space, params)
    K = mats.K_bend + (params.T - 2.0 * params.m_f * V0 * V0) * mats.K_string_unit
    _, vecs = eigh(K, mats.M)
    vec = vecs[:, 0].copy()
    w_nodes = vec[1::2]
    vec *= amplitude / np.max(np.abs(w_nodes))
    return space, vec
