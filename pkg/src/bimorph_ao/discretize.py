"""Exact discretization of x' = A x + B w for white or held inputs."""

import numpy as np
from scipy.linalg import expm


def _substeps(A, dt):
    nrm = np.linalg.norm(A, 1) * dt
    return max(0, int(np.ceil(np.log2(nrm))) + 1) if nrm > 0.5 else 0


def white_noise(A, BBt, dt):
    """Transition e^{A dt} and Q = int_0^dt e^{As} B B^T e^{A^T s} ds.

    Van Loan's block exponential on a substep h = dt / 2^s small enough
    that ||A|| h <= 1/2, then doubled: Q(2h) = Q(h) + Phi(h) Q(h) Phi(h)^T.
    Stiff stable modes therefore never enter through e^{-A dt}.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    s = _substeps(A, dt)
    h = dt / 2**s
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -A
    M[:n, n:] = BBt
    M[n:, n:] = A.T
    E = expm(M * h)
    Phi = E[n:, n:].T
    Q = Phi @ E[:n, n:]
    for _ in range(s):
        Q = Q + Phi @ Q @ Phi.T
        Phi = Phi @ Phi
    return Phi, 0.5 * (Q + Q.T)


def held_input(A, B, dt):
    """Transition and input matrix for piecewise-constant inputs."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = expm(M * dt)
    return E[:n, :n], E[:n, n:]
