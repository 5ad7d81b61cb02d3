"""Pure-numpy fallback for the compiled kernels (same signatures)."""

import numpy as np


def propagate(Phi, eta, x0):
    steps, n = eta.shape
    X = np.empty((steps + 1, n))
    X[0] = x0
    for k in range(steps):
        X[k + 1] = Phi @ X[k] + eta[k]
    return X


def quadratic_norms(X, W):
    q = np.einsum("ki,ij,kj->k", X, W, X)
    return np.sqrt(np.clip(q, 0.0, None))
