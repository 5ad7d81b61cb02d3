# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for linear time stepping."""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()


def propagate(double[:, ::1] Phi, double[:, ::1] eta, double[::1] x0):
    """x[k+1] = Phi x[k] + eta[k]; returns x[0..steps] as (steps+1, n)."""
    cdef Py_ssize_t steps = eta.shape[0]
    cdef int n = <int>Phi.shape[0]
    cdef int one = 1
    cdef double alpha = 1.0, beta = 1.0
    cdef char trans = b"T"  # row-major Phi is Phi^T to column-major BLAS
    cdef Py_ssize_t k, i
    out = np.empty((steps + 1, n), dtype=np.float64)
    cdef double[:, ::1] X = out
    for i in range(n):
        X[0, i] = x0[i]
    if n == 0:
        return out
    with nogil:
        for k in range(steps):
            for i in range(n):
                X[k + 1, i] = eta[k, i]
            dgemv(&trans, &n, &n, &alpha, &Phi[0, 0], &n, &X[k, 0], &one, &beta, &X[k + 1, 0], &one)
    return out


def quadratic_norms(double[:, ::1] X, double[:, ::1] W):
    """sqrt(x_k^T W x_k) for every row of X (W symmetric PSD)."""
    cdef Py_ssize_t steps = X.shape[0]
    cdef Py_ssize_t n = X.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double acc, row
    out = np.empty(steps, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for k in range(steps):
            acc = 0.0
            for i in range(n):
                row = 0.0
                for j in range(n):
                    row = row + W[i, j] * X[k, j]
                acc = acc + X[k, i] * row
            res[k] = acc if acc > 0.0 else 0.0
    return np.sqrt(out)
