"""Backend selection for the time-stepping kernels.

The Cython extension is used when it was built; otherwise the numpy
implementation is used.  Set ``BIMORPH_AO_PURE_PYTHON=1`` to force the
fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("BIMORPH_AO_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def propagate(Phi, eta, x0, backend=None):
    impl = _kernels_py if backend == "python" else _impl
    eta = _c(eta)
    if eta.ndim != 2 or Phi.shape != (eta.shape[1], eta.shape[1]):
        raise ValueError("shape mismatch between transition matrix and noise")
    return impl.propagate(_c(Phi), eta, _c(x0))


def quadratic_norms(X, W, backend=None):
    impl = _kernels_py if backend == "python" else _impl
    return impl.quadratic_norms(_c(X), _c(W))


def noise_factor(S):
    """Square-root factor L with L L^T = S for a symmetric PSD S."""
    S = 0.5 * (np.asarray(S, dtype=float) + np.asarray(S, dtype=float).T)
    w, V = np.linalg.eigh(S)
    return V * np.sqrt(np.clip(w, 0.0, None))
