"""Quadrature on the unit disk for separable functions R(x) * trig(k theta)."""

from functools import lru_cache

import numpy as np

RADIAL_NODES = 64
AZIMUTHAL_NODES = 256


@lru_cache(maxsize=8)
def radial_rule(n=RADIAL_NODES):
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=8)
def azimuthal_rule(n=AZIMUTHAL_NODES):
    """Uniform azimuthal nodes; exact for trigonometric degree < n."""
    theta = 2.0 * np.pi * np.arange(n) / n
    return theta, np.full(n, 2.0 * np.pi / n)


def angular_overlap(m1, kind1, m2, kind2):
    """Closed-form integral over [0, 2pi) of trig_1(m1 t) * trig_2(m2 t).

    ``kind`` is ``"cos"``, ``"sin"`` or ``"radial"`` (the constant 1, m = 0).
    """
    if m1 != m2:
        return 0.0
    if m1 == 0:
        # radial-only functions are the cos(0 t) = 1 case
        return 2.0 * np.pi
    k1 = "cos" if kind1 == "radial" else kind1
    k2 = "cos" if kind2 == "radial" else kind2
    return np.pi if k1 == k2 else 0.0


def trig(m, kind, theta):
    theta = np.asarray(theta, dtype=float)
    if m == 0 or kind == "radial":
        return np.ones_like(theta)
    if kind == "cos":
        return np.cos(m * theta)
    return np.sin(m * theta)


def separable_inner(f, g, n_radial=RADIAL_NODES):
    """Area-averaged inner product (1 / pi) int_{unit disk} f g dA.

    ``f`` and ``g`` expose ``radial(x)``, ``m`` and ``kind``.  The angular
    integral is done analytically, the radial one by Gauss-Legendre.
    """
    ang = angular_overlap(f.m, f.kind, g.m, g.kind)
    if ang == 0.0:
        return 0.0
    x, w = radial_rule(n_radial)
    return ang / np.pi * float(np.sum(w * x * f.radial(x) * g.radial(x)))


def disk_grid(n_radial=RADIAL_NODES, n_azimuthal=AZIMUTHAL_NODES):
    """Tensor grid (x, theta, weight) on the unit disk; weights sum to 1.

    Weights include the Jacobian and the 1/pi factor so that
    ``sum(w * f * g)`` is the area-averaged inner product.
    """
    x, wx = radial_rule(n_radial)
    t, wt = azimuthal_rule(n_azimuthal)
    X, T = np.meshgrid(x, t, indexing="ij")
    W = np.outer(wx * x, wt) / np.pi
    return X, T, W
