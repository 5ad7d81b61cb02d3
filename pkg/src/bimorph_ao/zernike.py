"""Zernike functions on the mirror disk and the Kolmogorov (Noll) covariance.

Indices 1..15 follow the ordering used throughout this package (radial
order 4 spherical term at index 9, the trefoil pair at 10/11).  Higher
indices continue with the standard Noll sequence.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.special import gamma

from . import _disk

DEFAULT_CAP = 15

# (n, m, kind) for the first fifteen modes
_TABLE = {
    1: (0, 0, "radial"),
    2: (1, 1, "cos"),
    3: (1, 1, "sin"),
    4: (2, 0, "radial"),
    5: (2, 2, "cos"),
    6: (2, 2, "sin"),
    7: (3, 1, "cos"),
    8: (3, 1, "sin"),
    9: (4, 0, "radial"),
    10: (3, 3, "cos"),
    11: (3, 3, "sin"),
    12: (4, 2, "cos"),
    13: (4, 2, "sin"),
    14: (4, 4, "cos"),
    15: (4, 4, "sin"),
}

NOLL_PREFACTOR = 7.19e-3


@dataclass(frozen=True)
class ZernikeMode:
    noll_index: int
    radial_order: int
    azimuthal_order: int
    angular_kind: str  # "cos", "sin" or "radial"

    def __post_init__(self):
        n, m = self.radial_order, self.azimuthal_order
        if n < 0 or m < 0 or m > n or (n - m) % 2:
            raise ValueError(f"invalid Zernike orders n={n}, m={m}")
        if (m == 0) != (self.angular_kind == "radial"):
            raise ValueError("angular_kind must be 'radial' exactly when m == 0")

    # duck-typed interface shared with plate modes (see _disk)
    @property
    def m(self):
        return self.azimuthal_order

    @property
    def kind(self):
        return self.angular_kind

    @property
    def norm_factor(self):
        n = self.radial_order
        return np.sqrt(n + 1.0) if self.m == 0 else np.sqrt(2.0 * (n + 1.0))

    def radial(self, x):
        """Normalized radial part at x = r / a."""
        return self.norm_factor * radial_polynomial(self.radial_order, self.m, x)


def radial_polynomial(n, m, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for s in range((n - m) // 2 + 1):
        c = (-1) ** s * factorial(n - s) / (
            factorial(s) * factorial((n + m) // 2 - s) * factorial((n - m) // 2 - s)
        )
        out = out + c * x ** (n - 2 * s)
    return out


def _standard_noll(i):
    n = 0
    while (n + 1) * (n + 2) // 2 < i:
        n += 1
    rem = i - n * (n + 1) // 2
    m = 2 * (rem // 2) if n % 2 == 0 else 2 * ((rem - 1) // 2) + 1
    if m == 0:
        return n, 0, "radial"
    return n, m, "cos" if i % 2 == 0 else "sin"


def noll_indices(i, cap=DEFAULT_CAP):
    """Return the ZernikeMode for index ``i`` (1-based, at most ``cap``)."""
    if not 1 <= i <= cap:
        raise ValueError(f"Zernike index {i} outside [1, {cap}]")
    n, m, kind = _TABLE[i] if i in _TABLE else _standard_noll(i)
    return ZernikeMode(i, n, m, kind)


def zernike_modes(first=4, last=DEFAULT_CAP):
    return [noll_indices(i, cap=max(last, DEFAULT_CAP)) for i in range(first, last + 1)]


def zernike_eval(mode, r, theta, a):
    """Evaluate Z_i(r, theta) on a disk of radius ``a``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > a * (1 + 1e-12)):
        raise ValueError("radius outside [0, a]")
    x = np.minimum(r / a, 1.0)
    return mode.radial(x) * _disk.trig(mode.m, mode.kind, theta)


def _correlated(mi, mj):
    if mi.m != mj.m:
        return False
    if mi.m != 0 and mi.kind != mj.kind:
        return False
    return (mi.radial_order + mj.radial_order - 2 * mi.m) % 2 == 0


def noll_covariance(mode_i, mode_j, D_over_r0):
    """E(phi_i phi_j) in rad^2 for Kolmogorov turbulence."""
    if mode_i.noll_index < 2 or mode_j.noll_index < 2:
        raise ValueError("piston has no finite Kolmogorov covariance")
    if not D_over_r0 > 0:
        raise ValueError("D_over_r0 must be positive")
    if not _correlated(mode_i, mode_j):
        return 0.0
    ni, nj = mode_i.radial_order, mode_j.radial_order
    sign = (-1) ** ((ni + nj - mode_i.m - mode_j.m) // 2)
    ratio = (
        gamma(14.0 / 3.0)
        * gamma((ni + nj - 5.0 / 3.0) / 2.0)
        / (
            gamma((ni - nj + 17.0 / 3.0) / 2.0)
            * gamma((nj - ni + 17.0 / 3.0) / 2.0)
            * gamma((ni + nj + 23.0 / 3.0) / 2.0)
        )
    )
    return (
        NOLL_PREFACTOR
        * sign
        * D_over_r0 ** (5.0 / 3.0)
        * np.sqrt((ni + 1.0) * (nj + 1.0))
        * np.pi ** (8.0 / 3.0)
        * ratio
    )


def covariance_matrix(modes, D_over_r0):
    k = len(modes)
    P = np.zeros((k, k))
    for a in range(k):
        for b in range(a, k):
            P[a, b] = P[b, a] = noll_covariance(modes[a], modes[b], D_over_r0)
    return P


def gram(modes_a, modes_b=None):
    """Area-averaged inner products between two Zernike/plate families."""
    modes_b = modes_a if modes_b is None else modes_b
    return np.array([[_disk.separable_inner(f, g) for g in modes_b] for f in modes_a])
