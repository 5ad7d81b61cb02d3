"""Free-edge circular plate eigenmodes R(x) = a_kj (J_k(lx) + c_kj I_k(lx)).

Radii are normalized by the mirror radius (x = r / a).  Modes are
normalized to unit area-averaged L2 norm, ``(1 / pi a^2) int B^2 dA = 1``,
which is the same convention as the Zernike functions.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import iv, ivp, jv, jvp

from . import _disk


@dataclass(frozen=True)
class PhysicalParams:
    """Mirror, piezo and optical constants (SI units).

    Defaults are the laboratory bench values; disturbance weights are the
    per-mode scalars replicated along a diagonal.
    """

    rho: float = 16.3
    Q1: float = 84.0
    Q2: float = 11.25e8
    nu: float = 0.2
    a: float = 25e-3
    d31_tilde: float = -0.0044
    e31_tilde: float = -5.60e3
    lambda_light: float = 550e-9
    b_weight: float = 0.001
    c_weight: float = 0.002
    d_weight: float = 0.003

    def __post_init__(self):
        for name in ("rho", "Q1", "Q2", "a", "lambda_light"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if not 0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in (0, 0.5), got {self.nu}")
        for name in ("d31_tilde", "e31_tilde", "b_weight", "c_weight", "d_weight"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for name in ("b_weight", "c_weight", "d_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def omega_sq(self, lam):
        return self.Q1 / self.rho * (lam / self.a) ** 4 + self.Q2 / self.rho


@dataclass(frozen=True)
class PlateMode:
    k: int
    j: int
    parity: str  # "cos" or "sin"
    lambda_kj: float
    c_kj: float
    a_kj: float
    omega_sq: float = field(default=float("nan"))

    def __post_init__(self):
        if self.parity not in ("cos", "sin"):
            raise ValueError(f"parity must be 'cos' or 'sin', got {self.parity!r}")
        if self.parity == "sin" and self.k == 0:
            raise ValueError("M_0j is identically zero")

    @property
    def m(self):
        return self.k

    @property
    def kind(self):
        return "radial" if self.k == 0 else self.parity

    def radial(self, x):
        lx = self.lambda_kj * np.asarray(x, dtype=float)
        return self.a_kj * (jv(self.k, lx) + self.c_kj * iv(self.k, lx))

    def radial_laplacian(self, x):
        """Radial part of the Laplacian in normalized radius (multiply by 1/a^2)."""
        lx = self.lambda_kj * np.asarray(x, dtype=float)
        return self.a_kj * self.lambda_kj**2 * (-jv(self.k, lx) + self.c_kj * iv(self.k, lx))


class RootFindingError(RuntimeError):
    pass


def _edge_rows(k, lam, nu):
    """Free-edge conditions at x = 1 applied to J_k(lam x) and I_k(lam x).

    Returns ((moment_J, moment_I), (shear_J, shear_I)).  The shear uses the
    Kirchhoff effective shear, whose angular term carries d^2/dtheta^2.
    """
    k2 = k * k
    J, Jp, Jpp = jv(k, lam), lam * jvp(k, lam), lam**2 * jvp(k, lam, 2)
    I, Ip, Ipp = iv(k, lam), lam * ivp(k, lam), lam**2 * ivp(k, lam, 2)
    mJ = Jpp + nu * (Jp - k2 * J)
    mI = Ipp + nu * (Ip - k2 * I)
    # d/dr of the Laplacian: -lam^2 J' and +lam^2 I'
    vJ = -(lam**2) * Jp - (1 - nu) * k2 * (Jp - J)
    vI = lam**2 * Ip - (1 - nu) * k2 * (Ip - I)
    return (mJ, mI), (vJ, vI)


def characteristic(k, lam, nu):
    """Free-edge determinant, scaled by I_k(lam)^2 to keep it O(1)."""
    (mJ, mI), (vJ, vI) = _edge_rows(k, lam, nu)
    return (mJ * vI - mI * vJ) / iv(k, lam) ** 2


def mixing_coefficient(k, lam, nu):
    (mJ, mI), _ = _edge_rows(k, lam, nu)
    return -mJ / mI


def boundary_residuals(shape, nu):
    """Moment and shear residuals at the rim, relative to max |R''| on [0, 1]."""
    k, lam, c = shape.k, shape.lambda_kj, shape.c_kj
    (mJ, mI), (vJ, vI) = _edge_rows(k, lam, nu)
    x = np.linspace(0.0, 1.0, 401)
    Rpp = lam**2 * (jvp(k, lam * x, 2) + c * ivp(k, lam * x, 2))
    scale = np.max(np.abs(Rpp))
    return abs(mJ + c * mI) / scale, abs(vJ + c * vI) / scale


def find_roots(k, nu, lam_min=0.5, lam_max=12.0, step=0.05):
    """All roots of the characteristic determinant in (lam_min, lam_max]."""
    grid = np.arange(lam_min, lam_max + 0.5 * step, step)
    vals = np.array([characteristic(k, g, nu) for g in grid])
    roots = []
    for lo, hi, flo, fhi in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if flo == 0.0:
            roots.append(float(lo))
            continue
        if np.sign(flo) == np.sign(fhi):
            continue
        try:
            roots.append(brentq(lambda lam: characteristic(k, lam, nu), lo, hi, xtol=1e-13, rtol=1e-15))
        except (ValueError, RuntimeError) as exc:
            raise RootFindingError(f"k={k}: root polish failed in [{lo:.3f}, {hi:.3f}]") from exc
    return roots


def normalization(k, lam, c):
    """a_kj such that the mode has unit area-averaged L2 norm."""
    x, w = _disk.radial_rule()
    R = jv(k, lam * x) + c * iv(k, lam * x)
    ang = 2.0 if k == 0 else 1.0  # int trig^2 / pi
    return 1.0 / np.sqrt(ang * np.sum(w * x * R * R))


def solve_mode_shapes(nu=0.2, k_max=5, count=10, params=None, lam_max=12.0, step=0.05):
    """Lowest ``count`` elastic free-edge shapes with azimuthal order <= k_max.

    ``j`` counts nodal circles, so it includes the rigid-body roots at
    lambda = 0 (piston for k = 0, tilt for k = 1) that are themselves
    excluded from the result.
    """
    if count < 1 or k_max < 0:
        raise ValueError("need count >= 1 and k_max >= 0")
    if not 0 < nu < 0.5:
        raise ValueError("Poisson ratio must lie in (0, 0.5)")
    shapes = []
    for k in range(k_max + 1):
        offset = 1 if k <= 1 else 0
        for rank, lam in enumerate(find_roots(k, nu, lam_max=lam_max, step=step)):
            c = mixing_coefficient(k, lam, nu)
            omega_sq = params.omega_sq(lam) if params is not None else float("nan")
            shapes.append(PlateMode(k, rank + offset, "cos", lam, c, normalization(k, lam, c), omega_sq))
    shapes.sort(key=lambda s: s.lambda_kj)
    if len(shapes) < count:
        raise RootFindingError(
            f"only {len(shapes)} roots below lambda={lam_max}, {count} requested"
        )
    return shapes[:count]


def with_frequencies(shapes, params):
    return [replace(s, omega_sq=params.omega_sq(s.lambda_kj)) for s in shapes]


def expand_basis(shapes):
    """Cosine/sine basis B_n in order of increasing lambda (M_0j dropped)."""
    basis = []
    for s in sorted(shapes, key=lambda s: s.lambda_kj):
        basis.append(replace(s, parity="cos"))
        if s.k >= 1:
            basis.append(replace(s, parity="sin"))
    return basis


def _check_radius(r, a):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > a * (1 + 1e-12)):
        raise ValueError("radius outside [0, a]")
    return np.minimum(r / a, 1.0)


def mode_eval(mode, r, theta, a):
    x = _check_radius(r, a)
    return mode.radial(x) * _disk.trig(mode.k, mode.kind, theta)


def mode_laplacian_eval(mode, r, theta, a):
    x = _check_radius(r, a)
    return mode.radial_laplacian(x) / a**2 * _disk.trig(mode.k, mode.kind, theta)


def gram_matrix(basis):
    if not basis:
        raise ValueError("empty basis")
    n = len(basis)
    G = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            G[i, j] = G[j, i] = _disk.separable_inner(basis[i], basis[j])
    return G


class _Laplacian:
    def __init__(self, mode):
        self.mode = mode
        self.m, self.kind = mode.m, mode.kind

    def radial(self, x):
        return self.mode.radial_laplacian(x)


def laplacian_gram(basis, a):
    """Matrix L[i, j] = <Delta B_i, B_j> in m^-2 (area-averaged)."""
    return np.array(
        [[_disk.separable_inner(_Laplacian(bi), bj) for bj in basis] for bi in basis]
    ) / a**2


def to_rows(shapes):
    """Plain dict rows for CSV/JSON export."""
    return [
        dict(k=s.k, j=s.j, parity=s.parity, lambda_kj=s.lambda_kj, c_kj=s.c_kj,
             a_kj=s.a_kj, omega_sq=s.omega_sq)
        for s in shapes
    ]
