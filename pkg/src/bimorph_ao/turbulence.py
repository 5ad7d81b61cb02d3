"""Turbulent phase as a first-order Markov shaping filter phi' = F phi + G w."""

from dataclasses import dataclass

import numpy as np

from . import zernike
from .kernels import propagate, noise_factor


@dataclass(frozen=True)
class TurbulenceModel:
    modes: tuple
    F: np.ndarray
    G: np.ndarray
    P_inf: np.ndarray
    V_over_D: float
    D_over_r0: float

    @property
    def size(self):
        return len(self.modes)

    def lyapunov_residual(self):
        """||F P + P F^T + G G^T||_F / ||P||_F."""
        R = self.F @ self.P_inf + self.P_inf @ self.F.T + self.G @ self.G.T
        return np.linalg.norm(R) / np.linalg.norm(self.P_inf)


def cutoff_frequency(n, V_over_D):
    """Temporal cut-off (Hz) of a Zernike coefficient of radial order n."""
    if not V_over_D > 0:
        raise ValueError("V_over_D must be positive")
    if n < 0:
        raise ValueError("radial order must be nonnegative")
    return 0.3 * (n + 1) * V_over_D


def build_F(modes, V_over_D):
    if any(m.noll_index < 4 for m in modes):
        raise ValueError("piston, tip and tilt are not part of the turbulence model")
    return np.diag([-2.0 * np.pi * cutoff_frequency(m.radial_order, V_over_D) for m in modes])


def build_G(F, P_inf, tol=1e-10):
    """Symmetric square root of -(F P + P F^T)."""
    F = np.asarray(F, dtype=float)
    P = np.asarray(P_inf, dtype=float)
    rhs = -(F @ P + P @ F.T)
    rhs = 0.5 * (rhs + rhs.T)
    w, V = np.linalg.eigh(rhs)
    floor = -tol * max(abs(np.trace(rhs)), np.finfo(float).tiny)
    if w.min() < floor:
        raise ValueError(f"Lyapunov right-hand side is indefinite (min eigenvalue {w.min():.3e})")
    G = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return 0.5 * (G + G.T)


def build_model(n_zernike=15, V_over_D=90.0, D_over_r0=8.0):
    modes = tuple(zernike.zernike_modes(4, n_zernike))
    F = build_F(modes, V_over_D)
    P = zernike.covariance_matrix(modes, D_over_r0)
    return TurbulenceModel(modes, F, build_G(F, P), P, float(V_over_D), float(D_over_r0))


def discretize(F, GGt, dt):
    """Transition and per-step noise covariance for a diagonal drift."""
    f = np.diag(F)
    s = f[:, None] + f[None, :]
    # int_0^dt exp(s t) dt = (exp(s dt) - 1) / s, with the s -> 0 limit dt
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(s != 0.0, np.expm1(s * dt) / s, dt)
    return np.diag(np.exp(f * dt)), GGt * frac


def sample_path(model, dt, steps, seed, phi0=None):
    """Exact-discretization sample path, shape (steps + 1, n_modes).

    phi(0) ~ N(0, P_inf) unless ``phi0`` is given.
    """
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError("dt must be finite and positive")
    if not (np.all(np.isfinite(model.F)) and np.all(np.isfinite(model.G))):
        raise ValueError("model matrices must be finite")
    rng = np.random.default_rng(seed)
    Phi, Qd = discretize(model.F, model.G @ model.G.T, dt)
    if phi0 is None:
        phi0 = noise_factor(model.P_inf) @ rng.standard_normal(model.size)
    eta = rng.standard_normal((steps, model.size)) @ noise_factor(Qd).T
    return propagate(Phi, eta, np.asarray(phi0, dtype=float))


def to_csv_rows(model, path, dt):
    header = ["t"] + [f"phi_{m.noll_index}" for m in model.modes]
    rows = [[k * dt, *row] for k, row in enumerate(path)]
    return header, rows
