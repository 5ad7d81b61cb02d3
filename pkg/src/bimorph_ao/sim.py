"""Stochastic closed-loop simulation and phase-attenuation statistics."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .discretize import white_noise
from .hinf import closed_loop, spectral_abscissa
from .kernels import noise_factor, propagate, quadratic_norms

CHANNELS = ("mod", "sh", "tur", "pe")


class SimulationError(RuntimeError):
    pass


@dataclass
class SimResult:
    t: np.ndarray
    phi_tur_norm: np.ndarray
    phi_res_norm: np.ndarray
    u_norm: np.ndarray
    phi_res_rss: np.ndarray
    attenuation_ratio: float
    seed: int


@dataclass
class LoopSystem:
    """Autonomous closed loop in conditioning coordinates with output weights."""

    A: np.ndarray
    B: np.ndarray
    W_tur: np.ndarray
    W_res: np.ndarray
    W_res_rss: np.ndarray
    W_u: np.ndarray
    phi: slice
    P_inf: np.ndarray


def turbulence_covariance(plant):
    sl = plant.slices()["phi"]
    F = plant.A[sl, sl]
    G = plant.B1[sl, plant.noise_slices()["tur"]]
    P = solve_continuous_lyapunov(F, -G @ G.T)
    return 0.5 * (P + P.T)


def build_loop(plant, controller=None, channels=CHANNELS):
    """Closed loop (or the bare plant when ``controller`` is None).

    ``channels`` selects which noise groups drive the loop.
    """
    mask = np.zeros(plant.B1.shape[1])
    ns = plant.noise_slices()
    for ch in channels:
        if ch not in ns:
            raise ValueError(f"unknown noise channel {ch!r}")
        mask[ns[ch]] = 1.0
    T = plant.state_scale if plant.state_scale is not None else np.ones(plant.order)
    n = plant.order
    if controller is None:
        A = plant.A * (T[None, :] / T[:, None])
        B = plant.B1 / T[:, None]
        L = np.zeros((plant.B2.shape[1], 0))
        ncl = n
    else:
        A, B, _, _ = closed_loop(plant, controller, scaled=True)
        L = controller.L * T[None, :] if controller.order == n else controller.L
        ncl = A.shape[0]
    B = B * mask[None, :]
    sl = plant.slices()
    optical = plant.C1[: plant.n_b] * T[None, :]
    gram = plant.extras.get("basis_gram", np.eye(plant.n_b))
    pad = np.zeros((plant.n_b, ncl - n))
    Copt = np.hstack([optical, pad])
    W_res = Copt.T @ gram @ Copt
    W_rss = Copt.T @ Copt
    W_tur = np.zeros((ncl, ncl))
    W_tur[sl["phi"], sl["phi"]] = np.eye(plant.n_z)
    Lfull = np.hstack([np.zeros((L.shape[0], ncl - L.shape[1])), L])
    W_u = Lfull.T @ Lfull
    return LoopSystem(A, B, W_tur, W_res, W_rss, W_u, sl["phi"], turbulence_covariance(plant))


def _discretized(loop, dt, marginal_ok=False):
    a = spectral_abscissa(loop.A)
    # the uncontrolled mirror is undamped: allow a zero abscissa there
    limit = 1e-9 * np.linalg.norm(loop.A, 1) if marginal_ok else 0.0
    if not a < limit or (not marginal_ok and a == 0.0):
        raise SimulationError(f"closed loop is unstable (spectral abscissa {a:.3e})")
    Phi, Qd = white_noise(loop.A, loop.B @ loop.B.T, dt)
    return Phi, noise_factor(Qd)


def _simulate(loop, Phi, Lq, dt, steps, burn, seed, x0):
    rng = np.random.default_rng(seed)
    n = loop.A.shape[0]
    if x0 is None:
        x0 = np.zeros(n)
        x0[loop.phi] = noise_factor(loop.P_inf) @ rng.standard_normal(loop.P_inf.shape[0])
    eta = rng.standard_normal((steps, n)) @ Lq.T
    X = propagate(Phi, eta, x0)[burn:]
    if not np.all(np.isfinite(X)):
        bad = burn + int(np.argmax(~np.all(np.isfinite(X), axis=1)))
        raise SimulationError(f"non-finite state at step {bad}")
    t = dt * np.arange(burn, steps + 1)
    tur = quadratic_norms(X, loop.W_tur)
    res = quadratic_norms(X, loop.W_res)
    return SimResult(
        t=t,
        phi_tur_norm=tur,
        phi_res_norm=res,
        u_norm=quadratic_norms(X, loop.W_u),
        phi_res_rss=quadratic_norms(X, loop.W_res_rss),
        attenuation_ratio=float(np.mean(tur) / np.mean(res)),
        seed=seed,
    )


def _grid(dt, duration, burn_in):
    if not (dt > 0 and duration > 0 and 0 <= burn_in < duration):
        raise ValueError("need dt > 0, duration > 0 and 0 <= burn_in < duration")
    return int(round(duration / dt)), int(round(burn_in / dt))


def run_closed_loop(plant, controller, dt=1e-4, duration=2.0, seed=0, burn_in=0.2,
                    channels=CHANNELS, x0=None):
    """One stochastic run; phi(0) ~ N(0, P_inf), mirror and controller at rest."""
    steps, burn = _grid(dt, duration, burn_in)
    loop = build_loop(plant, controller, channels)
    Phi, Lq = _discretized(loop, dt, marginal_ok=controller is None)
    return _simulate(loop, Phi, Lq, dt, steps, burn, seed, x0)


def monte_carlo(plant, controller, runs=50, dt=1e-4, duration=2.0, base_seed=0,
                burn_in=0.2, channels=CHANNELS, workers=1):
    """Independent runs with seeds base_seed + k; deterministic aggregation."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    steps, burn = _grid(dt, duration, burn_in)
    loop = build_loop(plant, controller, channels)
    Phi, Lq = _discretized(loop, dt, marginal_ok=controller is None)
    seeds = [base_seed + k for k in range(runs)]

    def one(seed):
        try:
            r = _simulate(loop, Phi, Lq, dt, steps, burn, seed, None)
            return seed, r, None
        except SimulationError as exc:
            return seed, None, str(exc)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(one, seeds))
    else:
        out = [one(s) for s in seeds]
    out.sort(key=lambda item: item[0])
    ok = [(s, r) for s, r, err in out if err is None]
    failures = {s: err for s, _, err in out if err is not None}
    ratios = [r.attenuation_ratio for _, r in ok]
    summary = dict(
        runs=runs,
        seeds=[s for s, _ in ok],
        ratios=ratios,
        failures=failures,
        mean_tur=[float(np.mean(r.phi_tur_norm)) for _, r in ok],
        mean_res=[float(np.mean(r.phi_res_norm)) for _, r in ok],
        ms_tur=[float(np.mean(r.phi_tur_norm**2)) for _, r in ok],
        ms_res=[float(np.mean(r.phi_res_norm**2)) for _, r in ok],
    )
    summary.update(_mean_stderr(ratios))
    return summary


def _mean_stderr(values):
    k = len(values)
    if k == 0:
        return dict(mean=float("nan"), stderr=float("nan"))
    mean = math.fsum(values) / k
    if k == 1:
        return dict(mean=mean, stderr=float("nan"))
    var = math.fsum((v - mean) ** 2 for v in values) / (k - 1)
    return dict(mean=mean, stderr=math.sqrt(var / k))


def steady_state_variance(loop):
    """Stationary covariance and mean-square norms of the closed loop."""
    a = spectral_abscissa(loop.A)
    if not a < 0:
        raise SimulationError(f"closed loop is unstable (spectral abscissa {a:.3e})")
    S = solve_continuous_lyapunov(loop.A, -loop.B @ loop.B.T)
    S = 0.5 * (S + S.T)
    return dict(
        covariance=S,
        ms_tur=float(np.sum(loop.W_tur * S)),
        ms_res=float(np.sum(loop.W_res * S)),
        ms_res_rss=float(np.sum(loop.W_res_rss * S)),
        ms_u=float(np.sum(loop.W_u * S)),
        phi_cov=S[loop.phi, loop.phi],
    )
