"""Output-feedback H-infinity synthesis by two coupled Riccati equations.

The central controller is

    p' = M p + N y,   u = L p   (R = 0)

with M = A + (g^-2 B1 B1^T - B2 B2^T) P - Q (I - g^-2 P Q)^-1 C2^T C2,
N = -Q (I - g^-2 P Q)^-1 C2^T and L = B2^T P, for the normalized problem
D12^T D12 = I, D21 D21^T = I, D12^T C1 = 0, B1 D21^T = 0.  Plants with
non-identity D12/D21 Gram matrices are normalized by input/output scaling
before synthesis and the controller is mapped back afterwards.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

AXIS_TOL = 1e-8
COND_MAX = 1e10
RESIDUAL_TOL = 1e-8
COUPLING_MARGIN = 1e-9


class SynthesisError(RuntimeError):
    """Synthesis inputs violate the regular-problem assumptions."""


class InfeasibleError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class RiccatiCertificate:
    P: np.ndarray
    closed_matrix: np.ndarray
    residual_norm: float
    stable: bool
    feasible: bool = True
    reason: str = ""
    condition: float = float("nan")
    axis_distance: float = float("nan")

    @classmethod
    def infeasible(cls, reason, condition=float("nan")):
        return cls(None, None, float("inf"), False, False, reason, condition)

    def summary(self):
        return dict(feasible=self.feasible, stable=self.stable, reason=self.reason,
                    residual=self.residual_norm, condition=self.condition,
                    axis_distance=self.axis_distance)


def riccati_residual(A, R, Qm, X):
    """Relative Frobenius residual of A^T X + X A + X R X + Qm = 0."""
    terms = (A.T @ X, X @ A, X @ R @ X, Qm)
    res = terms[0] + terms[1] + terms[2] + terms[3]
    scale = max(sum(np.linalg.norm(t) for t in terms), np.finfo(float).tiny)
    return np.linalg.norm(res) / scale


def spectral_abscissa(M):
    return float(np.max(np.linalg.eigvals(M).real))


def solve_game_riccati(A, B1, B2, C1, gamma, method="real"):
    """Stabilizing X >= 0 of A^T X + X A + X (g^-2 B1 B1^T - B2 B2^T) X + C1^T C1 = 0.

    Uses the stable invariant subspace of the Hamiltonian from an ordered
    Schur form.  ``method`` picks the real or the complex Schur route.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    R = np.asarray(B1) @ np.asarray(B1).T / gamma**2 - np.asarray(B2) @ np.asarray(B2).T
    Qm = np.asarray(C1).T @ np.asarray(C1)
    H = np.block([[A, R], [-Qm, -A.T]])
    hnorm = max(np.linalg.norm(H, 1), 1.0)
    try:
        if method == "complex":
            T, Z, sdim = linalg.schur(H.astype(complex), output="complex", sort="lhp")
            eig = np.diag(T)
        else:
            T, Z, sdim = linalg.schur(H, output="real", sort="lhp")
            eig = linalg.eigvals(T)
    except (linalg.LinAlgError, ValueError) as exc:
        # reordering breaks down when eigenvalues crowd the imaginary axis
        return RiccatiCertificate.infeasible(f"Schur reordering failed: {exc}")
    axis = float(np.min(np.abs(eig.real))) / hnorm
    if axis < AXIS_TOL:
        cert = RiccatiCertificate.infeasible("Hamiltonian has eigenvalues on the imaginary axis")
        cert.axis_distance = axis
        return cert
    if sdim != n:
        return RiccatiCertificate.infeasible(f"stable subspace has dimension {sdim} != {n}")
    U11, U21 = Z[:n, :n], Z[n:, :n]
    cond = np.linalg.cond(U11)
    if not np.isfinite(cond) or cond > COND_MAX:
        return RiccatiCertificate.infeasible("stable subspace is not a graph (U11 singular)", cond)
    X = np.linalg.solve(U11.T, U21.T).T
    if method == "complex":
        X = X.real
    X = 0.5 * (X + X.T)
    w = np.linalg.eigvalsh(X)
    if w.min() < -1e-10 * max(abs(w).max(), 1e-300):
        return RiccatiCertificate.infeasible("stabilizing solution is not nonnegative definite", cond)
    closed = A + R @ X
    resid = riccati_residual(A, R, Qm, X)
    return RiccatiCertificate(X, closed, resid, spectral_abscissa(closed) < 0, True, "", cond, axis)


def solve_dual_riccati(A, B1, C1, C2, gamma, method="real"):
    """Stabilizing Y >= 0 of A Y + Y A^T + Y (g^-2 C1^T C1 - C2^T C2) Y + B1 B1^T = 0."""
    cert = solve_game_riccati(np.asarray(A).T, np.asarray(C1).T, np.asarray(C2).T,
                              np.asarray(B1).T, gamma, method)
    if cert.feasible:
        cert.P = cert.P.T
    return cert


def coupling_check(P, Q, gamma):
    rho = float(np.max(np.abs(np.linalg.eigvals(P @ Q)))) if P.size else 0.0
    return dict(rho=rho, ok=bool(rho < gamma**2 * (1 - COUPLING_MARGIN)))


@dataclass
class HinfController:
    M: np.ndarray
    N: np.ndarray
    L: np.ndarray
    R: np.ndarray
    gamma: float
    certs: dict = field(default_factory=dict)

    @property
    def order(self):
        return self.M.shape[0]

    def to_json(self):
        doc = dict(
            schema="bimorph_ao.controller",
            version=1,
            gamma=float(self.gamma),
            M=_rows(self.M), N=_rows(self.N), L=_rows(self.L), R=_rows(self.R),
            residuals=_jsonable(self.certs),
        )
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("schema") != "bimorph_ao.controller":
            raise ValueError("not a controller document")
        mats = {k: np.array(doc[k], dtype=float) for k in "MNLR"}
        return cls(**mats, gamma=doc["gamma"], certs=doc.get("residuals", {}))


def _rows(M):
    return [[float(v) for v in row] for row in np.asarray(M)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _inv_sqrt(S):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    if w.min() <= 0:
        raise SynthesisError("D12^T D12 and D21 D21^T must be positive definite")
    return (V / np.sqrt(w)) @ V.T


def normalize(plant, tol=1e-12):
    """Scaled matrices of the regular problem plus the maps back.

    Returns (A, B1, B2, C1, C2, Su, Sy, T) where the original controller is
    u = Su u', y' = Sy y, and the state is x = T x' (T diagonal).
    """
    D12, D21 = plant.D12, plant.D21
    scale = plant.state_scale if plant.state_scale is not None else np.ones(plant.order)
    T = np.asarray(scale, dtype=float)
    A = plant.A * (T[None, :] / T[:, None])
    B1 = plant.B1 / T[:, None]
    B2 = plant.B2 / T[:, None]
    C1 = plant.C1 * T[None, :]
    C2 = plant.C2 * T[None, :]
    cross12 = np.linalg.norm(D12.T @ C1) / max(np.linalg.norm(C1), 1.0)
    cross21 = np.linalg.norm(B1 @ D21.T) / max(np.linalg.norm(B1), 1.0)
    if cross12 > tol or cross21 > tol:
        raise SynthesisError(
            f"non-orthogonal plant: |D12^T C1|={cross12:.2e}, |B1 D21^T|={cross21:.2e}")
    Su = _inv_sqrt(D12.T @ D12)
    Sy = _inv_sqrt(D21 @ D21.T)
    return A, B1, B2 @ Su, C1, Sy @ C2, Su, Sy, T


def check_gamma(plant, gamma, method="real"):
    """Evaluate the three solvability conditions at one gamma.

    Returns (ok, diagnostics, (P, Q)) in the scaled coordinates.
    """
    A, B1, B2, C1, C2, _, _, _ = normalize(plant)
    X = solve_game_riccati(A, B1, B2, C1, gamma, method)
    Y = solve_dual_riccati(A, B1, C1, C2, gamma, method)
    diag = {"gamma": float(gamma), "i": X.summary(), "ii": Y.summary()}
    ok = X.feasible and Y.feasible and X.stable and Y.stable
    ok = ok and X.residual_norm <= RESIDUAL_TOL and Y.residual_norm <= RESIDUAL_TOL
    if X.feasible and Y.feasible:
        cc = coupling_check(X.P, Y.P, gamma)
        diag["iii"] = cc
        ok = ok and cc["ok"]
    else:
        diag["iii"] = dict(rho=float("nan"), ok=False)
    diag["ok"] = bool(ok)
    # close to the axis threshold the verdict is numerically fragile
    diag["marginal"] = bool(min(X.axis_distance, Y.axis_distance) < 100 * AXIS_TOL)
    return ok, diag, (X, Y)


def failing_conditions(diag):
    names = {"i": "(i) control Riccati", "ii": "(ii) filter Riccati", "iii": "(iii) r(PQ) < gamma^2"}
    out = []
    for key in ("i", "ii"):
        d = diag[key]
        if not (d["feasible"] and d["stable"] and d["residual"] <= RESIDUAL_TOL):
            out.append(f"{names[key]}: {d['reason'] or 'unstable or inaccurate'}")
    if not diag["iii"]["ok"]:
        out.append(f"{names['iii']}: rho={diag['iii']['rho']:.4g}")
    return out


def central_controller(plant, P, Q, gamma):
    """Central controller from certificates in the plant's scaled coordinates."""
    A, B1, B2, C1, C2, Su, Sy, T = normalize(plant)
    g2 = gamma**-2
    Z = np.eye(A.shape[0]) - g2 * P @ Q
    if np.linalg.cond(Z) > 1e14:
        raise InfeasibleError("I - g^-2 P Q is singular (coupling margin violated)")
    QZ = Q @ np.linalg.inv(Z)
    Ms = A + (g2 * B1 @ B1.T - B2 @ B2.T) @ P - QZ @ C2.T @ C2
    Ns = -QZ @ C2.T
    Ls = B2.T @ P
    # back to physical coordinates: p = T p', y' = Sy y, u = Su u'
    M = Ms * (T[:, None] / T[None, :])
    N = (Ns @ Sy) * T[:, None]
    L = Su @ (Ls / T[None, :])
    R = np.zeros((plant.B2.shape[1], plant.C2.shape[0]))
    K = HinfController(M, N, L, R, float(gamma))
    a = spectral_abscissa(closed_loop(plant, K, scaled=True)[0])
    if not a < 0:
        raise SynthesisError(f"closed loop is not stable (spectral abscissa {a:.3e})")
    K.certs["closed_loop_abscissa"] = a
    return K


def synthesize(plant, gamma, method="real"):
    ok, diag, (X, Y) = check_gamma(plant, gamma, method)
    if not ok:
        raise InfeasibleError(
            f"gamma={gamma:.6g} infeasible: " + "; ".join(failing_conditions(diag)), diag)
    K = central_controller(plant, X.P, Y.P, gamma)
    K.certs.update(P_residual=X.residual_norm, Q_residual=Y.residual_norm,
                   rho_PQ=diag["iii"]["rho"], P_condition=X.condition, Q_condition=Y.condition)
    K.certs["_P"], K.certs["_Q"] = X.P, Y.P
    return K


def gamma_bisect(plant, gamma_lo, gamma_hi, tol=1e-3, cap=1e8, method="real"):
    """Smallest feasible gamma (relative tolerance ``tol``) and its controller."""
    if not 0 < gamma_lo < gamma_hi:
        raise ValueError("need 0 < gamma_lo < gamma_hi")
    hi = gamma_hi
    ok, diag, _ = check_gamma(plant, hi, method)
    while not ok:
        if hi * 2 > cap:
            raise InfeasibleError(
                f"infeasible up to gamma cap {cap:.3g}: " + "; ".join(failing_conditions(diag)), diag)
        hi *= 2
        ok, diag, _ = check_gamma(plant, hi, method)
    lo = gamma_lo
    if check_gamma(plant, lo, method)[0]:
        hi = lo
    history = []
    while hi - lo > tol * hi:
        mid = np.sqrt(lo * hi) if lo > 0 else 0.5 * hi
        ok_mid = check_gamma(plant, mid, method)[0]
        history.append((float(mid), bool(ok_mid)))
        if ok_mid:
            hi = mid
        else:
            lo = mid
    K = synthesize(plant, hi, method)
    K.certs["bisection"] = dict(lower=float(lo), upper=float(hi), probes=len(history))
    return dict(gamma=float(hi), controller=K, lower=float(lo), history=history)


def closed_loop(plant, K, scaled=False):
    """(A, B, C, D) of the loop from w to z; state (x, p).

    With ``scaled`` the plant and controller states are both expressed in
    the plant's conditioning coordinates (same transfer function).
    """
    A, B1, B2, C1, C2 = plant.A, plant.B1, plant.B2, plant.C1, plant.C2
    M, N, L, R = K.M, K.N, K.L, K.R
    D21, D12 = plant.D21, plant.D12
    if R.any():
        raise ValueError("only strictly proper controllers (R = 0) are supported")
    if scaled and plant.state_scale is not None and K.order == plant.order:
        T = np.asarray(plant.state_scale, dtype=float)
        A = A * (T[None, :] / T[:, None])
        B1, B2, C1, C2 = B1 / T[:, None], B2 / T[:, None], C1 * T[None, :], C2 * T[None, :]
        M = M * (T[None, :] / T[:, None])
        N = N / T[:, None]
        L = L * T[None, :]
    Acl = np.block([[A, B2 @ L], [N @ C2, M]])
    Bcl = np.vstack([B1, N @ D21])
    Ccl = np.hstack([C1, D12 @ L])
    Dcl = np.zeros((C1.shape[0], B1.shape[1]))
    return Acl, Bcl, Ccl, Dcl


def sigma_max(A, B, C, D, omega):
    n = A.shape[0]
    G = C @ np.linalg.solve(1j * omega * np.eye(n) - A, B) + D
    return float(np.linalg.svd(G, compute_uv=False)[0])


def _hamiltonian(A, B, C, D, gamma):
    m = B.shape[1]
    Rinv = np.linalg.inv(gamma**2 * np.eye(m) - D.T @ D)
    Ah = A + B @ Rinv @ D.T @ C
    p = C.shape[0]
    return np.block([
        [Ah, B @ Rinv @ B.T],
        [-C.T @ (np.eye(p) + D @ Rinv @ D.T) @ C, -Ah.T],
    ])


def hinf_norm(A, B, C, D, tol=1e-4, return_frequency=False):
    """L2 gain of a stable system by the two-step Hamiltonian iteration.

    Each pass takes gamma slightly above the best lower bound, finds the
    imaginary-axis eigenvalues of the Hamiltonian and re-evaluates sigma_max
    at interval midpoints; stops when no crossing frequency remains.
    """
    A, B, C, D = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, C, D))
    n = A.shape[0]
    if n == 0:
        val = float(np.linalg.norm(D, 2))
        return (val, 0.0) if return_frequency else val
    poles = np.linalg.eigvals(A)
    if np.max(poles.real) >= 0:
        raise ValueError("system is not stable")
    cands = [0.0] + list(np.abs(poles.imag))
    span = np.abs(poles)
    cands += list(np.geomspace(max(span.min(), 1e-6) / 10, span.max() * 10, 60))
    vals = [sigma_max(A, B, C, D, w) for w in cands]
    k = int(np.argmax(vals))
    lb, w_best = max(vals[k], float(np.linalg.norm(D, 2))), cands[k]
    if lb == 0.0:
        return (0.0, 0.0) if return_frequency else 0.0
    for _ in range(60):
        gamma = (1 + 2 * tol) * lb
        ev = np.linalg.eigvals(_hamiltonian(A, B, C, D, gamma))
        scale = max(np.abs(ev).max(), 1.0)
        on_axis = np.sort(np.unique(np.round(
            np.abs(ev[np.abs(ev.real) < 1e-7 * scale].imag), 12)))
        if on_axis.size == 0:
            break
        pts = list(on_axis)
        mids = [0.5 * (a + b) for a, b in zip(pts[:-1], pts[1:])] + pts
        vals = [sigma_max(A, B, C, D, w) for w in mids]
        k = int(np.argmax(vals))
        if vals[k] <= lb * (1 + 1e-12):
            break
        lb, w_best = vals[k], mids[k]
    return (lb, w_best) if return_frequency else lb


def closed_loop_hinf_norm(plant, K, tol=1e-4):
    A, B, C, D = closed_loop(plant, K, scaled=True)
    if spectral_abscissa(A) >= 0:
        raise ValueError("closed loop is unstable")
    return hinf_norm(A, B, C, D, tol)
