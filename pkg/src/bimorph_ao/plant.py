"""Truncated standard plant (P) for the bimorph mirror loop.

State  x = (e, de/dt, phi): plate coefficients (m), their rates (m/s) and
       the turbulent Zernike coefficients (rad).
Noise  w = (w_mod, w_SH, w_tur, w_pe), sizes (N_B, N_B, N_Z, N_B).
Output z = (phi_res, u), y = (y_pe, y_SH); phases are expressed in the
       plate basis, hence N_B rows each.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import _disk, plate_modes
from .discretize import held_input
from .kernels import propagate

MATRIX_NAMES = ("A", "B1", "B2", "C1", "D12", "C2", "D21")
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class StandardPlant:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    D12: np.ndarray
    C2: np.ndarray
    D21: np.ndarray
    n_b: int
    n_z: int
    # diagonal state scaling used to condition synthesis (x = scale * x_scaled)
    state_scale: np.ndarray = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.B1.shape[0] != n or self.B2.shape[0] != n:
            raise ValueError("B1/B2 row count must equal the state dimension")
        if self.C1.shape[1] != n or self.C2.shape[1] != n:
            raise ValueError("C1/C2 column count must equal the state dimension")
        if self.D12.shape != (self.C1.shape[0], self.B2.shape[1]):
            raise ValueError("D12 shape mismatch")
        if self.D21.shape != (self.C2.shape[0], self.B1.shape[1]):
            raise ValueError("D21 shape mismatch")
        for name in MATRIX_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def order(self):
        return self.A.shape[0]

    def matrices(self):
        return {name: getattr(self, name) for name in MATRIX_NAMES}

    def slices(self):
        nb, nz = self.n_b, self.n_z
        return dict(e=slice(0, nb), v=slice(nb, 2 * nb), phi=slice(2 * nb, 2 * nb + nz))

    def noise_slices(self):
        nb, nz = self.n_b, self.n_z
        return dict(mod=slice(0, nb), sh=slice(nb, 2 * nb),
                    tur=slice(2 * nb, 2 * nb + nz), pe=slice(2 * nb + nz, 3 * nb + nz))


def build_projection(zernikes, basis, a=None, check=True):
    """Q[i, j] = <Z_j, B_i> (area-averaged), shape (N_B, N_Z).

    Both families live on the same disk, so ``a`` only has to be positive.
    """
    if a is not None and not a > 0:
        raise ValueError("disk radius must be positive")
    Q = np.array([[_disk.separable_inner(z, b) for z in zernikes] for b in basis])
    if check:
        fine = np.array(
            [[_disk.separable_inner(z, b, n_radial=96) for z in zernikes] for b in basis]
        )
        err = np.max(np.abs(fine - Q), initial=0.0)
        if err > 1e-8:
            raise RuntimeError(f"projection quadrature not converged (refinement delta {err:.2e})")
    return Q


def assemble_plant(params, basis, turb, projQ):
    nb, nz = len(basis), turb.size
    if projQ.shape != (nb, nz):
        raise ValueError(f"projection shape {projQ.shape} != ({nb}, {nz})")
    omega_sq = np.array([params.omega_sq(b.lambda_kj) for b in basis])
    lap = plate_modes.laplacian_gram(basis, params.a)
    k_opt = 4.0 * np.pi / params.lambda_light
    I, Zb = np.eye(nb), np.zeros((nb, nb))
    Zbz, Zzb = np.zeros((nb, nz)), np.zeros((nz, nb))

    A = np.block([[Zb, I, Zbz], [-np.diag(omega_sq), Zb, Zbz], [Zzb, Zzb, turb.F]])
    B1 = np.block([
        [Zb, Zb, Zbz, Zb],
        [params.b_weight * I, Zb, Zbz, Zb],
        [Zzb, Zzb, turb.G, Zzb],
    ])
    # the Laplacian of the actuator field, projected back onto the basis
    B2 = np.vstack([Zb, params.d31_tilde / params.rho * lap.T, Zzb])
    optical = np.hstack([-k_opt * I, Zb, projQ])
    C1 = np.vstack([optical, np.zeros((nb, 2 * nb + nz))])
    D12 = np.vstack([Zb, I])
    C2 = np.vstack([np.hstack([params.e31_tilde * lap.T, Zb, Zbz]), optical])
    D21 = np.block([
        [Zb, Zb, Zbz, params.d_weight * I],
        [Zb, params.c_weight * I, Zbz, Zb],
    ])
    scale = np.concatenate([
        np.full(nb, 1.0 / k_opt),
        np.sqrt(omega_sq) / k_opt,
        np.ones(nz),
    ])
    extras = dict(
        omega_sq=omega_sq,
        projection=projQ,
        laplacian_gram=lap,
        basis_gram=plate_modes.gram_matrix(basis),
        optical_gain=k_opt,
    )
    return StandardPlant(A, B1, B2, C1, D12, C2, D21, nb, nz, scale, extras)


def build_default_plant(params=None, n_shapes=10, k_max=5, n_zernike=15, V_over_D=90.0,
                        D_over_r0=8.0, n_basis=None):
    """Plate basis, turbulence model and plant for the given configuration."""
    from . import turbulence

    params = params or plate_modes.PhysicalParams()
    shapes = plate_modes.solve_mode_shapes(params.nu, k_max, n_shapes, params=params)
    basis = plate_modes.expand_basis(shapes)
    if n_basis is not None:
        if n_basis > len(basis):
            raise ValueError(f"N_B={n_basis} exceeds the {len(basis)} basis functions available")
        basis = basis[:n_basis]
    turb = turbulence.build_model(n_zernike, V_over_D, D_over_r0)
    Q = build_projection(turb.modes, basis, params.a)
    return assemble_plant(params, basis, turb, Q), basis, turb


def open_loop_response(plant, u_series, w_series, dt, x0=None):
    """Step (P) with inputs held constant over each interval of length dt."""
    u = np.asarray(u_series, dtype=float)
    w = np.asarray(w_series, dtype=float)
    if len(u) != len(w):
        raise ValueError("u and w series must have equal length")
    if not (dt > 0 and np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
        raise ValueError("need dt > 0 and finite inputs")
    B = np.hstack([plant.B2, plant.B1])
    Phi, Gam = held_input(plant.A, B, dt)
    x0 = np.zeros(plant.order) if x0 is None else np.asarray(x0, dtype=float)
    X = propagate(Phi, np.hstack([u, w]) @ Gam.T, x0)[:-1]
    z = X @ plant.C1.T + u @ plant.D12.T
    y = X @ plant.C2.T + w @ plant.D21.T
    return dict(x=X, y=y, z=z)


def _rows(M):
    return [[float(v) for v in row] for row in np.asarray(M)]


def plant_to_json(plant, params=None):
    doc = dict(
        schema="bimorph_ao.plant",
        version=SCHEMA_VERSION,
        dims=dict(n_b=plant.n_b, n_z=plant.n_z, n_x=plant.order,
                  n_w=plant.B1.shape[1], n_u=plant.B2.shape[1],
                  n_z_out=plant.C1.shape[0], n_y=plant.C2.shape[0]),
        matrices={name: _rows(M) for name, M in plant.matrices().items()},
        state_scale=None if plant.state_scale is None else [float(v) for v in plant.state_scale],
    )
    if "basis_gram" in plant.extras:
        doc["basis_gram"] = _rows(plant.extras["basis_gram"])
    if params is not None:
        doc["params"] = {k: float(v) for k, v in vars(params).items()}
    return json.dumps(doc, sort_keys=True, indent=1)


def plant_from_json(text):
    doc = json.loads(text)
    if doc.get("schema") != "bimorph_ao.plant":
        raise ValueError("not a plant document")
    mats = {k: np.array(v, dtype=float).reshape(len(v), -1) for k, v in doc["matrices"].items()}
    n_x = doc["dims"]["n_x"]
    for k, M in mats.items():
        if M.size == 0:
            mats[k] = M.reshape(0, n_x)
    scale = doc.get("state_scale")
    extras = {}
    if "basis_gram" in doc:
        extras["basis_gram"] = np.array(doc["basis_gram"], dtype=float)
    return StandardPlant(**mats, n_b=doc["dims"]["n_b"], n_z=doc["dims"]["n_z"],
                         state_scale=None if scale is None else np.array(scale), extras=extras)
