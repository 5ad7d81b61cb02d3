"""Run configuration: one JSON document, command-line flags override it."""

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .plate_modes import PhysicalParams

CONFIG_VERSION = 1

# bench values; the shaping filter is parameterized by V/D directly
TABLE_WIND_SPEED = 9.0
TABLE_PUPIL_DIAMETER = 1e-2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams = field(default_factory=PhysicalParams)
    n_zernike: int = 15
    n_basis: int = 18
    n_shapes: int = 10
    k_max: int = 5
    V_over_D: float = 90.0
    D_over_r0: float = 8.0
    gamma_lo: float = 1e-3
    gamma_hi: float = 10.0
    gamma_tol: float = 1e-3
    gamma_cap: float = 1e8
    dt: float = 1e-4
    duration: float = 2.0
    burn_in: float = 0.2
    runs: int = 50
    seed: int = 0
    workers: int = 1
    out: str = "out"

    def __post_init__(self):
        positive = ("V_over_D", "D_over_r0", "gamma_lo", "gamma_hi", "gamma_tol",
                    "gamma_cap", "dt", "duration")
        for name in positive:
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        for name in ("n_zernike", "n_basis", "n_shapes", "runs", "workers"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.n_zernike < 4:
            raise ConfigError("n_zernike must be at least 4")
        if self.k_max < 0:
            raise ConfigError("k_max must be nonnegative")
        if not 0 <= self.burn_in < self.duration:
            raise ConfigError("burn_in must lie in [0, duration)")
        if self.gamma_lo >= self.gamma_hi:
            raise ConfigError("gamma_lo must be below gamma_hi")
        if self.gamma_tol >= 1:
            raise ConfigError("gamma_tol is relative and must be < 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")

    def to_dict(self):
        d = asdict(self)
        d["version"] = CONFIG_VERSION
        return d

    def echo(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def from_dict(doc):
    doc = dict(doc)
    version = doc.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    params = doc.pop("params", {}) or {}
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    pknown = {f.name for f in fields(PhysicalParams)}
    if set(params) - pknown:
        raise ConfigError(f"unknown params keys: {sorted(set(params) - pknown)}")
    try:
        return RunConfig(params=PhysicalParams(**params), **doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load(path=None, **overrides):
    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = from_dict(doc)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    try:
        return replace(cfg, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
