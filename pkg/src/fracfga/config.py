"""Run configuration and its JSON form."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .symbols import KineticModel, PotentialModel, SymbolSet

__all__ = ["RunConfig", "ConfigError", "EXAMPLES", "CONFIG_KEYS"]


class ConfigError(ValueError):
    pass


# per-example defaults: domain, potential, final time
EXAMPLES = {
    "Ex1D": {"dim": 1, "box": ((0.0, 2.0),), "potential": ("Cosine1D", ()), "t_final": 0.25},
    "Ex2D": {"dim": 2, "box": ((0.0, 2.0), (0.0, 2.0)), "potential": ("Harmonic2DShifted", (1.0, 1.0)),
             "t_final": 0.25},
}

CONFIG_KEYS = ("example", "eps_pow", "alpha", "delta_exponent", "delta", "t_final", "dt_fga",
               "dt_ref", "dq_factor", "prune_tol", "output_dir", "potential", "potential_params",
               "cutoff", "omega", "workers")


@dataclass(frozen=True)
class RunConfig:
    """All knobs of one FGA-vs-reference run.

    ``eps = 2**-eps_pow``.  The regularization is ``delta = eps**delta_exponent``
    unless ``delta`` is given explicitly.  ``dt_ref`` defaults to ``eps**2``
    and the x-grid spacing is ``eps``.
    """

    example: str = "Ex1D"
    eps_pow: int = 6
    alpha: float = 1.5
    delta_exponent: float = 1.0
    delta: Optional[float] = None
    t_final: Optional[float] = None
    dt_fga: float = 1e-2
    dt_ref: Optional[float] = None
    dq_factor: float = 0.5
    prune_tol: float = 1e-7
    output_dir: str = "out"
    potential: Optional[str] = None
    potential_params: Optional[Tuple[float, ...]] = None
    cutoff: str = "MassThreshold"
    omega: float = 0.0
    workers: Optional[int] = None

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ConfigError(f"unknown example {self.example!r}; choose from {sorted(EXAMPLES)}")
        if not (1.0 < self.alpha <= 2.0):
            raise ConfigError(f"alpha must lie in (1, 2], got {self.alpha}")
        if int(self.eps_pow) != self.eps_pow or self.eps_pow < 1:
            raise ConfigError("eps_pow must be a positive integer (eps = 2**-eps_pow)")
        if self.t_final is not None and not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        for name in ("dt_fga", "dt_ref", "dq_factor"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be non-negative")
        if self.potential_params is not None:
            object.__setattr__(self, "potential_params", tuple(self.potential_params))

    @property
    def eps(self) -> float:
        return 2.0 ** (-int(self.eps_pow))

    @property
    def dim(self) -> int:
        return EXAMPLES[self.example]["dim"]

    @property
    def box(self):
        return EXAMPLES[self.example]["box"]

    @property
    def delta_value(self) -> float:
        if self.delta is not None:
            return float(self.delta)
        return self.eps ** self.delta_exponent

    @property
    def final_time(self) -> float:
        return self.t_final if self.t_final is not None else EXAMPLES[self.example]["t_final"]

    @property
    def ref_dt(self) -> float:
        return self.dt_ref if self.dt_ref is not None else self.eps ** 2

    def potential_model(self) -> PotentialModel:
        name, params = EXAMPLES[self.example]["potential"]
        if self.potential is not None:
            name = self.potential
            params = ()
        if self.potential_params is not None:
            params = self.potential_params
        return PotentialModel(kind=name, parameters=tuple(params), dim=self.dim)

    def symbols(self) -> SymbolSet:
        return SymbolSet(KineticModel(self.alpha, self.delta_value), self.potential_model())

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def reference_key(self) -> str:
        """Hash of every setting the reference solution depends on (alpha included)."""
        payload = {"example": self.example, "eps_pow": self.eps_pow, "alpha": self.alpha,
                   "t_final": self.final_time, "dt_ref": self.ref_dt,
                   "potential": self.potential_model().kind,
                   "potential_params": list(self.potential_model().parameters)}
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
