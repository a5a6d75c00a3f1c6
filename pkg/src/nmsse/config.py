"""Run configuration shared by the steppers, the ensemble runner, and the CLI.

Time units: the system-bath coupling g is fixed to 1 internally; delta,
gamma, dt and t_final are expressed in units of g.  The initial system
state is always the excited state |e> tensored with the bath vacuum.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .grid import TimeGrid

MODES = ("exact", "master", "sse")
UNRAVELINGS = ("coherent", "quadrature", "heterodyne", "homodyne")
MARKOV_UNRAVELINGS = ("heterodyne", "homodyne")
VARIANTS = ("linear", "actual")
EMITS = ("ensemble", "trajectory", "both")

DEFAULT_DELTA = 2.0
DEFAULT_DT = 1e-4
DEFAULT_T_FINAL = 3.0
DEFAULT_N_TRAJ = 1000
DEFAULT_SEED = 0

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "MODES",
    "UNRAVELINGS",
    "MARKOV_UNRAVELINGS",
    "VARIANTS",
    "EMITS",
    "DEFAULT_DELTA",
    "DEFAULT_DT",
    "DEFAULT_T_FINAL",
    "DEFAULT_N_TRAJ",
    "DEFAULT_SEED",
]


class ConfigError(ValueError):
    """Invalid configuration; carries the name of the offending field."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully specified run.

    ``unraveling``/``variant`` apply to sse mode only and ``gamma`` to the
    Markov unravelings and master mode only; :meth:`validate` enforces the
    combinations.
    """

    mode: str = "sse"
    unraveling: str | None = "coherent"
    variant: str | None = "actual"
    g: float = 1.0
    delta: float = DEFAULT_DELTA
    gamma: float | None = None
    dt: float = DEFAULT_DT
    t_final: float = DEFAULT_T_FINAL
    n_traj: int = DEFAULT_N_TRAJ
    master_seed: int = DEFAULT_SEED
    output_path: str = "out.csv"
    emit: str = "ensemble"

    def validate(self) -> "ScenarioConfig":
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {MODES}, got {self.mode!r}")
        if not self.dt > 0:
            raise ConfigError("dt", f"must be positive, got {self.dt}")
        if self.t_final < self.dt:
            raise ConfigError("t_final", f"must be at least dt, got {self.t_final}")
        try:
            TimeGrid.from_duration(self.dt, self.t_final)
        except ValueError as exc:
            raise ConfigError("t_final", str(exc)) from None
        if self.n_traj < 1:
            raise ConfigError("n_traj", f"must be >= 1, got {self.n_traj}")
        if self.master_seed < 0:
            raise ConfigError("master_seed", "must be non-negative")
        if not self.g >= 0:
            raise ConfigError("g", f"must be >= 0, got {self.g}")
        if self.emit not in EMITS:
            raise ConfigError("emit", f"must be one of {EMITS}, got {self.emit!r}")
        if self.mode == "sse":
            if self.unraveling not in UNRAVELINGS:
                raise ConfigError(
                    "unraveling", f"must be one of {UNRAVELINGS}, got {self.unraveling!r}"
                )
            if self.variant not in VARIANTS:
                raise ConfigError("variant", f"must be one of {VARIANTS}, got {self.variant!r}")
            if self.unraveling in MARKOV_UNRAVELINGS:
                if self.gamma is None:
                    raise ConfigError(
                        "gamma", f"required for the {self.unraveling} unraveling"
                    )
                if not self.gamma > 0:
                    raise ConfigError("gamma", f"must be positive, got {self.gamma}")
            elif self.gamma is not None:
                raise ConfigError(
                    "gamma", f"only Markov unravelings take gamma, not {self.unraveling}"
                )
        elif self.mode == "master":
            if self.gamma is None:
                raise ConfigError("gamma", "required for master mode")
            if not self.gamma > 0:
                raise ConfigError("gamma", f"must be positive, got {self.gamma}")
            if self.unraveling is not None or self.variant is not None:
                raise ConfigError(
                    "unraveling" if self.unraveling is not None else "variant",
                    "not valid with mode=master",
                )
        else:  # exact
            for name in ("unraveling", "variant", "gamma"):
                if getattr(self, name) is not None:
                    raise ConfigError(name, "not valid with mode=exact")
        return self

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.from_duration(self.dt, self.t_final)

    @property
    def is_markov(self) -> bool:
        return self.unraveling in MARKOV_UNRAVELINGS

    def config_hash(self) -> str:
        payload = repr(
            (
                self.mode,
                self.unraveling,
                self.variant,
                self.g,
                self.delta,
                self.gamma,
                self.dt,
                self.t_final,
                self.n_traj,
                self.master_seed,
            )
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]
