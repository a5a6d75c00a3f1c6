"""Uniform time grids shared by kernels, noise paths, steppers, and oracles."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True, eq=True)
class TimeGrid:
    """Uniform grid t_i = i * dt for i = 0 .. n_points - 1.

    dt is a global run parameter: every component of a run (noise paths,
    memory-kernel tables, the ansatz solution, steppers, oracles) shares one
    grid, and nothing interpolates between grids.
    """

    dt: float
    n_points: int

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_points < 1:
            raise ValueError(f"n_points must be >= 1, got {self.n_points}")

    @classmethod
    def from_duration(cls, dt: float, t_final: float) -> "TimeGrid":
        """Grid covering [0, t_final] with step dt; t_final must be a multiple of dt."""
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        n_steps = int(round(t_final / dt))
        if n_steps < 1 or abs(n_steps * dt - t_final) > 1e-9 * max(1.0, abs(t_final)):
            raise ValueError(f"t_final={t_final} is not a positive multiple of dt={dt}")
        return cls(dt=dt, n_points=n_steps + 1)

    @property
    def n_steps(self) -> int:
        return self.n_points - 1

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt

    @cached_property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_points, dtype=float) * self.dt
        t.flags.writeable = False
        return t
