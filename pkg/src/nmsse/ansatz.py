"""Scalar ansatz closure for the memory-integral functional derivative.

The functional derivative of the conditioned state with respect to the
noise is closed by the scalar form O = f(t, s) * L, which collapses the
memory integral into a single function

    F(t) = int_0^t kernel(t - s) f(t, s) ds,      f(t, t) = 1.

For the two-mode bath F splits as F = F1 + F_-1 with the coupled
Riccati-type equations

    F1'   = g^2 - i delta F1   + F1  (F1 + F_-1)
    F_-1' = g^2 + i delta F_-1 + F_-1 (F1 + F_-1)

and F(0) = F1(0) = F_-1(0) = 0.  The closure is noise-independent, so one
solve per run configuration is shared read-only by every trajectory.  The
equations can reach a finite-time pole (they do for delta = 0 before
t = 3/g), hence the explicit divergence guard: blowing up must fail the
run loudly instead of silently flooding the steppers with NaNs.

Integration is fixed-step RK4: F multiplies every trajectory, so its
error has to sit well below the Euler error of the steppers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import BathConfig, memory_kernel
from .grid import TimeGrid

__all__ = ["AnsatzSolution", "AnsatzDivergenceError", "solve_ansatz", "kernel_equivalence_check"]


class AnsatzDivergenceError(RuntimeError):
    """Raised when |F(t)| crosses the configured blow-up bound."""


@dataclass(frozen=True)
class AnsatzSolution:
    """F, F1 and F_-1 on the run grid (F = F1 + F_-1 exactly)."""

    grid: TimeGrid
    f_total: np.ndarray
    f_plus: np.ndarray
    f_minus: np.ndarray

    def __post_init__(self) -> None:
        for name in ("f_total", "f_plus", "f_minus"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != (self.grid.n_points,):
                raise ValueError(f"{name} length must equal the grid length")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def _riccati_rhs(g2: float, delta: float, f1: complex, fm: complex):
    tot = f1 + fm
    return (g2 - 1j * delta * f1 + f1 * tot, g2 + 1j * delta * fm + fm * tot)


def solve_ansatz(
    g: float, delta: float, grid: TimeGrid, max_abs: float | None = None
) -> AnsatzSolution:
    """Integrate the closure equations with RK4; guard against blow-up.

    ``max_abs`` bounds |F(t)|; the default is 1e6 * g.
    """
    if max_abs is None:
        max_abs = 1e6 * g
    dt = grid.dt
    half = dt / 2.0
    sixth = dt / 6.0
    g2 = g * g
    f1, fm = 0j, 0j
    f_plus = np.empty(grid.n_points, dtype=complex)
    f_minus = np.empty(grid.n_points, dtype=complex)
    f_plus[0] = f1
    f_minus[0] = fm
    for i in range(grid.n_steps):
        a1, b1 = _riccati_rhs(g2, delta, f1, fm)
        a2, b2 = _riccati_rhs(g2, delta, f1 + half * a1, fm + half * b1)
        a3, b3 = _riccati_rhs(g2, delta, f1 + half * a2, fm + half * b2)
        a4, b4 = _riccati_rhs(g2, delta, f1 + dt * a3, fm + dt * b3)
        f1 = f1 + sixth * (a1 + 2 * a2 + 2 * a3 + a4)
        fm = fm + sixth * (b1 + 2 * b2 + 2 * b3 + b4)
        if abs(f1 + fm) > max_abs:
            raise AnsatzDivergenceError(
                f"|F(t)| exceeded {max_abs:g} at t = {(i + 1) * dt:g}; "
                "the closure has a finite-time pole for this configuration"
            )
        f_plus[i + 1] = f1
        f_minus[i + 1] = fm
    return AnsatzSolution(grid, f_plus + f_minus, f_plus, f_minus)


def kernel_equivalence_check(bath: BathConfig, grid: TimeGrid, tol: float = 1e-12) -> bool:
    """True iff the complex kernel equals its symmetric cosine form on the grid.

    Guards the quadrature stepper's reuse of the coherent closure: the two
    unravelings share F(t) exactly when alpha(tau) = beta(tau).
    """
    times = grid.times
    alpha = np.zeros(times.shape, dtype=complex)
    for m in bath.modes:
        alpha = alpha + (m.coupling * m.coupling) * np.exp(-1j * m.detuning * times)
    # pair representatives: the stored (+k) member for symmetric baths, else
    # the positive-detuning modes (the cosine form is undefined otherwise)
    reps = bath.modes[0::2] if bath.symmetric_pairs else tuple(
        m for m in bath.modes if m.detuning > 0
    )
    beta = np.zeros(times.shape)
    for m in reps:
        beta = beta + (2.0 * m.coupling * m.coupling) * np.cos(m.detuning * times)
    scale = max(1.0, float(np.abs(alpha).max()))
    return bool(np.abs(alpha - beta).max() <= tol * scale)
