"""System models, the exactly solvable two-mode benchmark, and oracle integrators.

The benchmark system is a two-level atom with lowering operator
sigma = |b><e| and zero Hamiltonian, coupled with equal strength g to one
symmetric pair of modes detuned by +/- delta.  With the bath initially in
vacuum the combined state stays inside a four-amplitude sector

    |Psi> = c1 |b00> + c2 |e00> + c3 |b01> + c4 |b10>,

whose Schrodinger equation is integrated here with a fixed-step
fourth-order method.  That closed solution, together with the Lindblad
master-equation integrator for the Markov limit, provides the reference
curves every stochastic ensemble is checked against; both oracles are
deliberately higher order than the Euler trajectory steppers so their
error is negligible in the comparison.

Bloch components follow the standard pseudo-spin convention
rho = (I + x sigma_x + y sigma_y + z sigma_z) / 2 with basis order
(e, b), i.e. x = 2 Re(C_e C_b*), y = -2 Im(C_e C_b*), z = |C_e|^2 - |C_b|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import TimeGrid

__all__ = [
    "SystemModel",
    "SystemState",
    "ExactAmplitudes",
    "BlochVector",
    "BlochSeries",
    "DensityMatrix",
    "exact_evolve",
    "exact_bloch_series",
    "reduced_density_from_exact",
    "bloch_from_exact",
    "bloch_from_state",
    "lindblad_evolve",
    "lindblad_bloch_series",
]


@dataclass(frozen=True)
class SystemModel:
    """Dense system model: Hamiltonian H and a single coupling operator L."""

    hamiltonian: np.ndarray
    lindblad: np.ndarray

    def __post_init__(self) -> None:
        ham = np.array(self.hamiltonian, dtype=complex)
        lind = np.array(self.lindblad, dtype=complex)
        if ham.ndim != 2 or ham.shape[0] != ham.shape[1]:
            raise ValueError("hamiltonian must be square")
        if lind.shape != ham.shape:
            raise ValueError("lindblad shape must match the hamiltonian")
        scale = np.abs(ham).max()
        if np.abs(ham - ham.conj().T).max() > 1e-12 * max(scale, 1e-300):
            raise ValueError("hamiltonian is not Hermitian")
        ham.flags.writeable = False
        lind.flags.writeable = False
        object.__setattr__(self, "hamiltonian", ham)
        object.__setattr__(self, "lindblad", lind)

    @classmethod
    def tla(cls) -> "SystemModel":
        """Two-level atom: H = 0, L = sigma = |b><e| in basis order (e, b)."""
        return cls(hamiltonian=np.zeros((2, 2)), lindblad=np.array([[0, 0], [1, 0]]))

    @property
    def dimension(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def lindblad_x(self) -> np.ndarray:
        """L_x = L + L^dag (computed, not stored)."""
        return self.lindblad + self.lindblad.conj().T

    @property
    def hamiltonian_is_zero(self) -> bool:
        return not self.hamiltonian.any()


@dataclass(frozen=True)
class SystemState:
    """Conditioned system state vector; unnormalized in linear mode."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1:
            raise ValueError("amplitudes must be a flat vector")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    def norm_sq(self) -> float:
        a = self.amplitudes
        return float((a.real * a.real + a.imag * a.imag).sum())


@dataclass(frozen=True)
class ExactAmplitudes:
    """Combined-state amplitudes (c1, c2, c3, c4) of the four-level sector."""

    c1: complex
    c2: complex
    c3: complex
    c4: complex

    def norm_sq(self) -> float:
        return abs(self.c1) ** 2 + abs(self.c2) ** 2 + abs(self.c3) ** 2 + abs(self.c4) ** 2


@dataclass(frozen=True)
class BlochVector:
    """Pseudo-spin components plus the trace weight of the state."""

    x: float
    y: float
    z: float
    norm: float = 1.0


@dataclass(frozen=True)
class BlochSeries:
    """Bloch components on a grid; the CSV-facing form of the oracle curves."""

    grid: TimeGrid
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    norm: np.ndarray

    def __post_init__(self) -> None:
        for name in ("x", "y", "z", "norm"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.n_points,):
                raise ValueError(f"{name} length must equal the grid length")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def bloch(self, i: int) -> BlochVector:
        return BlochVector(float(self.x[i]), float(self.y[i]), float(self.z[i]), float(self.norm[i]))

    def bloch_list(self) -> list[BlochVector]:
        return [self.bloch(i) for i in range(self.grid.n_points)]


@dataclass(frozen=True)
class DensityMatrix:
    """Dense density matrix; PSD/trace checks live in helpers, not the ctor."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        ent = np.asarray(self.entries, dtype=complex)
        if ent.ndim != 2 or ent.shape[0] != ent.shape[1]:
            raise ValueError("density matrix must be square")
        ent.flags.writeable = False
        object.__setattr__(self, "entries", ent)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.entries - self.entries.conj().T).max())

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries).min())


def _exact_rhs(g: float, c2: complex, c3: complex, c4: complex, phase: complex):
    # phase = exp(i delta t); c1 is constant and handled outside
    pc = phase.conjugate()
    return (
        -g * (phase * c3 + pc * c4),
        g * pc * c2,
        g * phase * c2,
    )


def exact_evolve(g: float, delta: float, grid: TimeGrid) -> list[ExactAmplitudes]:
    """Integrate the four-amplitude Schrodinger equation from |e00>.

    Classic fixed-step RK4 on the run grid; returns the amplitudes at every
    grid point.  c1 stays exactly zero for this initial condition.
    """
    dt = grid.dt
    times = grid.times
    phases = np.exp(1j * delta * times)
    phases_half = np.exp(1j * delta * (times[:-1] + dt / 2)) if grid.n_steps else phases[:0]
    c2, c3, c4 = 1.0 + 0j, 0j, 0j
    out = [ExactAmplitudes(0j, c2, c3, c4)]
    sixth = dt / 6.0
    half = dt / 2.0
    for i in range(grid.n_steps):
        p0 = complex(phases[i])
        ph = complex(phases_half[i])
        p1 = complex(phases[i + 1])
        a1, b1, d1 = _exact_rhs(g, c2, c3, c4, p0)
        a2, b2, d2 = _exact_rhs(g, c2 + half * a1, c3 + half * b1, c4 + half * d1, ph)
        a3, b3, d3 = _exact_rhs(g, c2 + half * a2, c3 + half * b2, c4 + half * d2, ph)
        a4, b4, d4 = _exact_rhs(g, c2 + dt * a3, c3 + dt * b3, c4 + dt * d3, p1)
        c2 = c2 + sixth * (a1 + 2 * a2 + 2 * a3 + a4)
        c3 = c3 + sixth * (b1 + 2 * b2 + 2 * b3 + b4)
        c4 = c4 + sixth * (d1 + 2 * d2 + 2 * d3 + d4)
        out.append(ExactAmplitudes(0j, c2, c3, c4))
    return out


def bloch_from_exact(a: ExactAmplitudes) -> BlochVector:
    """Pseudo-spin components of the reduced state of the exact solution.

    Only c1 and c2 share a bath state, so they alone carry coherences:
    x = 2 Re(c2 c1*), y = -2 Im(c2 c1*), z = |c2|^2 - |c1|^2 - |c3|^2 - |c4|^2.
    """
    coh = a.c2 * a.c1.conjugate()
    return BlochVector(
        x=2.0 * coh.real,
        y=-2.0 * coh.imag,
        z=abs(a.c2) ** 2 - abs(a.c1) ** 2 - abs(a.c3) ** 2 - abs(a.c4) ** 2,
        norm=a.norm_sq(),
    )


def reduced_density_from_exact(a: ExactAmplitudes) -> DensityMatrix:
    """Partial trace over the bath: exact reduced 2x2 state, basis (e, b)."""
    rho = np.array(
        [
            [abs(a.c2) ** 2, a.c2 * a.c1.conjugate()],
            [a.c1 * a.c2.conjugate(), abs(a.c1) ** 2 + abs(a.c3) ** 2 + abs(a.c4) ** 2],
        ],
        dtype=complex,
    )
    return DensityMatrix(rho)


def exact_bloch_series(g: float, delta: float, grid: TimeGrid) -> BlochSeries:
    amps = exact_evolve(g, delta, grid)
    n = grid.n_points
    x = np.empty(n)
    y = np.empty(n)
    z = np.empty(n)
    w = np.empty(n)
    for i, a in enumerate(amps):
        b = bloch_from_exact(a)
        x[i], y[i], z[i], w[i] = b.x, b.y, b.z, b.norm
    return BlochSeries(grid, x, y, z, w)


def bloch_from_state(state: SystemState) -> BlochVector:
    """Pseudo-spin components of a two-level state vector (C_e, C_b).

    Same sign convention as :func:`bloch_from_exact`; unnormalized states
    report their raw trace weight |C_e|^2 + |C_b|^2 in ``norm``.
    """
    if state.dimension != 2:
        raise ValueError("bloch_from_state needs a two-level state")
    ce, cb = complex(state.amplitudes[0]), complex(state.amplitudes[1])
    m_e = ce.real * ce.real + ce.imag * ce.imag
    m_b = cb.real * cb.real + cb.imag * cb.imag
    return BlochVector(
        x=2.0 * (ce.real * cb.real + ce.imag * cb.imag),
        y=2.0 * (ce.real * cb.imag - ce.imag * cb.real),
        z=m_e - m_b,
        norm=m_e + m_b,
    )


def lindblad_evolve(
    model: SystemModel, gamma: float, rho0: DensityMatrix, grid: TimeGrid
) -> list[DensityMatrix]:
    """Integrate rho' = -i[H, rho] + gamma D[L] rho with fixed-step RK4."""
    ham = model.hamiltonian
    lind = model.lindblad
    lind_dag = lind.conj().T
    ldl = lind_dag @ lind

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = gamma * (lind @ rho @ lind_dag - 0.5 * (ldl @ rho + rho @ ldl))
        if not model.hamiltonian_is_zero:
            out = out - 1j * (ham @ rho - rho @ ham)
        return out

    dt = grid.dt
    rho = np.array(rho0.entries, dtype=complex)
    out = [DensityMatrix(rho.copy())]
    for _ in range(grid.n_steps):
        k1 = rhs(rho)
        k2 = rhs(rho + dt / 2 * k1)
        k3 = rhs(rho + dt / 2 * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(DensityMatrix(rho.copy()))
    return out


def lindblad_bloch_series(
    model: SystemModel, gamma: float, rho0: DensityMatrix, grid: TimeGrid
) -> BlochSeries:
    if model.dimension != 2:
        raise ValueError("bloch series needs a two-level model")
    rhos = lindblad_evolve(model, gamma, rho0, grid)
    n = grid.n_points
    x = np.empty(n)
    y = np.empty(n)
    z = np.empty(n)
    w = np.empty(n)
    for i, dm in enumerate(rhos):
        r = dm.entries
        x[i] = 2.0 * r[0, 1].real
        y[i] = -2.0 * r[0, 1].imag
        z[i] = (r[0, 0] - r[1, 1]).real
        w[i] = np.trace(r).real
    return BlochSeries(grid, x, y, z, w)
