"""Discrete-mode bath configurations and exact colored-noise synthesis.

A bath is a finite list of harmonic modes, each with a coupling amplitude
g_k >= 0 and a detuning Omega_k from the system frequency.  Every noise
statistic in the simulator derives from the memory kernel

    alpha(tau) = sum_k g_k^2 exp(-i Omega_k tau).

Baths whose modes come in symmetric detuning pairs (+Omega, -Omega) with
equal couplings have a purely real kernel

    beta(tau) = 2 sum_{k>0} g_k^2 cos(Omega_k tau)

and are the only baths that support the real-noise (quadrature) unraveling.

Colored noise paths are synthesized exactly: Gaussian mode amplitudes are
drawn from the bath-vacuum distribution and the mode sum is evaluated on
the run grid, so sample correlations reproduce the kernel by construction
rather than through an approximate filtered-white-noise recipe.  White
(Markov-limit) noise is drawn independently per grid step.

Random streams are per trajectory: :func:`trajectory_rng` derives an
independent generator from (master seed, trajectory index) via numpy's
SeedSequence, with PCG64 as the bit generator and numpy's ziggurat
normal sampler.  Identical (bath, seed, grid) inputs therefore produce
bitwise-identical noise paths on a given platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .grid import TimeGrid

NOISE_KINDS = ("coherent", "quadrature", "markov-complex", "markov-real")

__all__ = [
    "BathMode",
    "BathConfig",
    "ModeSample",
    "QuadSample",
    "NoisePath",
    "ExpectationHistory",
    "trajectory_rng",
    "memory_kernel",
    "sample_coherent",
    "sample_quadrature",
    "synthesize_noise",
    "sample_markov_noise",
    "girsanov_shift",
]


@dataclass(frozen=True)
class BathMode:
    """One bath mode: coupling amplitude g_k and detuning Omega_k.

    Couplings are non-negative; any phase is absorbed into the mode
    operators.  Detunings are relative to the system frequency, so only
    differences of bath and system frequencies ever enter.
    """

    coupling: float
    detuning: float

    def __post_init__(self) -> None:
        if not self.coupling >= 0:
            raise ValueError(f"mode coupling must be >= 0, got {self.coupling}")


@dataclass(frozen=True)
class BathConfig:
    """Ordered list of bath modes, optionally organized in symmetric pairs.

    When ``symmetric_pairs`` is set the modes must be stored as adjacent
    (+k, -k) pairs with exactly opposite detunings and exactly equal
    couplings, ordered by ascending |Omega|.  Quadrature unravelings are
    only constructible for such baths.
    """

    modes: tuple[BathMode, ...]
    symmetric_pairs: bool = False

    def __post_init__(self) -> None:
        if len(self.modes) < 1:
            raise ValueError("a bath needs at least one mode")
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.symmetric_pairs:
            if len(self.modes) % 2 != 0:
                raise ValueError("symmetric baths need an even mode count")
            prev = -1.0
            for i in range(0, len(self.modes), 2):
                plus, minus = self.modes[i], self.modes[i + 1]
                if plus.detuning < 0:
                    raise ValueError("pair ordering is (+k, -k): positive detuning first")
                if minus.detuning != -plus.detuning:
                    raise ValueError(
                        f"pair {i // 2}: detunings {plus.detuning}, {minus.detuning} "
                        "are not exact opposites"
                    )
                if minus.coupling != plus.coupling:
                    raise ValueError(f"pair {i // 2}: couplings differ")
                if abs(plus.detuning) < prev:
                    raise ValueError("pairs must be ordered by ascending |detuning|")
                prev = abs(plus.detuning)

    @classmethod
    def two_mode(cls, coupling: float, delta: float) -> "BathConfig":
        """The benchmark bath: one symmetric pair detuned by +/- delta."""
        return cls(
            modes=(BathMode(coupling, abs(delta)), BathMode(coupling, -abs(delta))),
            symmetric_pairs=True,
        )

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def couplings(self) -> np.ndarray:
        return np.array([m.coupling for m in self.modes])

    def detunings(self) -> np.ndarray:
        return np.array([m.detuning for m in self.modes])


@dataclass(frozen=True)
class ModeSample:
    """Complex mode amplitudes {a_k}, one per bath mode."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        if amps.ndim != 1:
            raise ValueError("amplitudes must be a flat list")


@dataclass(frozen=True)
class QuadSample:
    """Real two-mode quadrature eigenvalues X_k^+ and Y_k^-, one per pair."""

    x_plus: np.ndarray
    y_minus: np.ndarray

    def __post_init__(self) -> None:
        xp = np.asarray(self.x_plus, dtype=float)
        ym = np.asarray(self.y_minus, dtype=float)
        xp.flags.writeable = False
        ym.flags.writeable = False
        object.__setattr__(self, "x_plus", xp)
        object.__setattr__(self, "y_minus", ym)
        if xp.shape != ym.shape or xp.ndim != 1:
            raise ValueError("x_plus and y_minus must be flat lists of equal length")


@dataclass(frozen=True)
class NoisePath:
    """A realized noise function on the run grid.

    Real-valued kinds (quadrature, markov-real) carry identically zero
    imaginary parts, produced by real arithmetic rather than cancellation.
    """

    grid: TimeGrid
    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=complex)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if vals.shape != (self.grid.n_points,):
            raise ValueError("values length must equal the grid length")
        if self.kind in ("quadrature", "markov-real") and np.any(vals.imag != 0.0):
            raise ValueError(f"{self.kind} paths must have exactly zero imaginary parts")


class ExpectationHistory:
    """Append-only record of per-step conditioned expectations.

    Holds one entry per completed Euler step: <L^dag>_s for the coherent
    unraveling, <L_x>_s (real) for the quadrature one.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Sequence[complex] = ()) -> None:
        self._values = [complex(v) for v in values]

    def append(self, value: complex) -> None:
        self._values.append(complex(value))

    def __len__(self) -> int:
        return len(self._values)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self._values, dtype=complex)


def trajectory_rng(master_seed: int, traj_index: int) -> np.random.Generator:
    """Independent per-trajectory random stream derived from (seed, index)."""
    if master_seed < 0 or traj_index < 0:
        raise ValueError("master_seed and traj_index must be non-negative")
    return np.random.default_rng(np.random.SeedSequence([master_seed, traj_index]))


def memory_kernel(bath: BathConfig, tau: Union[float, np.ndarray]) -> Union[complex, np.ndarray]:
    """Memory kernel alpha(tau) = sum_k g_k^2 exp(-i Omega_k tau).

    For symmetric baths the sum is evaluated in its real cosine form
    beta(tau) = 2 sum_{k>0} g_k^2 cos(Omega_k tau), so the imaginary part
    is exactly zero rather than a near-cancellation.
    """
    t = np.asarray(tau, dtype=float)
    if bath.symmetric_pairs:
        acc = np.zeros(t.shape)
        for i in range(0, bath.n_modes, 2):
            m = bath.modes[i]
            acc = acc + (2.0 * m.coupling * m.coupling) * np.cos(m.detuning * t)
        out = acc.astype(complex)
    else:
        out = np.zeros(t.shape, dtype=complex)
        for m in bath.modes:
            out = out + (m.coupling * m.coupling) * np.exp(-1j * m.detuning * t)
    if np.isscalar(tau) or np.ndim(tau) == 0:
        return complex(out[()])
    return out


def _draw_coherent_amplitudes(rng: np.random.Generator, n_modes: int) -> np.ndarray:
    """Vacuum-distributed amplitudes: Re and Im of each a_k are N(0, 1/2)."""
    raw = rng.standard_normal(2 * n_modes) * np.sqrt(0.5)
    return raw[0::2] + 1j * raw[1::2]


def _draw_quadrature_values(rng: np.random.Generator, n_pairs: int) -> tuple[np.ndarray, np.ndarray]:
    """Vacuum-distributed quadratures: each X_k^+ and Y_k^- is N(0, 1/2)."""
    raw = rng.standard_normal(2 * n_pairs) * np.sqrt(0.5)
    return raw[:n_pairs], raw[n_pairs:]


def _draw_markov_values(
    rng: np.random.Generator, n_points: int, kind: str, gamma: float, dt: float
) -> np.ndarray:
    """White-noise samples z(t_i) = sqrt(gamma) * zeta(t_i), E|zeta|^2 = 1/dt."""
    if kind == "complex":
        raw = rng.standard_normal(2 * n_points) * np.sqrt(gamma / (2.0 * dt))
        return raw[0::2] + 1j * raw[1::2]
    if kind == "real":
        return (rng.standard_normal(n_points) * np.sqrt(gamma / dt)).astype(complex)
    raise ValueError(f"unknown Markov noise kind {kind!r}")


def sample_coherent(bath: BathConfig, rng: np.random.Generator) -> ModeSample:
    """Draw mode amplitudes from the bath-vacuum (ostensible) distribution.

    Each a_k is an independent complex Gaussian with mean 0, E|a_k|^2 = 1
    and E[a_k^2] = 0.
    """
    return ModeSample(_draw_coherent_amplitudes(rng, bath.n_modes))


def sample_quadrature(bath: BathConfig, rng: np.random.Generator) -> QuadSample:
    """Draw X_k^+, Y_k^- from the bath-vacuum distribution (variance 1/2 each)."""
    if not bath.symmetric_pairs:
        raise ValueError("quadrature sampling requires a symmetric-pair bath")
    x_plus, y_minus = _draw_quadrature_values(rng, bath.n_modes // 2)
    return QuadSample(x_plus, y_minus)


def _coherent_path_values(bath: BathConfig, amplitudes: np.ndarray, times: np.ndarray) -> np.ndarray:
    acc = np.zeros(times.shape, dtype=complex)
    for k, m in enumerate(bath.modes):
        acc = acc + (m.coupling * amplitudes[k]) * np.exp(-1j * m.detuning * times)
    return acc


def _quadrature_path_values(
    bath: BathConfig, x_plus: np.ndarray, y_minus: np.ndarray, times: np.ndarray
) -> np.ndarray:
    acc = np.zeros(times.shape)
    for p in range(bath.n_modes // 2):
        m = bath.modes[2 * p]
        acc = acc + (2.0 * m.coupling * x_plus[p]) * np.cos(m.detuning * times)
        acc = acc + (2.0 * m.coupling * y_minus[p]) * np.sin(m.detuning * times)
    return acc


def synthesize_noise(
    bath: BathConfig, sample: Union[ModeSample, QuadSample], grid: TimeGrid
) -> NoisePath:
    """Evaluate the mode sum for one sampled bath state on the grid.

    Coherent samples give z(t) = sum_k g_k a_k exp(-i Omega_k t); quadrature
    samples give the real path
    z(t) = sum_{k>0} 2 g_k (X_k^+ cos(Omega_k t) + Y_k^- sin(Omega_k t)).
    """
    times = grid.times
    if isinstance(sample, ModeSample):
        if sample.amplitudes.shape != (bath.n_modes,):
            raise ValueError("mode sample length does not match the bath")
        return NoisePath(grid, _coherent_path_values(bath, sample.amplitudes, times), "coherent")
    if isinstance(sample, QuadSample):
        if not bath.symmetric_pairs:
            raise ValueError("quadrature noise requires a symmetric-pair bath")
        if sample.x_plus.shape != (bath.n_modes // 2,):
            raise ValueError("quadrature sample length does not match the bath")
        values = _quadrature_path_values(bath, sample.x_plus, sample.y_minus, times)
        return NoisePath(grid, values.astype(complex), "quadrature")
    raise TypeError(f"unsupported sample type {type(sample).__name__}")


def sample_markov_noise(
    gamma: float, grid: TimeGrid, kind: str, rng: np.random.Generator
) -> NoisePath:
    """Per-step white noise for the Markov-limit steppers.

    Complex kind: Re and Im each have variance gamma/(2 dt); real kind:
    variance gamma/dt.  gamma = 0 gives an identically zero path.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    values = _draw_markov_values(rng, grid.n_points, kind, gamma, grid.dt)
    return NoisePath(grid, values, f"markov-{kind}")


def girsanov_shift(
    z_lambda: NoisePath,
    history: ExpectationHistory,
    bath: BathConfig,
    t_index: int,
) -> complex:
    """Shifted noise value at one grid index: stored value + memory convolution.

    Returns z_lambda.values[t_index] + dt * sum_{j < t_index} K(t_i - t_j) h_j
    with K = conj(alpha) against an <L^dag> history for coherent paths and
    K = beta against an <L_x> history for quadrature paths (left-endpoint
    Riemann rule; the current step is excluded).  The caller is responsible
    for passing path values in the orientation its stepper consumes; the
    actual coherent runner hands in the conjugated vacuum path so the result
    is exactly the conditioned z*(t).
    """
    if z_lambda.kind not in ("coherent", "quadrature"):
        raise ValueError(f"girsanov shift is defined for colored paths, not {z_lambda.kind}")
    if t_index < 0 or t_index >= z_lambda.grid.n_points:
        raise ValueError(f"t_index {t_index} outside the grid")
    if len(history) < t_index:
        raise ValueError(f"history has {len(history)} entries, needs {t_index}")
    base = complex(z_lambda.values[t_index])
    if t_index == 0:
        return base
    dt = z_lambda.grid.dt
    taus = (t_index - np.arange(t_index, dtype=float)) * dt
    if z_lambda.kind == "coherent":
        kernel = np.conj(memory_kernel(bath, taus))
    else:
        kernel = memory_kernel(bath, taus)
    h = history.values[:t_index]
    return base + complex((kernel * h).sum() * dt)
