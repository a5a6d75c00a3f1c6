"""Stochastic state-vector steppers and trajectory propagation.

Implements the four colored-noise steppers (linear/actual for the coherent
and quadrature unravelings), the four Markov-limit steppers (linear/actual
for heterodyne/homodyne), the measurement-record shift, and per-trajectory
orchestration.

Conventions shared by every stepper:

* explicit Euler on the run grid; colored noise paths are smooth, so the
  non-Markovian equations integrate as ordinary ODEs with the noise frozen
  per step, while the Markov equations are Euler-Maruyama with z*dt as the
  stochastic increment;
* expectation values entering drifts and noise shifts are evaluated at the
  step's start in the current normalized state;
* the memory convolution of the actual modes is a left-endpoint Riemann sum
  that excludes the current step, evaluated through per-mode running sums
  (algebraically identical to the direct sum over the stored history, and
  O(modes) per step instead of O(steps));
* actual-mode heterodyne/homodyne noise carries the deterministic

  conditioning shift (gamma/2) <L^dag> / (gamma/2) <L_x>, which is half the
  corresponding measurement-record shift (see :func:`markov_record`).

Trajectories are bitwise deterministic given (config, index): noise is
drawn from a per-trajectory stream, and the block propagation applies the
same elementwise operation sequence whether a trajectory runs alone or
inside a vectorized block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ansatz import AnsatzSolution, kernel_equivalence_check, solve_ansatz
from .bath import (
    BathConfig,
    ExpectationHistory,
    NoisePath,
    _draw_coherent_amplitudes,
    _draw_markov_values,
    _draw_quadrature_values,
    trajectory_rng,
)
from .config import ScenarioConfig
from .grid import TimeGrid
from .models import BlochVector, SystemModel, SystemState

__all__ = [
    "SystemState",
    "ExpectationHistory",
    "TrajectoryRecord",
    "TrajectoryError",
    "expectation",
    "step_linear",
    "step_actual",
    "step_markov",
    "markov_record",
    "run_trajectory",
    "build_scenario",
]


class TrajectoryError(RuntimeError):
    """Stepper or setup failure, tagged with the trajectory index."""


@dataclass(frozen=True)
class TrajectoryRecord:
    """Bloch components (plus trace weight) of one trajectory on the grid."""

    grid: TimeGrid
    mode: str
    noise_kind: str
    seed: int
    traj_index: int
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


# ---------------------------------------------------------------------------
# shared per-step arithmetic
#
# Public steppers wrap their state as a 1-row block and call the same helpers
# as the vectorized engine, so both produce identical floating-point results.
# ---------------------------------------------------------------------------


_MIN_NORM_SQ = 1e-24  # ||psi|| >= 1e-12: below this, expectations are undefined


def _matvec(mat: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return np.einsum("jk,bk->bj", mat, psi)


def _inner(bra_conj: np.ndarray, ket: np.ndarray) -> np.ndarray:
    return np.einsum("bk,bk->b", bra_conj, ket)


def _norm_and_expectations(psi, lpsi, glpsi):
    """Trace weight plus normalized <L>, <L^dag>, <G L> at the step start."""
    psi_c = np.conj(psi)
    w = np.real(_inner(psi_c, psi))
    if float(w.min()) < _MIN_NORM_SQ:
        raise ValueError("state norm below 1e-12: actual-mode expectations undefined")
    exp_l = _inner(psi_c, lpsi) / w
    exp_ld = np.conj(exp_l)
    exp_gl = _inner(psi_c, glpsi) / w
    return w, exp_l, exp_ld, exp_gl


def _colored_linear_drift(lpsi, glpsi, zc, f_t, hpsi=None):
    drift = zc * lpsi - f_t * glpsi
    if hpsi is not None:
        drift = hpsi + drift
    return drift


def _colored_actual_drift(psi, lpsi, glpsi, exp_l, exp_g, cross, zc, f_t, hpsi=None):
    drift = zc * (lpsi - exp_l * psi) - f_t * (glpsi - exp_g * lpsi - cross * psi)
    if hpsi is not None:
        drift = hpsi + drift
    return drift


def _markov_linear_update(psi, lpsi, ldlpsi, gamma, zc, dt, hpsi=None):
    det = -(0.5 * gamma) * ldlpsi
    if hpsi is not None:
        det = hpsi + det
    return psi + dt * det + (zc * dt) * lpsi


def _markov_actual_update(psi, lpsi, ldlpsi, exp_l, exp_ld, gamma, zc, dt, kind, hpsi=None):
    if kind == "heterodyne":
        det = -(0.5 * gamma) * (ldlpsi - exp_ld * lpsi)
    else:
        det = -(0.5 * gamma) * (ldlpsi - exp_ld * lpsi + exp_l * lpsi - (exp_l * exp_l) * psi)
    if hpsi is not None:
        det = hpsi + det
    return psi + dt * det + (zc * dt) * (lpsi - exp_l * psi)


def expectation(state: SystemState, operator: np.ndarray) -> complex:
    """Normalized conditioned expectation <psi|A|psi> / <psi|psi>."""
    psi = state.amplitudes[None, :]
    psi_c = np.conj(psi)
    w = np.real(_inner(psi_c, psi))
    if float(w[0]) < _MIN_NORM_SQ:
        raise ValueError("state norm too small for a conditioned expectation")
    return complex((_inner(psi_c, _matvec(operator, psi)) / w)[0])


def _g_matrix(model: SystemModel, unraveling: str) -> np.ndarray:
    if unraveling in ("coherent", "heterodyne"):
        return model.lindblad.conj().T
    if unraveling in ("quadrature", "homodyne"):
        return model.lindblad_x
    raise ValueError(f"unknown unraveling {unraveling!r}")


def step_linear(
    state: SystemState,
    model: SystemModel,
    f_t: complex,
    z_conj_t: complex,
    dt: float,
    unraveling: str = "coherent",
) -> SystemState:
    """One Euler step of the linear colored-noise equation.

    ``z_conj_t`` is z*(t) for the coherent unraveling and the (real) z(t)
    for the quadrature one; ``f_t`` is the ansatz closure at the step start.
    """
    psi = state.amplitudes[None, :]
    gl = _g_matrix(model, unraveling) @ model.lindblad
    lpsi = _matvec(model.lindblad, psi)
    glpsi = _matvec(gl, psi)
    hpsi = None if model.hamiltonian_is_zero else _matvec(-1j * model.hamiltonian, psi)
    drift = _colored_linear_drift(lpsi, glpsi, z_conj_t, f_t, hpsi)
    return SystemState((psi + dt * drift)[0])


def step_actual(
    state: SystemState,
    model: SystemModel,
    f_t: complex,
    z_shifted_t: complex,
    dt: float,
    unraveling: str = "coherent",
) -> SystemState:
    """One Euler step of the actual (normalized) colored-noise equation.

    ``z_shifted_t`` is the Girsanov-shifted noise: the conditioned z*(t)
    for the coherent unraveling, the conditioned real z(t) for the
    quadrature one.  Expectations are taken in the current normalized state.
    """
    psi = state.amplitudes[None, :]
    gl = _g_matrix(model, unraveling) @ model.lindblad
    lpsi = _matvec(model.lindblad, psi)
    glpsi = _matvec(gl, psi)
    hpsi = None if model.hamiltonian_is_zero else _matvec(-1j * model.hamiltonian, psi)
    w, exp_l, exp_ld, exp_gl = _norm_and_expectations(psi, lpsi, glpsi)
    exp_g = exp_ld if unraveling in ("coherent", "heterodyne") else exp_l + exp_ld
    cross = exp_gl - exp_g * exp_l
    drift = _colored_actual_drift(psi, lpsi, glpsi, exp_l, exp_g, cross, z_shifted_t, f_t, hpsi)
    return SystemState((psi + dt * drift)[0])


def step_markov(
    state: SystemState,
    model: SystemModel,
    gamma: float,
    z_t: complex,
    dt: float,
    mode: str = "actual",
    kind: str = "heterodyne",
) -> SystemState:
    """One Euler-Maruyama step of the Markov-limit equations.

    ``z_t`` is the per-step white-noise value; for actual mode the caller
    passes it with the conditioning shift already applied
    (z_t = z_lambda + (gamma/2) <L> for heterodyne,
    z_t = z_lambda + (gamma/2) <L_x> for homodyne).  Heterodyne steppers
    consume the conjugate z*(t); z_t * dt acts as the stochastic increment.
    """
    if kind not in ("heterodyne", "homodyne"):
        raise ValueError(f"unknown Markov kind {kind!r}")
    if mode not in ("linear", "actual"):
        raise ValueError(f"unknown mode {mode!r}")
    psi = state.amplitudes[None, :]
    lind_dag = model.lindblad.conj().T
    ldl = lind_dag @ model.lindblad
    lpsi = _matvec(model.lindblad, psi)
    ldlpsi = _matvec(ldl, psi)
    hpsi = None if model.hamiltonian_is_zero else _matvec(-1j * model.hamiltonian, psi)
    zc = np.conj(z_t) if kind == "heterodyne" else z_t
    if mode == "linear":
        out = _markov_linear_update(psi, lpsi, ldlpsi, gamma, zc, dt, hpsi)
    else:
        psi_c = np.conj(psi)
        w = np.real(_inner(psi_c, psi))
        if float(w[0]) < _MIN_NORM_SQ:
            raise ValueError("zero-norm state in actual mode")
        exp_l = _inner(psi_c, lpsi) / w
        exp_ld = np.conj(exp_l)
        out = _markov_actual_update(psi, lpsi, ldlpsi, exp_l, exp_ld, gamma, zc, dt, kind, hpsi)
    return SystemState(out[0])


def markov_record(z_lambda_t: complex, expectation_t: complex, gamma: float, kind: str) -> complex:
    """Measured current I(t) = z_lambda(t) + gamma * <L>_t (or <L_x>_t).

    The record carries the full factor gamma where the conditioning noise
    z(t) carries gamma/2: the record refers to a measurement at t + dt,
    after the bath has interacted with the system for one more step.
    """
    if kind not in ("heterodyne", "homodyne"):
        raise ValueError(f"unknown Markov kind {kind!r}")
    return complex(z_lambda_t) + gamma * complex(expectation_t)


# ---------------------------------------------------------------------------
# scenario setup and the vectorized block engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScenarioSetup:
    """Immutable precomputed run data shared by all trajectories."""

    config: ScenarioConfig
    grid: TimeGrid
    model: SystemModel
    noise_kind: str
    linear: bool
    g_is_ldag: bool
    real_path: bool
    # dtype-cast matrices (None when the Hamiltonian is exactly zero)
    mat_l: np.ndarray
    mat_gl: np.ndarray
    mat_ldl: np.ndarray
    mat_h: np.ndarray | None
    # colored-noise data
    bath: BathConfig | None = None
    ansatz: AnsatzSolution | None = None
    f_values: np.ndarray | None = None
    phase_table: np.ndarray | None = None  # exp(-i Omega_k t_i), (kappa, n)
    conj_phase_table: np.ndarray | None = None
    mode_g: np.ndarray | None = None  # g_k
    mode_g2: np.ndarray | None = None  # g_k^2
    cos_table: np.ndarray | None = None  # per pair, (kappa/2, n)
    sin_table: np.ndarray | None = None
    pair_2g: np.ndarray | None = None  # 2 g_k per pair
    pair_2g2: np.ndarray | None = None  # 2 g_k^2 per pair
    # Markov data
    gamma: float = 0.0


_NOISE_KIND = {
    "coherent": "coherent",
    "quadrature": "quadrature",
    "heterodyne": "markov-complex",
    "homodyne": "markov-real",
}


@lru_cache(maxsize=4)
def _cached_setup(config: ScenarioConfig) -> ScenarioSetup:
    model = SystemModel.tla()
    if model.dimension != 2:
        raise ValueError("trajectory recording requires a two-level system")
    unr = config.unraveling
    grid = config.grid
    real_path = unr in ("quadrature", "homodyne")
    dtype = float if real_path else complex
    lind = model.lindblad
    gmat = _g_matrix(model, unr)
    mat_l = lind.real.astype(float) if real_path else lind
    mat_gl = (gmat @ lind).real.astype(float) if real_path else gmat @ lind
    ldl = lind.conj().T @ lind
    mat_ldl = ldl.real.astype(float) if real_path else ldl
    mat_h = None if model.hamiltonian_is_zero else (-1j) * model.hamiltonian
    if mat_h is not None and real_path:
        raise ValueError("real-noise fast path requires a zero Hamiltonian")
    common = dict(
        config=config,
        grid=grid,
        model=model,
        noise_kind=_NOISE_KIND[unr],
        linear=config.variant == "linear",
        g_is_ldag=unr in ("coherent", "heterodyne"),
        real_path=real_path,
        mat_l=mat_l,
        mat_gl=mat_gl,
        mat_ldl=mat_ldl,
        mat_h=mat_h,
    )
    if unr in ("heterodyne", "homodyne"):
        return ScenarioSetup(gamma=float(config.gamma), **common)
    bath = BathConfig.two_mode(config.g, config.delta)
    times = grid.times
    ansatz = solve_ansatz(config.g, config.delta, grid)
    if unr == "quadrature":
        if not kernel_equivalence_check(bath, grid):
            raise ValueError("quadrature unraveling needs alpha(tau) == beta(tau)")
        imag_max = float(np.abs(ansatz.f_total.imag).max())
        if imag_max > 1e-12 * (1.0 + float(np.abs(ansatz.f_total).max())):
            raise ValueError("ansatz closure is not real; cannot use the real-noise path")
        f_values = np.ascontiguousarray(ansatz.f_total.real)
        dets = np.array([bath.modes[i].detuning for i in range(0, bath.n_modes, 2)])
        gs = np.array([bath.modes[i].coupling for i in range(0, bath.n_modes, 2)])
        cos_table = np.cos(dets[:, None] * times[None, :])
        sin_table = np.sin(dets[:, None] * times[None, :])
        return ScenarioSetup(
            bath=bath,
            ansatz=ansatz,
            f_values=f_values,
            cos_table=cos_table,
            sin_table=sin_table,
            pair_2g=2.0 * gs,
            pair_2g2=2.0 * gs * gs,
            **common,
        )
    dets = bath.detunings()
    gs = bath.couplings()
    phase_table = np.exp(-1j * dets[:, None] * times[None, :])
    return ScenarioSetup(
        bath=bath,
        ansatz=ansatz,
        f_values=ansatz.f_total,
        phase_table=phase_table,
        conj_phase_table=np.conj(phase_table),
        mode_g=gs,
        mode_g2=gs * gs,
        **common,
    )


def build_scenario(config: ScenarioConfig) -> ScenarioSetup:
    """Validate an sse-mode config and assemble its immutable run tables."""
    config.validate()
    if config.mode != "sse":
        raise ValueError(f"trajectories need mode='sse', got {config.mode!r}")
    return _cached_setup(config)


def _record_bloch(psi, x, y, z, wa, i, real_path):
    ce = psi[:, 0]
    cb = psi[:, 1]
    if real_path:
        me = ce * ce
        mb = cb * cb
        x[:, i] = 2.0 * (ce * cb)
        # real amplitudes carry no coherence phase: y stays exactly zero
        z[:, i] = me - mb
    else:
        me = ce.real * ce.real + ce.imag * ce.imag
        mb = cb.real * cb.real + cb.imag * cb.imag
        x[:, i] = 2.0 * (ce.real * cb.real + ce.imag * cb.imag)
        y[:, i] = 2.0 * (ce.real * cb.imag - ce.imag * cb.real)
        z[:, i] = me - mb
    wa[:, i] = me + mb


def _synthesize_colored_block(setup: ScenarioSetup, lo: int, hi: int) -> np.ndarray:
    """Vacuum-measure noise rows for trajectories lo..hi-1 (coherent: z*, not z)."""
    seed = setup.config.master_seed
    n = setup.grid.n_points
    n_modes = setup.bath.n_modes
    if setup.real_path:
        n_pairs = n_modes // 2
        xs = np.empty((hi - lo, n_pairs))
        ys = np.empty((hi - lo, n_pairs))
        for b in range(hi - lo):
            rng = trajectory_rng(seed, lo + b)
            xs[b], ys[b] = _draw_quadrature_values(rng, n_pairs)
        zs = np.zeros((hi - lo, n))
        for p in range(n_pairs):
            zs += (setup.pair_2g[p] * xs[:, p])[:, None] * setup.cos_table[p][None, :]
            zs += (setup.pair_2g[p] * ys[:, p])[:, None] * setup.sin_table[p][None, :]
        return zs
    amps = np.empty((hi - lo, n_modes), dtype=complex)
    for b in range(hi - lo):
        rng = trajectory_rng(seed, lo + b)
        amps[b] = _draw_coherent_amplitudes(rng, n_modes)
    zs = np.zeros((hi - lo, n), dtype=complex)
    for k in range(n_modes):
        zs += (setup.mode_g[k] * amps[:, k])[:, None] * setup.phase_table[k][None, :]
    return np.conj(zs)


def _run_colored(setup: ScenarioSetup, lo: int, hi: int):
    grid = setup.grid
    n = grid.n_points
    dt = grid.dt
    n_traj = hi - lo
    zst = _synthesize_colored_block(setup, lo, hi)
    dtype = float if setup.real_path else complex
    psi = np.zeros((n_traj, 2), dtype=dtype)
    psi[:, 0] = 1.0
    x = np.zeros((n_traj, n))
    y = np.zeros((n_traj, n))
    z = np.zeros((n_traj, n))
    wa = np.zeros((n_traj, n))
    f_values = setup.f_values
    mat_l, mat_gl, mat_h = setup.mat_l, setup.mat_gl, setup.mat_h
    actual = not setup.linear
    if actual:
        if setup.real_path:
            sums_c = np.zeros((n_traj, setup.cos_table.shape[0]))
            sums_s = np.zeros((n_traj, setup.sin_table.shape[0]))
        else:
            sums = np.zeros((n_traj, setup.bath.n_modes), dtype=complex)
    for i in range(n):
        _record_bloch(psi, x, y, z, wa, i, setup.real_path)
        if i == n - 1:
            break
        lpsi = _matvec(mat_l, psi)
        glpsi = _matvec(mat_gl, psi)
        hpsi = None if mat_h is None else _matvec(mat_h, psi)
        f_t = f_values[i]
        if not actual:
            drift = _colored_linear_drift(lpsi, glpsi, zst[:, i][:, None], f_t, hpsi)
        else:
            w, exp_l, exp_ld, exp_gl = _norm_and_expectations(psi, lpsi, glpsi)
            exp_g = exp_ld if setup.g_is_ldag else exp_l + exp_ld
            cross = exp_gl - exp_g * exp_l
            if setup.real_path:
                hist = exp_g  # <L_x>, real
                shift = dt * (
                    np.einsum("p,bp->b", setup.pair_2g2 * setup.cos_table[:, i], sums_c)
                    + np.einsum("p,bp->b", setup.pair_2g2 * setup.sin_table[:, i], sums_s)
                )
            else:
                hist = exp_ld  # <L^dag>
                shift = dt * np.einsum(
                    "k,bk->b", setup.mode_g2 * setup.conj_phase_table[:, i], sums
                )
            zc = zst[:, i] + shift
            drift = _colored_actual_drift(
                psi,
                lpsi,
                glpsi,
                exp_l[:, None],
                exp_g[:, None],
                cross[:, None],
                zc[:, None],
                f_t,
                hpsi,
            )
            if setup.real_path:
                sums_c += setup.cos_table[:, i][None, :] * hist[:, None]
                sums_s += setup.sin_table[:, i][None, :] * hist[:, None]
            else:
                sums += setup.phase_table[:, i][None, :] * hist[:, None]
        psi = psi + dt * drift
    return x, y, z, wa


def _run_markov(setup: ScenarioSetup, lo: int, hi: int):
    grid = setup.grid
    n = grid.n_points
    dt = grid.dt
    n_traj = hi - lo
    gamma = setup.gamma
    seed = setup.config.master_seed
    draw_kind = "real" if setup.real_path else "complex"
    rows = np.empty((n_traj, n), dtype=complex)
    for b in range(n_traj):
        rng = trajectory_rng(seed, lo + b)
        rows[b] = _draw_markov_values(rng, n, draw_kind, gamma, dt)
    if setup.real_path:
        zst = rows.real.copy()
    else:
        zst = np.conj(rows)  # heterodyne steppers consume z*
    dtype = float if setup.real_path else complex
    psi = np.zeros((n_traj, 2), dtype=dtype)
    psi[:, 0] = 1.0
    x = np.zeros((n_traj, n))
    y = np.zeros((n_traj, n))
    z = np.zeros((n_traj, n))
    wa = np.zeros((n_traj, n))
    mat_l, mat_ldl, mat_h = setup.mat_l, setup.mat_ldl, setup.mat_h
    actual = not setup.linear
    kind = "homodyne" if setup.real_path else "heterodyne"
    for i in range(n):
        _record_bloch(psi, x, y, z, wa, i, setup.real_path)
        if i == n - 1:
            break
        lpsi = _matvec(mat_l, psi)
        ldlpsi = _matvec(mat_ldl, psi)
        hpsi = None if mat_h is None else _matvec(mat_h, psi)
        if not actual:
            psi = _markov_linear_update(psi, lpsi, ldlpsi, gamma, zst[:, i][:, None], dt, hpsi)
        else:
            psi_c = np.conj(psi)
            w = np.real(_inner(psi_c, psi))
            if float(w.min()) < _MIN_NORM_SQ:
                raise ValueError(f"state norm collapsed at step {i}")
            exp_l = _inner(psi_c, lpsi) / w
            exp_ld = np.conj(exp_l)
            if kind == "heterodyne":
                zc = zst[:, i] + (0.5 * gamma) * exp_ld
            else:
                zc = zst[:, i] + (0.5 * gamma) * (exp_l + exp_ld)
            psi = _markov_actual_update(
                psi, lpsi, ldlpsi, exp_l[:, None], exp_ld[:, None], gamma, zc[:, None], dt, kind, hpsi
            )
    return x, y, z, wa


def propagate_block(setup: ScenarioSetup, lo: int, hi: int):
    """Propagate trajectories lo..hi-1; returns (x, y, z, norm) blocks.

    Rows are bitwise independent of the block split: trajectory j produces
    the same values whether it runs alone or inside a larger block.
    """
    if hi <= lo:
        raise ValueError("empty trajectory range")
    if setup.noise_kind.startswith("markov"):
        return _run_markov(setup, lo, hi)
    return _run_colored(setup, lo, hi)


def run_trajectory(config: ScenarioConfig, traj_index: int) -> TrajectoryRecord:
    """Propagate one trajectory and record Bloch components per grid point."""
    if traj_index < 0:
        raise ValueError("traj_index must be non-negative")
    try:
        setup = build_scenario(config)
        x, y, z, wa = propagate_block(setup, traj_index, traj_index + 1)
    except Exception as exc:
        raise TrajectoryError(f"trajectory {traj_index}: {exc}") from exc
    return TrajectoryRecord(
        grid=setup.grid,
        mode=config.variant,
        noise_kind=setup.noise_kind,
        seed=config.master_seed,
        traj_index=traj_index,
        x=x[0],
        y=y[0],
        z=z[0],
        norm=wa[0],
    )
