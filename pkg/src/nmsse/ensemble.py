"""Ensemble averaging with a deterministic parallel reduction.

Trajectories are grouped into fixed blocks of :data:`BLOCK_SIZE` consecutive
indices.  Each block's contribution is reduced with numpy's pairwise
summation over the block axis, and block partials are combined sequentially
in block order, so the result is bitwise independent of how blocks are
distributed over worker processes.  The floating-point reduction order is
part of the output contract: changing BLOCK_SIZE changes the rounding.

Linear-mode ensembles average raw unnormalized projectors under the
ostensible measure; actual-mode ensembles average normalized projectors.
Averaged density matrices are assembled from the component means, so they
are exactly the projector averages and stay positive up to rounding.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .grid import TimeGrid
from .models import BlochVector
from .sse import TrajectoryError, build_scenario, propagate_block

BLOCK_SIZE = 100

__all__ = ["BLOCK_SIZE", "EnsembleResult", "DeviationReport", "EnsembleError", "run_ensemble", "compare"]


class EnsembleError(RuntimeError):
    """One or more trajectories failed; the run is abandoned."""


@dataclass(frozen=True)
class EnsembleResult:
    """Component means, standard errors and diagnostics of one ensemble."""

    grid: TimeGrid
    mode: str
    unraveling: str
    n_traj: int
    config_hash: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    norm: np.ndarray
    x_se: np.ndarray
    y_se: np.ndarray
    z_se: np.ndarray
    norm_se: np.ndarray
    max_norm_deviation: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "z", "norm", "x_se", "y_se", "z_se", "norm_se"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.n_points,):
                raise ValueError(f"{name} length must equal the grid length")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def mean_density(self) -> np.ndarray:
        """Averaged density matrices, shape (n_points, 2, 2).

        Assembled from the component means: each projector is
        (norm*I + x*sx + y*sy + z*sz)/2, so its ensemble mean is the same
        expression in the means.  Actual-mode components are normalized per
        trajectory, hence unit trace by construction.
        """
        tr = self.norm if self.mode == "linear" else np.ones_like(self.norm)
        rho = np.empty((self.grid.n_points, 2, 2), dtype=complex)
        rho[:, 0, 0] = 0.5 * (tr + self.z)
        rho[:, 1, 1] = 0.5 * (tr - self.z)
        rho[:, 0, 1] = 0.5 * (self.x - 1j * self.y)
        rho[:, 1, 0] = 0.5 * (self.x + 1j * self.y)
        return rho

    def min_eigenvalues(self) -> np.ndarray:
        """Smallest eigenvalue of every averaged density matrix (analytic 2x2)."""
        tr = self.norm if self.mode == "linear" else np.ones_like(self.norm)
        r = np.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        return 0.5 * (tr - r)


@dataclass(frozen=True)
class DeviationReport:
    """Per-component deviations of an ensemble from a reference curve."""

    max_abs: dict[str, float]
    deviations: dict[str, np.ndarray]
    standard_errors: dict[str, np.ndarray]
    inside_3se_fraction: dict[str, float]
    tolerance: float
    passed: bool

    def worst_component(self) -> str:
        return max(self.max_abs, key=lambda k: self.max_abs[k])


def _block_bounds(n_traj: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + BLOCK_SIZE, n_traj)) for lo in range(0, n_traj, BLOCK_SIZE)]


def _block_partial(config: ScenarioConfig, lo: int, hi: int):
    """Sums, squared sums and the norm-drift maximum for one block."""
    setup = build_scenario(config)
    x, y, z, w = propagate_block(setup, lo, hi)
    max_norm_dev = float(np.abs(np.sqrt(w) - 1.0).max())
    if config.variant == "actual":
        x = x / w
        y = y / w
        z = z / w
    parts = []
    for arr in (x, y, z, w):
        parts.append(arr.sum(axis=0))
        parts.append((arr * arr).sum(axis=0))
    return parts, max_norm_dev


def _block_task(args):
    config, lo, hi = args
    try:
        return lo, _block_partial(config, lo, hi)
    except Exception as exc:  # reported per block, aggregated by the caller
        return lo, (f"trajectories {lo}..{hi - 1}: {exc}",)


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("NMSSE_THREADS")
        if env:
            workers = int(env)
        else:
            workers = min(8, os.cpu_count() or 1)
    return max(1, workers)


def run_ensemble(
    config: ScenarioConfig,
    n_traj: int | None = None,
    master_seed: int | None = None,
    workers: int | None = 1,
) -> EnsembleResult:
    """Average |psi><psi| over trajectories at every grid point.

    The reduction is bitwise identical for any worker count.  ``n_traj``
    and ``master_seed`` override the config when given.
    """
    if n_traj is not None or master_seed is not None:
        config = dataclasses.replace(
            config,
            n_traj=config.n_traj if n_traj is None else n_traj,
            master_seed=config.master_seed if master_seed is None else master_seed,
        )
    config.validate()
    if config.mode != "sse":
        raise ValueError(f"ensembles need mode='sse', got {config.mode!r}")
    workers = _resolve_workers(workers)
    bounds = _block_bounds(config.n_traj)
    tasks = [(config, lo, hi) for lo, hi in bounds]
    if workers == 1 or len(bounds) == 1:
        outcomes = [_block_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(bounds))) as pool:
            outcomes = list(pool.map(_block_task, tasks))
    outcomes.sort(key=lambda item: item[0])
    failures = [res[0] for _, res in outcomes if len(res) == 1]
    if failures:
        raise EnsembleError("; ".join(failures))

    totals = None
    max_norm_dev = 0.0
    for _, (parts, block_dev) in outcomes:
        if totals is None:
            totals = list(parts)
        else:
            totals = [tot + part for tot, part in zip(totals, parts)]
        max_norm_dev = max(max_norm_dev, block_dev)

    n = float(config.n_traj)
    means = []
    ses = []
    for j in range(4):
        s, sq = totals[2 * j], totals[2 * j + 1]
        mean = s / n
        if config.n_traj > 1:
            var = np.maximum(sq - s * s / n, 0.0) / (n - 1.0)
            ses.append(np.sqrt(var / n))
        else:
            ses.append(np.zeros_like(mean))
        means.append(mean)

    return EnsembleResult(
        grid=config.grid,
        mode=config.variant,
        unraveling=config.unraveling,
        n_traj=config.n_traj,
        config_hash=config.config_hash(),
        x=means[0],
        y=means[1],
        z=means[2],
        norm=means[3],
        x_se=ses[0],
        y_se=ses[1],
        z_se=ses[2],
        norm_se=ses[3],
        max_norm_deviation=max_norm_dev,
    )


def compare(
    result: EnsembleResult, reference: list[BlochVector], tolerance: float = 0.15
) -> DeviationReport:
    """Deviations of the ensemble means from a reference Bloch curve.

    Reports per-component max-abs and time-resolved deviations, the
    standard-error envelopes, the fraction of grid points where the
    reference sits inside +/- 3 standard errors, and a pass/fail against
    ``tolerance``.
    """
    if len(reference) != result.grid.n_points:
        raise ValueError(
            f"grid mismatch: ensemble has {result.grid.n_points} points, "
            f"reference has {len(reference)}"
        )
    ref = {
        "x": np.array([b.x for b in reference]),
        "y": np.array([b.y for b in reference]),
        "z": np.array([b.z for b in reference]),
    }
    deviations = {}
    max_abs = {}
    ses = {}
    inside = {}
    for comp in ("x", "y", "z"):
        dev = np.abs(getattr(result, comp) - ref[comp])
        se = getattr(result, f"{comp}_se")
        deviations[comp] = dev
        max_abs[comp] = float(dev.max())
        ses[comp] = se
        inside[comp] = float(np.mean(dev <= 3.0 * se + 1e-15))
    passed = all(v <= tolerance for v in max_abs.values())
    return DeviationReport(
        max_abs=max_abs,
        deviations=deviations,
        standard_errors=ses,
        inside_3se_fraction=inside,
        tolerance=tolerance,
        passed=passed,
    )
