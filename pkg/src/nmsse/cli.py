"""Command-line front end: config parsing, scenario dispatch, CSV emission.

Single binary with ``--mode`` dispatch (exact | master | sse) plus a
``reproduce-figures`` convenience command that regenerates the CSVs behind
the three benchmark figures.  Output files are deterministic byte-for-byte
for a given configuration; see :func:`emit_csv` for the format.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import ensemble as ensemble_mod
from .config import (
    DEFAULT_DELTA,
    DEFAULT_DT,
    DEFAULT_N_TRAJ,
    DEFAULT_SEED,
    DEFAULT_T_FINAL,
    EMITS,
    MARKOV_UNRAVELINGS,
    MODES,
    UNRAVELINGS,
    VARIANTS,
    ConfigError,
    ScenarioConfig,
)
from .models import (
    DensityMatrix,
    SystemModel,
    exact_bloch_series,
    lindblad_bloch_series,
)
from .sse import run_trajectory

__all__ = ["parse_config", "emit_csv", "main"]


class _Parser(argparse.ArgumentParser):
    # argparse exits on errors; surface them as ConfigError instead so both
    # library callers and main() can handle them uniformly
    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError("arguments", message)


def _build_parser() -> _Parser:
    p = _Parser(prog="nmsse", description="Stochastic Schrodinger equation runner")
    p.add_argument("command", nargs="?", default="run", choices=["run", "reproduce-figures"])
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--unraveling", choices=UNRAVELINGS)
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--delta", type=float, help=f"detuning in units of g (default {DEFAULT_DELTA})")
    p.add_argument("--gamma", type=float, help="decay rate, Markov modes and master only")
    p.add_argument("--dt", type=float, help=f"step size (default {DEFAULT_DT})")
    p.add_argument("--t-final", type=float, help=f"end time (default {DEFAULT_T_FINAL})")
    p.add_argument("--n-traj", type=int, help=f"trajectories (default {DEFAULT_N_TRAJ})")
    p.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--output", help="output CSV path (default out.csv)")
    p.add_argument("--emit", choices=EMITS, help="ensemble | trajectory | both (default ensemble)")
    p.add_argument("--threads", type=int, help="worker cap (default: NMSSE_THREADS or cpu count)")
    p.add_argument(
        "--compare-exact",
        action="store_true",
        help="compare the ensemble against the exact oracle and fail the run on deviation",
    )
    p.add_argument("--compare-tolerance", type=float, default=0.15)
    p.add_argument("--output-dir", help="reproduce-figures: directory for the CSV set")
    return p


_FILE_KEYS = {
    "mode": str,
    "unraveling": str,
    "variant": str,
    "delta": float,
    "gamma": float,
    "dt": float,
    "t_final": float,
    "n_traj": int,
    "seed": int,
    "output": str,
    "emit": str,
}


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("config", f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FILE_KEYS:
            raise ConfigError(key, f"unknown config key at {path}:{lineno}")
        try:
            values[key] = _FILE_KEYS[key](raw)
        except ValueError:
            raise ConfigError(key, f"invalid value {raw!r} at {path}:{lineno}") from None
    return values


def parse_config(argv: list[str], config_file: str | None = None) -> ScenarioConfig:
    """Assemble a validated ScenarioConfig from flags and an optional file.

    Precedence: defaults < config file < flags.  Validation errors name the
    offending field.
    """
    args = _build_parser().parse_args(argv)
    if args.command != "run":
        raise ConfigError("command", "parse_config handles plain runs only")
    return _assemble_config(args, config_file)


def _assemble_config(args: argparse.Namespace, config_file: str | None = None) -> ScenarioConfig:
    fields = {
        "mode": "sse",
        "unraveling": None,
        "variant": None,
        "delta": DEFAULT_DELTA,
        "gamma": None,
        "dt": DEFAULT_DT,
        "t_final": DEFAULT_T_FINAL,
        "n_traj": DEFAULT_N_TRAJ,
        "seed": DEFAULT_SEED,
        "output": "out.csv",
        "emit": "ensemble",
    }
    path = config_file or args.config
    if path:
        fields.update(_read_config_file(path))
    supplied = {
        key: getattr(args, key)
        for key in _FILE_KEYS
        if getattr(args, key, None) is not None
    }
    fields.update(supplied)

    mode = fields["mode"]
    if mode in ("exact", "master"):
        for key in ("unraveling", "variant"):
            if fields[key] is not None:
                raise ConfigError(key, f"not valid with mode={mode}")
        if mode == "exact" and fields["gamma"] is not None:
            raise ConfigError("gamma", "not valid with mode=exact")
    elif mode == "sse":
        if fields["unraveling"] is None:
            fields["unraveling"] = "coherent"
        if fields["variant"] is None:
            fields["variant"] = "actual"

    cfg = ScenarioConfig(
        mode=mode,
        unraveling=fields["unraveling"],
        variant=fields["variant"],
        delta=fields["delta"],
        gamma=fields["gamma"],
        dt=fields["dt"],
        t_final=fields["t_final"],
        n_traj=fields["n_traj"],
        master_seed=fields["seed"],
        output_path=fields["output"],
        emit=fields["emit"],
    )
    return cfg.validate()


def _fmt(v: float) -> str:
    return "%.17g" % v


def emit_csv(result, path: str) -> None:
    """Write one curve as CSV: header t,x,y,z,norm[,x_se,y_se,z_se].

    17 significant digits, LF line endings; byte output is deterministic
    for a given result.
    """
    times = result.grid.times
    has_se = hasattr(result, "x_se")
    header = "t,x,y,z,norm,x_se,y_se,z_se" if has_se else "t,x,y,z,norm"
    cols = [times, result.x, result.y, result.z, result.norm]
    if has_se:
        cols += [result.x_se, result.y_se, result.z_se]
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _resolve_threads(args: argparse.Namespace) -> int:
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    env = os.environ.get("NMSSE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("threads", f"NMSSE_THREADS={env!r} is not an integer") from None
    return min(8, os.cpu_count() or 1)


def _paths_for(cfg: ScenarioConfig) -> dict:
    base = Path(cfg.output_path)
    if cfg.emit == "both":
        return {
            "ensemble": str(base.with_name(base.stem + "_ensemble" + (base.suffix or ".csv"))),
            "trajectory": str(base.with_name(base.stem + "_trajectory" + (base.suffix or ".csv"))),
        }
    return {cfg.emit: cfg.output_path}


def _exact_reference(cfg: ScenarioConfig):
    if cfg.unraveling in MARKOV_UNRAVELINGS:
        model = SystemModel.tla()
        rho0 = DensityMatrix(np.array([[1, 0], [0, 0]], dtype=complex))
        return lindblad_bloch_series(model, cfg.gamma, rho0, cfg.grid)
    return exact_bloch_series(cfg.g, cfg.delta, cfg.grid)


def _run_scenario(cfg: ScenarioConfig, args: argparse.Namespace) -> int:
    if cfg.mode == "exact":
        emit_csv(exact_bloch_series(cfg.g, cfg.delta, cfg.grid), cfg.output_path)
        print(f"wrote {cfg.output_path}")
        return 0
    if cfg.mode == "master":
        model = SystemModel.tla()
        rho0 = DensityMatrix(np.array([[1, 0], [0, 0]], dtype=complex))
        emit_csv(lindblad_bloch_series(model, cfg.gamma, rho0, cfg.grid), cfg.output_path)
        print(f"wrote {cfg.output_path}")
        return 0

    threads = _resolve_threads(args)
    paths = _paths_for(cfg)
    result = None
    if "ensemble" in paths:
        result = ensemble_mod.run_ensemble(cfg, workers=threads)
        emit_csv(result, paths["ensemble"])
        print(f"wrote {paths['ensemble']} ({cfg.n_traj} trajectories)")
    if "trajectory" in paths:
        record = run_trajectory(cfg, 0)
        emit_csv(record, paths["trajectory"])
        print(f"wrote {paths['trajectory']} (trajectory 0)")

    if args.compare_exact:
        if result is None:
            raise ConfigError("emit", "--compare-exact needs an ensemble run")
        reference = _exact_reference(cfg).bloch_list()
        report = ensemble_mod.compare(result, reference, tolerance=args.compare_tolerance)
        for comp in ("x", "y", "z"):
            print(
                f"compare {comp}: max_dev={report.max_abs[comp]:.6g} "
                f"inside_3se={report.inside_3se_fraction[comp]:.3f}"
            )
        if not report.passed:
            worst = report.worst_component()
            print(
                f"ERROR comparison field={worst} max_dev={report.max_abs[worst]:.6g} "
                f"tolerance={report.tolerance:.6g}",
                file=sys.stderr,
            )
            return 1
        print(f"comparison passed (tolerance {report.tolerance:g})")
    return 0


def _reproduce_figures(args: argparse.Namespace) -> int:
    out_dir = Path(args.output_dir or "figures_csv")
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = _resolve_threads(args)
    dt = args.dt if args.dt is not None else DEFAULT_DT
    t_final = args.t_final if args.t_final is not None else DEFAULT_T_FINAL
    n_traj = args.n_traj if args.n_traj is not None else DEFAULT_N_TRAJ
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    delta = args.delta if args.delta is not None else DEFAULT_DELTA
    base = dict(delta=delta, dt=dt, t_final=t_final, n_traj=n_traj, master_seed=seed)

    exact_cfg = ScenarioConfig(
        mode="exact", unraveling=None, variant=None, gamma=None, **base
    ).validate()
    exact_curve = exact_bloch_series(exact_cfg.g, exact_cfg.delta, exact_cfg.grid)
    for name in ("fig1_exact.csv", "fig3_exact.csv"):
        emit_csv(exact_curve, str(out_dir / name))
        print(f"wrote {out_dir / name}")

    runs = [
        ("fig1_linear.csv", "coherent", "linear", "ensemble"),
        ("fig1_actual.csv", "coherent", "actual", "ensemble"),
        ("fig3_linear.csv", "quadrature", "linear", "ensemble"),
        ("fig3_actual.csv", "quadrature", "actual", "ensemble"),
        ("fig2_coherent.csv", "coherent", "actual", "trajectory"),
        ("fig2_quadrature.csv", "quadrature", "actual", "trajectory"),
    ]
    for name, unraveling, variant, emit in runs:
        cfg = ScenarioConfig(mode="sse", unraveling=unraveling, variant=variant, **base).validate()
        path = str(out_dir / name)
        if emit == "ensemble":
            emit_csv(ensemble_mod.run_ensemble(cfg, workers=threads), path)
        else:
            emit_csv(run_trajectory(cfg, 0), path)
        print(f"wrote {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = _build_parser().parse_args(argv)
        if args.command == "reproduce-figures":
            return _reproduce_figures(args)
        cfg = _assemble_config(args)
        return _run_scenario(cfg, args)
    except ConfigError as exc:
        print(f"ERROR config field={exc.field} message={exc.message}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single reporting point for run failures
        print(f"ERROR run message={exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
