"""Steppers against the explicit two-level amplitude ODEs, and orchestration.

The generic matrix steppers are checked against hand-written right-hand
sides of the benchmark's amplitude equations (the primary guard against
transcription errors), and run_trajectory is checked against a manual
composition of the public steppers with the reference noise shift.
"""

import numpy as np
import pytest

from nmsse import (
    BathConfig,
    ExpectationHistory,
    NoisePath,
    ScenarioConfig,
    SystemModel,
    SystemState,
    TimeGrid,
    TrajectoryError,
    bloch_from_state,
    expectation,
    girsanov_shift,
    markov_record,
    run_trajectory,
    sample_coherent,
    sample_quadrature,
    solve_ansatz,
    step_actual,
    step_linear,
    step_markov,
    synthesize_noise,
    trajectory_rng,
)
from nmsse.sse import build_scenario, propagate_block

MODEL = SystemModel.tla()


def _random_state(rng, normalized=True):
    amps = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    if normalized:
        amps = amps / np.linalg.norm(amps)
    return SystemState(amps)


# --- explicit amplitude-ODE oracles (independent of the package code) -------


def _linear_rhs(ce, cb, f, w):
    # w is z*(t) (coherent) or the real z(t) (quadrature): same equations
    return -f * ce, w * ce


def _actual_coherent_rhs(ce, cb, f, zst):
    d_e = -(ce**2) * np.conj(cb) * zst + f * ce * (
        -1.0 + abs(ce) ** 2 - abs(ce) ** 2 * abs(cb) ** 2
    )
    d_b = ce * (1.0 - abs(cb) ** 2) * zst + f * cb * abs(ce) ** 2 * (2.0 - abs(cb) ** 2)
    return d_e, d_b


def _actual_quadrature_rhs(ce, cb, f, z):
    d_e = (
        f * ce * (-1.0 + abs(ce) ** 2 - abs(ce) ** 2 * abs(cb) ** 2)
        - f * ce**3 * np.conj(cb) ** 2
        - ce**2 * np.conj(cb) * z
    )
    d_b = (
        f * cb * abs(ce) ** 2 * (2.0 - abs(cb) ** 2)
        + f * np.conj(cb) * ce**2 * (1.0 - abs(cb) ** 2)
        + ce * (1.0 - abs(cb) ** 2) * z
    )
    return d_e, d_b


def test_step_linear_matches_amplitude_odes():
    rng = np.random.default_rng(51)
    dt = 1e-3
    for unraveling in ("coherent", "quadrature"):
        for _ in range(100):
            state = _random_state(rng, normalized=False)
            f = complex(*rng.standard_normal(2))
            if unraveling == "coherent":
                w = complex(*rng.standard_normal(2))
            else:
                w = complex(rng.standard_normal())
            ce, cb = state.amplitudes
            d_e, d_b = _linear_rhs(ce, cb, f, w)
            expected = np.array([ce + dt * d_e, cb + dt * d_b])
            out = step_linear(state, MODEL, f, w, dt, unraveling).amplitudes
            assert np.abs(out - expected).max() < 1e-14


def test_step_linear_trivial_cases():
    state = SystemState(np.array([0.3 + 0.1j, -0.2j]))
    out = step_linear(state, MODEL, 0j, 0j, 1e-2)
    assert np.array_equal(out.amplitudes, state.amplitudes)
    w = 0.4 - 0.7j
    out = step_linear(SystemState(np.array([1, 0], dtype=complex)), MODEL, 0j, np.conj(w), 1e-3)
    assert out.amplitudes[0] == 1.0
    assert out.amplitudes[1] == pytest.approx(np.conj(w) * 1e-3, abs=1e-18)


def test_step_actual_coherent_matches_cubic_odes():
    rng = np.random.default_rng(52)
    dt = 1e-3
    for _ in range(100):
        state = _random_state(rng)
        f = complex(*rng.standard_normal(2))
        zst = complex(*rng.standard_normal(2))
        ce, cb = state.amplitudes
        d_e, d_b = _actual_coherent_rhs(ce, cb, f, zst)
        expected = np.array([ce + dt * d_e, cb + dt * d_b])
        out = step_actual(state, MODEL, f, zst, dt, "coherent").amplitudes
        assert np.abs(out - expected).max() < 1e-12


def test_step_actual_quadrature_matches_cubic_odes():
    rng = np.random.default_rng(53)
    dt = 1e-3
    for _ in range(100):
        state = _random_state(rng)
        f = complex(*rng.standard_normal(2))
        z = float(rng.standard_normal())
        ce, cb = state.amplitudes
        d_e, d_b = _actual_quadrature_rhs(ce, cb, f, z)
        expected = np.array([ce + dt * d_e, cb + dt * d_b])
        out = step_actual(state, MODEL, f, z, dt, "quadrature").amplitudes
        assert np.abs(out - expected).max() < 1e-12


def test_step_actual_from_excited_state():
    # at (1, 0) the F-terms vanish and the noise feeds C_b at full weight
    zst = 0.8 + 0.5j
    f = 1.3 - 0.2j
    out = step_actual(SystemState(np.array([1, 0], dtype=complex)), MODEL, f, zst, 1e-3)
    assert out.amplitudes[0] == pytest.approx(1.0, abs=1e-15)
    assert out.amplitudes[1] == pytest.approx(zst * 1e-3, abs=1e-16)


def test_step_actual_zero_norm_raises():
    state = SystemState(np.zeros(2, dtype=complex))
    with pytest.raises(ValueError, match="norm"):
        step_actual(state, MODEL, 0j, 0j, 1e-3)
    with pytest.raises(ValueError, match="norm"):
        step_markov(state, MODEL, 1.0, 0j, 1e-3, "actual", "heterodyne")


# --- Markov steppers ---------------------------------------------------------


def test_markov_linear_heterodyne_pure_damping():
    # with the noise term removed the update is pure damping of C_e
    gamma = 0.7
    dt = 1e-3
    state = SystemState(np.array([0.6 + 0.2j, 0.3 - 0.1j]))
    out = step_markov(state, MODEL, gamma, 0j, dt, "linear", "heterodyne")
    assert out.amplitudes[0] == pytest.approx(state.amplitudes[0] * (1 - gamma * dt / 2))
    assert out.amplitudes[1] == state.amplitudes[1]


def test_markov_steppers_match_ito_forms():
    # hand-expanded Ito right-hand sides for the two-level model
    rng = np.random.default_rng(54)
    gamma = 1.2
    dt = 1e-3
    for _ in range(100):
        state = _random_state(rng)
        ce, cb = state.amplitudes
        z = complex(*rng.standard_normal(2))

        # linear heterodyne: d psi = dt(-gamma/2 LdL psi) + (z* dt) L psi
        out = step_markov(state, MODEL, gamma, z, dt, "linear", "heterodyne").amplitudes
        exp_e = ce - dt * (gamma / 2) * ce
        exp_b = cb + np.conj(z) * dt * ce
        assert np.abs(out - np.array([exp_e, exp_b])).max() < 1e-14

        # linear homodyne with real z
        zr = float(z.real)
        out = step_markov(state, MODEL, gamma, zr, dt, "linear", "homodyne").amplitudes
        exp_b = cb + zr * dt * ce
        assert np.abs(out - np.array([exp_e, exp_b])).max() < 1e-14

        # actual heterodyne: caller supplies the shifted noise
        exp_l = np.conj(cb) * ce
        exp_ld = np.conj(exp_l)
        zst = np.conj(z) + (gamma / 2) * exp_ld
        out = step_markov(
            state, MODEL, gamma, np.conj(zst), dt, "actual", "heterodyne"
        ).amplitudes
        lpsi = np.array([0j, ce])
        ldlpsi = np.array([ce, 0j])
        psi = state.amplitudes
        det = -(gamma / 2) * (ldlpsi - exp_ld * lpsi)
        expected = psi + dt * det + (zst * dt) * (lpsi - exp_l * psi)
        assert np.abs(out - expected).max() < 1e-13

        # actual homodyne
        zshift = zr + (gamma / 2) * (2 * exp_l.real)
        out = step_markov(state, MODEL, gamma, zshift, dt, "actual", "homodyne").amplitudes
        det = -(gamma / 2) * (ldlpsi - exp_ld * lpsi + exp_l * lpsi - exp_l * exp_l * psi)
        expected = psi + dt * det + (zshift * dt) * (lpsi - exp_l * psi)
        assert np.abs(out - expected).max() < 1e-13


def test_markov_record_factors():
    z_lam = 0.3 - 0.2j
    exp_l = 0.5 + 0.1j
    gamma = 1.4
    current = markov_record(z_lam, exp_l, gamma, "heterodyne")
    conditioning = z_lam + (gamma / 2) * exp_l
    assert current - conditioning == pytest.approx((gamma / 2) * exp_l)
    assert markov_record(z_lam, 0.0, gamma, "heterodyne") == z_lam
    assert markov_record(z_lam, exp_l, 0.0, "homodyne") == z_lam
    with pytest.raises(ValueError):
        markov_record(z_lam, exp_l, gamma, "counting")


# --- trajectory orchestration ------------------------------------------------


def _quick_cfg(unraveling, variant, **kw):
    base = dict(dt=1e-2, t_final=0.5, n_traj=4)
    base.update(kw)
    if unraveling in ("heterodyne", "homodyne"):
        base.setdefault("gamma", 1.0)
    return ScenarioConfig(unraveling=unraveling, variant=variant, **base).validate()


def test_decoupled_system_stays_excited():
    for unraveling in ("coherent", "quadrature"):
        for variant in ("linear", "actual"):
            cfg = _quick_cfg(unraveling, variant, g=0.0)
            rec = run_trajectory(cfg, 0)
            assert np.all(rec.x == 0.0)
            assert np.all(rec.y == 0.0)
            assert np.all(rec.z == 1.0)
            assert np.all(rec.norm == 1.0)


def test_trajectory_determinism():
    cfg = _quick_cfg("coherent", "actual")
    a = run_trajectory(cfg, 2)
    b = run_trajectory(cfg, 2)
    for name in ("x", "y", "z", "norm"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = run_trajectory(cfg, 3)
    assert not np.array_equal(a.z, c.z)


def test_quadrature_trajectory_real_arithmetic():
    cfg = _quick_cfg("quadrature", "actual", dt=1e-3, t_final=1.0)
    rec = run_trajectory(cfg, 1)
    assert rec.noise_kind == "quadrature"
    assert np.all(rec.y == 0.0)  # exactly: the state never leaves the real axis


def test_block_rows_match_single_runs():
    for unraveling, variant in (
        ("coherent", "linear"),
        ("coherent", "actual"),
        ("quadrature", "actual"),
        ("heterodyne", "actual"),
        ("homodyne", "linear"),
    ):
        cfg = _quick_cfg(unraveling, variant)
        setup = build_scenario(cfg)
        x, y, z, w = propagate_block(setup, 0, 4)
        for idx in range(4):
            rec = run_trajectory(cfg, idx)
            assert np.array_equal(x[idx], rec.x), (unraveling, variant, idx)
            assert np.array_equal(y[idx], rec.y)
            assert np.array_equal(z[idx], rec.z)
            assert np.array_equal(w[idx], rec.norm)


def _manual_colored_trajectory(cfg, traj_index):
    """Reference composition: public steppers + girsanov_shift + history."""
    grid = cfg.grid
    bath = BathConfig.two_mode(cfg.g, cfg.delta)
    ansatz = solve_ansatz(cfg.g, cfg.delta, grid)
    rng = trajectory_rng(cfg.master_seed, traj_index)
    coherent = cfg.unraveling == "coherent"
    if coherent:
        path = synthesize_noise(bath, sample_coherent(bath, rng), grid)
        stepper_path = NoisePath(grid, np.conj(path.values), "coherent")
    else:
        stepper_path = synthesize_noise(bath, sample_quadrature(bath, rng), grid)
    state = SystemState(np.array([1, 0], dtype=complex))
    history = ExpectationHistory()
    ld = MODEL.lindblad.conj().T
    lx = MODEL.lindblad_x
    records = []
    for i in range(grid.n_points):
        records.append(bloch_from_state(state))
        if i == grid.n_steps:
            break
        f_t = complex(ansatz.f_total[i])
        if cfg.variant == "linear":
            state = step_linear(state, MODEL, f_t, complex(stepper_path.values[i]), grid.dt, cfg.unraveling)
        else:
            z_shift = girsanov_shift(stepper_path, history, bath, i)
            h = expectation(state, ld) if coherent else expectation(state, lx)
            state = step_actual(state, MODEL, f_t, z_shift, grid.dt, cfg.unraveling)
            history.append(h)
    return records


@pytest.mark.parametrize(
    "unraveling,variant",
    [
        ("coherent", "linear"),
        ("coherent", "actual"),
        ("quadrature", "linear"),
        ("quadrature", "actual"),
    ],
)
def test_run_trajectory_matches_stepper_composition(unraveling, variant):
    cfg = _quick_cfg(unraveling, variant, dt=1e-2, t_final=0.8)
    rec = run_trajectory(cfg, 1)
    manual = _manual_colored_trajectory(cfg, 1)
    x = np.array([b.x for b in manual])
    y = np.array([b.y for b in manual])
    z = np.array([b.z for b in manual])
    w = np.array([b.norm for b in manual])
    if variant == "linear":
        # no convolution involved: the composition is arithmetic-identical
        assert np.array_equal(rec.x, x)
        assert np.array_equal(rec.y, y)
        assert np.array_equal(rec.z, z)
        assert np.array_equal(rec.norm, w)
    else:
        # running-sum convolution vs the direct sum: same rule, different
        # floating-point association
        for got, ref in ((rec.x, x), (rec.y, y), (rec.z, z), (rec.norm, w)):
            assert np.abs(got - ref).max() < 1e-9


def _manual_markov_trajectory(cfg, traj_index):
    from nmsse import sample_markov_noise

    grid = cfg.grid
    rng = trajectory_rng(cfg.master_seed, traj_index)
    kind = "heterodyne" if cfg.unraveling == "heterodyne" else "homodyne"
    draw = "complex" if kind == "heterodyne" else "real"
    path = sample_markov_noise(cfg.gamma, grid, draw, rng)
    ld = MODEL.lindblad.conj().T
    lx = MODEL.lindblad_x
    state = SystemState(np.array([1, 0], dtype=complex))
    records = []
    for i in range(grid.n_points):
        records.append(bloch_from_state(state))
        if i == grid.n_steps:
            break
        z = complex(path.values[i])
        if cfg.variant == "actual":
            if kind == "heterodyne":
                z = z + (cfg.gamma / 2) * expectation(state, MODEL.lindblad)
            else:
                z = z + (cfg.gamma / 2) * expectation(state, lx).real
        state = step_markov(state, MODEL, cfg.gamma, z, grid.dt, cfg.variant, kind)
    return records


@pytest.mark.parametrize(
    "unraveling,variant",
    [
        ("heterodyne", "linear"),
        ("heterodyne", "actual"),
        ("homodyne", "linear"),
        ("homodyne", "actual"),
    ],
)
def test_run_trajectory_matches_markov_composition(unraveling, variant):
    cfg = _quick_cfg(unraveling, variant, dt=1e-3, t_final=0.1)
    rec = run_trajectory(cfg, 0)
    manual = _manual_markov_trajectory(cfg, 0)
    cols = [np.array([getattr(b, name) for b in manual]) for name in ("x", "y", "z", "norm")]
    if unraveling == "homodyne" and variant == "actual":
        # the engine's real-dtype path divides float/float while the complex
        # steppers go through numpy's complex-division kernel; the normalized
        # expectations can differ in the last ulp
        for got, ref in zip((rec.x, rec.y, rec.z, rec.norm), cols):
            assert np.abs(got - ref).max() < 1e-12
    else:
        for got, ref in zip((rec.x, rec.y, rec.z, rec.norm), cols):
            assert np.array_equal(got, ref)


def test_actual_norm_stays_near_one_quick():
    cfg = _quick_cfg("coherent", "actual", dt=1e-3, t_final=3.0)
    rec = run_trajectory(cfg, 0)
    assert np.abs(np.sqrt(rec.norm) - 1.0).max() < 1e-2


def test_trajectory_error_carries_index():
    cfg = ScenarioConfig(
        unraveling="coherent", variant="actual", delta=0.0, dt=1e-3, t_final=2.0, n_traj=1
    ).validate()
    with pytest.raises(TrajectoryError, match="trajectory 5"):
        run_trajectory(cfg, 5)


def test_run_trajectory_rejects_non_sse_modes():
    cfg = ScenarioConfig(mode="exact", unraveling=None, variant=None).validate()
    with pytest.raises(TrajectoryError, match="mode"):
        run_trajectory(cfg, 0)
