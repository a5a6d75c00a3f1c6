"""Non-Markovian stochastic Schrodinger equation simulator.

Simulates conditioned two-level-atom dynamics driven by discrete-mode
baths through coherent-state and quadrature unravelings, in both linear
(ostensible-measure) and actual (normalized) form, together with their
heterodyne/homodyne Markov limits and the exact oracles used to verify
that ensemble averages reproduce the reduced density matrix.
"""

from .ansatz import AnsatzDivergenceError, AnsatzSolution, kernel_equivalence_check, solve_ansatz
from .bath import (
    BathConfig,
    BathMode,
    ExpectationHistory,
    ModeSample,
    NoisePath,
    QuadSample,
    girsanov_shift,
    memory_kernel,
    sample_coherent,
    sample_markov_noise,
    sample_quadrature,
    synthesize_noise,
    trajectory_rng,
)
from .config import ConfigError, ScenarioConfig
from .ensemble import (
    BLOCK_SIZE,
    DeviationReport,
    EnsembleError,
    EnsembleResult,
    compare,
    run_ensemble,
)
from .grid import TimeGrid
from .models import (
    BlochSeries,
    BlochVector,
    DensityMatrix,
    ExactAmplitudes,
    SystemModel,
    SystemState,
    bloch_from_exact,
    bloch_from_state,
    exact_bloch_series,
    exact_evolve,
    lindblad_bloch_series,
    lindblad_evolve,
    reduced_density_from_exact,
)
from .sse import (
    TrajectoryError,
    TrajectoryRecord,
    build_scenario,
    expectation,
    markov_record,
    run_trajectory,
    step_actual,
    step_linear,
    step_markov,
)

__version__ = "0.1.0"
