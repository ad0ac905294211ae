"""Monitored qubit-chain simulator with Lyapunov-spectrum analysis."""

__version__ = "0.1.0"

from .analysis import (
    GapFitResult,
    PauliWeightProfile,
    WidthBoundCheck,
    fit_gap_extrapolation,
    measurement_only_gap,
    pauli_weight_profile,
    width_bound,
)
from .channel import (
    CircuitSchedule,
    KrausPair,
    TrajectoryRecord,
    TrajectoryStreams,
    evolve_one_step,
    replay,
    sample_haar_unitary,
    sample_trajectory,
)
from .entanglement import (
    EntropySeries,
    MutualInformationSeries,
    measure_entropy_series,
    mutual_information_series,
)
from .harness import ExperimentConfig, memory_loss_experiment, run_experiment
from .lyapunov import (
    EffectiveHamiltonian,
    GapEstimate,
    GramSchmidtEngine,
    LyapunovEstimate,
    RankCollapseError,
    lyapunov_block_step,
    relaxation_time,
    run_full_spectrum,
    run_gap_estimate,
)
from .mixedsim import PurificationSeries, evolve_mixed_step, purification_gap
from .states import (
    MixedState,
    PureState,
    ReducedDensityMatrix,
    TrajectoryAnnihilatedError,
    apply_single_site_operator,
    apply_two_qubit_gate,
    partial_trace,
    von_neumann_entropy,
)
