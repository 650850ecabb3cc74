"""Entropy of chains induced by coarse-graining piecewise-linear interval maps."""

from .chain import (
    TransitionMatrix,
    build_transition_matrix,
    preimage_measure,
    verify_doubly_stochastic,
)
from .conjugacy import (
    ConjugateSystem,
    Homeomorphism,
    conjugate_evaluate,
    logistic_system,
    monte_carlo_conjugate_matrix,
    pushforward_partition,
    transition_matrix_conjugate,
)
from .entropy import (
    EntropyReport,
    cell_entropy_closed_form,
    entropy_defect,
    entropy_report,
    equidistribution_average,
    phi,
    predicted_limit,
    rho,
    shannon_entropy,
    skew_tent,
)
from .maps import (
    PiecewiseLinearMap,
    SlopeClass,
    derivative_magnitude,
    evaluate,
    lyapunov_exponent,
    make_map,
    verify_lebesgue_invariance,
)
from .noise import (
    Trajectory,
    empirical_entropy,
    empirical_transition_matrix,
    sample_noise_point,
    simulate_chain,
    step_point,
    step_state,
)
from .partition import EquivolumePartition, cell, project, uniform_partition
from .sweep import SweepConfig, run_simulation_check, run_sweep

__version__ = "0.1.0"
