"""Gibbs sampling on discrete factor graphs with minibatched energy estimates."""

from .chain_analysis import (GapBoundResult, GapCheckConfig, SpectrumReport, TransitionMatrix, augmented_pi,
                             augmented_states, brute_force_pi, check_reversibility, empirical_matrix,
                             exact_gibbs_matrix, exact_min_gibbs_matrix, mixing_time_bound, spectral_gap,
                             verify_gap_bounds)
from .errors import (InvalidGraphError, InvalidParameterError, InvalidStateError, MiniGibbsError,
                     NotReversibleError, ObserverError, PreconditionError, StateSpaceTooLargeError)
from .estimators import (PoissonEstimator, PoissonMinibatchConfig, SparseCounts, TwoPointEstimator,
                         make_two_point_estimator, recommended_batch_size, sample_poisson_counts,
                         unbiased_energy_estimate)
from .factor_graph import (Factor, FactorGraph, GraphStats, energy, local_energy, parse_graph, read_graph, stats,
                           write_graph)
from .harness import ExperimentConfig, MarginalTracker, cost_report, marginal_error, run_experiment
from .model_zoo import GridModelConfig, make_ising, make_potts
from .samplers import (MGPMH, ChainState, DoubleMinGibbs, Gibbs, LocalMinibatchGibbs, MinGibbs, StepRecord,
                       init_state, run_chain, step)

__version__ = "0.1.0"
