"""Constrained continuous-time hidden Markov models of disease progression.

Learns chain-structured CT-HMMs from irregularly sampled longitudinal
visits with categorical biomarkers, runs a split/state-count/init model
selection grid, and produces decoded trajectories, dwell times, and
transition analytics for the CLI, HTTP API, and browser explorer.
"""

from .errors import (
    CohortParseError,
    DegenerateLikelihoodError,
    QueryParseError,
    SchemaError,
    StarvedStateWarning,
)
from .inference import (
    dataset_loglik,
    forward_backward,
    forward_filter,
    viterbi,
)
from .linalg import conditioned_moments, expm, transition_matrix, vanloan_integrals
from .model import MISSING, NEGATIVE, POSITIVE, ChainModel, Cohort, TransitionMask, VisitSequence
from .outputs import (
    LabeledCohort,
    TrajectorySegment,
    dwell_times,
    horizon_matrix,
    label_cohort,
    segment_trajectories,
    state_summary,
    subgroup_filter,
    timeline_bands,
)
from .selection import (
    ExperimentResult,
    GridSpec,
    SelectionReport,
    bic,
    param_count,
    run_grid,
    select_k,
    split_subjects,
)
from .synth import SimSpec, simulate_cohort, simulate_path
from .training import FitResult, TrainConfig, bootstrap_ll, em_fit, init_random

__version__ = "0.1.0"

__all__ = [
    "ChainModel",
    "Cohort",
    "CohortParseError",
    "DegenerateLikelihoodError",
    "ExperimentResult",
    "FitResult",
    "GridSpec",
    "LabeledCohort",
    "MISSING",
    "NEGATIVE",
    "POSITIVE",
    "QueryParseError",
    "SchemaError",
    "SelectionReport",
    "SimSpec",
    "StarvedStateWarning",
    "TrainConfig",
    "TrajectorySegment",
    "TransitionMask",
    "VisitSequence",
    "bic",
    "bootstrap_ll",
    "conditioned_moments",
    "dataset_loglik",
    "dwell_times",
    "em_fit",
    "expm",
    "forward_backward",
    "forward_filter",
    "horizon_matrix",
    "init_random",
    "label_cohort",
    "param_count",
    "run_grid",
    "segment_trajectories",
    "select_k",
    "simulate_cohort",
    "simulate_path",
    "split_subjects",
    "state_summary",
    "subgroup_filter",
    "timeline_bands",
    "transition_matrix",
    "vanloan_integrals",
    "viterbi",
]
