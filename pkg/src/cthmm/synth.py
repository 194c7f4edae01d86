"""Synthetic cohort generation.

Ground-truth oracle for parameter recovery, elbow recovery, and
Monte-Carlo dwell checks. Cohort shape follows the observational data
the model family targets: irregular visit times with log-normal
intervals, a follow-up cap, and completely-at-random marker dropout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import MISSING, ChainModel, Cohort, VisitSequence

DEFAULT_INTERVAL_MEAN = 0.8
DEFAULT_INTERVAL_SD = 0.94
DEFAULT_FOLLOWUP_CAP = 15.0
DEFAULT_MISSINGNESS = 0.1


def lognormal_params(mean: float, sd: float) -> tuple[float, float]:
    """(mu, sigma) of the log-normal with the given mean and sd, by moment matching."""
    if mean <= 0 or sd <= 0:
        raise ValueError(f"interval mean and sd must be positive, got {mean}, {sd}")
    sigma_sq = math.log(1.0 + (sd / mean) ** 2)
    mu = math.log(mean) - 0.5 * sigma_sq
    return mu, math.sqrt(sigma_sq)


@dataclass
class SimSpec:
    model: ChainModel
    n_subjects: int
    interval_mean: float = DEFAULT_INTERVAL_MEAN
    interval_sd: float = DEFAULT_INTERVAL_SD
    followup_cap: float = DEFAULT_FOLLOWUP_CAP
    missingness: float = DEFAULT_MISSINGNESS
    initial_distribution: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ValueError(f"n_subjects must be >= 1, got {self.n_subjects}")
        if self.interval_mean <= 0:
            raise ValueError(f"interval mean must be > 0, got {self.interval_mean}")
        if not 0.0 <= self.missingness < 1.0:
            raise ValueError(f"missingness must be in [0, 1), got {self.missingness}")
        if self.followup_cap <= 0:
            raise ValueError(f"followup_cap must be > 0, got {self.followup_cap}")
        if self.initial_distribution is not None:
            pi = np.asarray(self.initial_distribution, dtype=float)
            if pi.shape != (self.model.n_states,) or np.any(pi < 0):
                raise ValueError("initial_distribution must be a nonnegative length-K vector")
            total = pi.sum()
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"initial_distribution must sum to 1, got {total}")
            self.initial_distribution = pi


@dataclass
class StatePath:
    """Piecewise-constant trajectory: state ``states[j]`` holds on
    [jump_times[j], jump_times[j+1]), the last segment extending to t_end."""

    jump_times: np.ndarray
    states: np.ndarray
    t_end: float

    def state_at(self, t) -> np.ndarray | np.intp:
        idx = np.searchsorted(self.jump_times, t, side="right") - 1
        return self.states[idx]

    @property
    def n_jumps(self) -> int:
        return len(self.states) - 1


@dataclass
class SimResult:
    cohort: Cohort
    true_states: dict[str, np.ndarray] = field(repr=False)
    paths: dict[str, StatePath] = field(repr=False)


def simulate_path(
    model: ChainModel,
    t_end: float,
    seed: int | np.random.Generator,
    initial_state: int | None = None,
) -> StatePath:
    """Gillespie simulation of one trajectory on [0, t_end].

    Sojourn in state i is exponential with the exit rate -Q[i,i]; the jump
    lands on edge (i, j) with probability proportional to Q[i,j]. A state
    with exit rate 0 is absorbing.
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    K = model.n_states
    if initial_state is None:
        state = int(rng.choice(K, p=model.pi))
    else:
        if not 0 <= initial_state < K:
            raise ValueError(f"initial_state out of range: {initial_state}")
        state = int(initial_state)
    times = [0.0]
    states = [state]
    t = 0.0
    while True:
        exit_rate = -model.Q[state, state]
        if exit_rate <= 0.0:
            break
        t += rng.exponential(1.0 / exit_rate)
        if t > t_end:
            break
        rates = model.Q[state].copy()
        rates[state] = 0.0
        state = int(rng.choice(K, p=rates / rates.sum()))
        times.append(t)
        states.append(state)
    return StatePath(np.array(times), np.array(states, dtype=np.int64), t_end)


def _visit_times(rng: np.random.Generator, mu: float, sigma: float, cap: float) -> np.ndarray:
    times = [0.0]
    t = 0.0
    while True:
        t += rng.lognormal(mean=mu, sigma=sigma)
        if t > cap:
            break
        times.append(t)
    return np.array(times)


def simulate_cohort(spec: SimSpec) -> SimResult:
    """Simulate a cohort of irregularly observed trajectories.

    Per subject, in a fixed draw order on a stream derived from
    (seed, subject index): initial state, path jumps, visit intervals,
    marker emissions, then the missingness mask. The returned true states
    are the path states at the visit times, exactly.
    """
    model = spec.model
    mu, sigma = lognormal_params(spec.interval_mean, spec.interval_sd)
    pi = spec.initial_distribution if spec.initial_distribution is not None else model.pi
    M = model.n_markers
    sequences = []
    true_states: dict[str, np.ndarray] = {}
    paths: dict[str, StatePath] = {}
    for i in range(spec.n_subjects):
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(i,)))
        subject_id = f"S{i:06d}"
        start = int(rng.choice(model.n_states, p=pi))
        path = simulate_path(model, spec.followup_cap, rng, initial_state=start)
        times = _visit_times(rng, mu, sigma, spec.followup_cap)
        visit_states = np.asarray(path.state_at(times), dtype=np.int64)
        positive = rng.random((len(times), M)) < model.emissions[visit_states]
        obs = positive.astype(np.int8)
        if spec.missingness > 0.0:
            obs[rng.random((len(times), M)) < spec.missingness] = MISSING
        sequences.append(
            VisitSequence(subject_id=subject_id, times=times, observations=obs)
        )
        true_states[subject_id] = visit_states
        paths[subject_id] = path
    cohort = Cohort(sequences=sequences, marker_names=model.marker_names)
    return SimResult(cohort=cohort, true_states=true_states, paths=paths)
