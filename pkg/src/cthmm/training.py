"""EM parameter estimation under a transition mask."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import StarvedStateWarning
from .inference import (
    _DT_QUANTUM,
    _backward,
    _forward,
    emission_matrix,
    forward_filter,
    quantize_dts,
)
from .linalg import transition_matrix, weighted_moment_integrals
from .model import MISSING, POSITIVE, ChainModel, Cohort, TransitionMask

# A state whose total expected occupation falls below this is starved:
# its parameters are left untouched for that iteration.
STARVATION_FLOOR = 1e-12


@dataclass
class TrainConfig:
    """Knobs for one EM fit."""

    n_states: int
    mask_preset: str = "chain"
    max_iterations: int = 500
    tolerance: float = 1e-6  # absolute LL improvement
    seed: int = 0
    emission_clamp: tuple[float, float] = (1e-6, 1.0 - 1e-6)
    rate_floor: float = 1e-8  # /year, applied to allowed edges during iteration

    def __post_init__(self):
        if self.n_states < 1:
            raise ValueError(f"n_states must be >= 1, got {self.n_states}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 0:
            raise ValueError(f"max_iterations must be >= 0, got {self.max_iterations}")
        lo, hi = self.emission_clamp
        if not (0 < lo < hi < 1):
            raise ValueError(f"emission clamp bounds must satisfy 0 < lo < hi < 1, got {self.emission_clamp}")


@dataclass
class FitResult:
    model: ChainModel
    ll_trace: list[float]
    iterations: int
    converged: bool
    starved_states: list[int] = field(default_factory=list)

    @property
    def final_ll(self) -> float:
        return self.ll_trace[-1]


def init_random(config: TrainConfig, cohort: Cohort) -> ChainModel:
    """Random starting point: uniform pi, rates in [0.05, 1.0], emissions in [0.05, 0.95].

    Under an order-respecting mask (chain or forward) each marker's initial
    emission probabilities are sorted ascending along the state index. The
    states of such a model are only identified up to their order, and EM
    restarts that start against the order tend to strand early states;
    sorting breaks the permutation symmetry toward the ordered hypothesis
    without constraining where EM can move.
    """
    if cohort.n_subjects == 0:
        raise ValueError("cannot initialize from an empty cohort")
    K = config.n_states
    M = len(cohort.marker_names)
    mask = TransitionMask.from_preset(config.mask_preset, K)
    rng = np.random.default_rng(config.seed)
    pi = rng.uniform(0.0, 1.0, size=K)
    pi /= pi.sum()
    Q = np.zeros((K, K))
    for i, j in mask.edges:
        Q[i, j] = rng.uniform(0.05, 1.0)
    Q[np.arange(K), np.arange(K)] = -Q.sum(axis=1)
    emissions = rng.uniform(0.05, 0.95, size=(K, M))
    if config.mask_preset in ("chain", "forward"):
        emissions = np.sort(emissions, axis=0)
    return ChainModel(cohort.marker_names, pi, Q, emissions, mask)


def _e_step(model: ChainModel, sequences, interval_index, n_intervals, unique_dts, inverse):
    """One full E-step pass: log-likelihood plus sufficient statistics.

    Returns the cohort LL, first-visit gamma sum, weighted emission counts
    (positives and non-missing totals), and the stacked per-interval
    endpoint weight matrices for the transition statistics. Transition
    matrices for the cohort's distinct gaps are computed in one batched
    exponential and shared by index.
    """
    K = model.n_states
    M = model.n_markers
    unique_P = transition_matrix(model.Q[None, :, :] * unique_dts[:, None, None], 1.0)
    ll = 0.0
    pi_acc = np.zeros(K)
    pos_acc = np.zeros((K, M))
    tot_acc = np.zeros((K, M))
    weights = np.empty((n_intervals, K, K))
    for seq, (lo, hi) in zip(sequences, interval_index):
        E = emission_matrix(model, seq.observations)
        P = unique_P[inverse[lo:hi]]
        seq_ll, alpha, c = _forward(model, seq, P, E)
        beta = _backward(P, E, c)
        ll += seq_ll
        gamma = alpha * beta
        gamma /= gamma.sum(axis=1, keepdims=True)
        pi_acc += gamma[0]
        pos = (seq.observations == POSITIVE).astype(float)
        seen = (seq.observations != MISSING).astype(float)
        pos_acc += gamma.T @ pos
        tot_acc += gamma.T @ seen
        if hi > lo:
            # Endpoint weights W[a, b] = alpha[a] * E[b] * beta[b] / c, the
            # pairwise posterior with the transition probability divided out.
            weights[lo:hi] = alpha[:-1, :, None] * (
                E[1:] * beta[1:] / c[1:, None]
            )[:, None, :]
    return ll, pi_acc, pos_acc, tot_acc, weights


def em_fit(init: ChainModel, cohort: Cohort, config: TrainConfig) -> FitResult:
    """Expectation-maximization until the LL improvement drops below tolerance.

    The E-step accumulates smoothed emission counts and, per interval,
    endpoint-weighted occupation/jump integrals (one batched block
    exponential for the whole cohort). The M-step is the standard ratio
    estimator: rates E[N_ij]/E[R_i] floored at ``config.rate_floor``,
    emissions the gamma-weighted positive fraction, pi the normalized
    first-visit gamma. States with ~zero expected occupation keep their
    previous parameters and raise a StarvedStateWarning.
    """
    if cohort.marker_names != init.marker_names:
        raise ValueError("cohort markers do not match the initial model")
    K = init.n_states
    mask = init.mask
    edge_idx = tuple(np.array(e) for e in zip(*mask.edges)) if mask.edges else None

    sequences = cohort.sorted_sequences()
    interval_index = []
    n_intervals = 0
    all_dts = []
    for seq in sequences:
        lo = n_intervals
        n_intervals += seq.n_visits - 1
        interval_index.append((lo, n_intervals))
        all_dts.append(np.diff(seq.times))
    dts = np.concatenate(all_dts) if all_dts else np.empty(0)
    # The interval structure is fixed across iterations: quantize once and
    # share each distinct gap's transition matrix by inverse index.
    unique_keys, inverse = np.unique(quantize_dts(dts), return_inverse=True)
    unique_dts = unique_keys.astype(float) * _DT_QUANTUM

    model = init
    trace: list[float] = []
    converged = False
    starved_total: set[int] = set()
    ll_prev = None
    for iteration in range(config.max_iterations + 1):
        ll, pi_acc, pos_acc, tot_acc, weights = _e_step(
            model, sequences, interval_index, n_intervals, unique_dts, inverse
        )
        trace.append(ll)
        if ll_prev is not None and ll - ll_prev < config.tolerance:
            converged = True
            break
        if iteration == config.max_iterations:
            break
        ll_prev = ll

        if n_intervals:
            moments = weighted_moment_integrals(model.Q, dts, weights).sum(axis=0)
            occupation = np.diag(moments).copy()
            starved = occupation < STARVATION_FLOOR
        else:
            # No intervals anywhere: rates are unidentifiable, keep them;
            # a state is starved if it collected no emission mass either.
            moments = np.zeros((K, K))
            occupation = np.zeros(K)
            starved = tot_acc.sum(axis=1) <= 0
        if starved.any():
            names = [int(s) for s in np.flatnonzero(starved)]
            starved_total.update(names)
            warnings.warn(
                f"states {names} have ~zero expected occupation; keeping their parameters",
                StarvedStateWarning,
            )

        if n_intervals and edge_idx is not None:
            Q_new = np.zeros((K, K))
            with np.errstate(divide="ignore", invalid="ignore"):
                rates = moments[edge_idx] * model.Q[edge_idx] / occupation[edge_idx[0]]
            rates = np.where(np.isfinite(rates), rates, 0.0)
            Q_new[edge_idx] = np.maximum(rates, config.rate_floor)
            Q_new[starved] = model.Q[starved]
            Q_new[np.arange(K), np.arange(K)] = 0.0
            Q_new[np.arange(K), np.arange(K)] = -Q_new.sum(axis=1)
        else:
            Q_new = model.Q.copy()

        with np.errstate(invalid="ignore"):
            b_new = pos_acc / tot_acc
        b_new = np.where(tot_acc > 0, b_new, model.emissions)
        b_new[starved] = model.emissions[starved]
        b_new = np.clip(b_new, *config.emission_clamp)

        pi_new = pi_acc / pi_acc.sum()

        model = ChainModel(model.marker_names, pi_new, Q_new, b_new, mask)

    return FitResult(
        model=model,
        ll_trace=trace,
        iterations=len(trace) - 1,
        converged=converged,
        starved_states=sorted(starved_total),
    )


def bootstrap_ll(model: ChainModel, cohort: Cohort, B: int, seed: int) -> np.ndarray:
    """Log-likelihoods of B subject-level resamples (with replacement).

    Per-subject scores are computed once and combined by multiplicity, so
    each entry equals the dataset log-likelihood of its resample.
    """
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    if cohort.n_subjects == 0:
        raise ValueError("cannot bootstrap an empty cohort")
    cache: dict = {}
    per_subject = np.array(
        [forward_filter(model, seq, cache)[0] for seq in cohort.sorted_sequences()]
    )
    n = len(per_subject)
    rng = np.random.default_rng(seed)
    out = np.empty(B)
    for b in range(B):
        idx = rng.integers(0, n, size=n)
        out[b] = per_subject[idx].sum()
    return out
