"""Exact inference over irregularly timed visit sequences.

All recursions use the scaled (normalized) form rather than log-space
arithmetic: the per-visit scaling constants give the log-likelihood and
keep every matrix-vector product in well-conditioned territory.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateLikelihoodError
from .linalg import transition_matrix
from .model import MISSING, NEGATIVE, POSITIVE, ChainModel, Cohort, VisitSequence

# Interval transition matrices are memoized per dt quantized to 1e-9 years;
# near-periodic visit schedules repeat the same dt constantly.
_DT_QUANTUM = 1e-9


def quantize_dt(dt: float) -> int:
    return int(round(dt / _DT_QUANTUM))


def quantize_dts(dts: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(dts) / _DT_QUANTUM).astype(np.int64)


def emission_likelihood(model: ChainModel, state: int, obs: np.ndarray) -> float:
    """Probability of one visit's marker vector given the state.

    Missing markers contribute a factor of 1, so a fully missing visit
    has likelihood 1 in every state.
    """
    if not 0 <= state < model.n_states:
        raise ValueError(f"state {state} out of range for K={model.n_states}")
    obs = np.asarray(obs)
    if obs.shape != (model.n_markers,):
        raise ValueError(f"observation vector must have length {model.n_markers}")
    b = model.emissions[state]
    factors = np.where(obs == POSITIVE, b, np.where(obs == NEGATIVE, 1.0 - b, 1.0))
    return float(factors.prod())


def emission_matrix(model: ChainModel, observations: np.ndarray) -> np.ndarray:
    """(n_visits, K) matrix of per-state emission likelihoods."""
    obs = observations[:, None, :]  # (N, 1, M)
    b = model.emissions[None, :, :]  # (1, K, M)
    factors = np.where(obs == POSITIVE, b, np.where(obs == NEGATIVE, 1.0 - b, 1.0))
    return factors.prod(axis=2)


def transition_cache(
    model: ChainModel, dts: np.ndarray, cache: dict | None = None
) -> dict:
    """Memoized transition matrices for a batch of interval lengths.

    Computes every distinct (quantized) gap in one batched exponential, so
    cohort-wide passes pay a single kernel call instead of one per subject.
    """
    if cache is None:
        cache = {}
    keys = np.unique(quantize_dts(dts))
    missing = [k for k in keys.tolist() if k not in cache]
    if missing:
        scaled = np.array(missing, dtype=float) * _DT_QUANTUM
        stacked = transition_matrix(model.Q[None, :, :] * scaled[:, None, None], 1.0)
        for k, P in zip(missing, stacked):
            cache[k] = P
    return cache


def interval_transitions(
    model: ChainModel, times: np.ndarray, cache: dict | None = None
) -> np.ndarray:
    """Stack of transition matrices for the gaps between consecutive visits."""
    K = model.n_states
    n = len(times)
    if n <= 1:
        return np.empty((0, K, K))
    dts = np.diff(times)
    cache = transition_cache(model, dts, cache)
    return np.stack([cache[k] for k in quantize_dts(dts).tolist()])


def _forward(
    model: ChainModel, seq: VisitSequence, P: np.ndarray, E: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    n, K = E.shape
    alpha = np.empty((n, K))
    c = np.empty(n)
    a = model.pi * E[0]
    c[0] = a.sum()
    if c[0] <= 0.0:
        raise DegenerateLikelihoodError(seq.subject_id, 0)
    alpha[0] = a / c[0]
    for t in range(1, n):
        a = (alpha[t - 1] @ P[t - 1]) * E[t]
        c[t] = a.sum()
        if c[t] <= 0.0:
            raise DegenerateLikelihoodError(seq.subject_id, t)
        alpha[t] = a / c[t]
    return float(np.log(c).sum()), alpha, c


def _backward(P: np.ndarray, E: np.ndarray, c: np.ndarray) -> np.ndarray:
    n, K = E.shape
    beta = np.empty((n, K))
    beta[-1] = 1.0
    for t in range(n - 2, -1, -1):
        beta[t] = P[t] @ (E[t + 1] * beta[t + 1]) / c[t + 1]
    return beta


def forward_filter(
    model: ChainModel, seq: VisitSequence, cache: dict | None = None
) -> tuple[float, np.ndarray]:
    """Scaled forward recursion.

    Returns the sequence log-likelihood and the (n_visits, K) filtered
    posterior (state distribution given observations up to each visit).
    """
    E = emission_matrix(model, seq.observations)
    P = interval_transitions(model, seq.times, cache)
    ll, alpha, _ = _forward(model, seq, P, E)
    return ll, alpha


def forward_backward(
    model: ChainModel, seq: VisitSequence, cache: dict | None = None
) -> tuple[float, np.ndarray, np.ndarray]:
    """Forward-backward smoothing.

    Returns the log-likelihood, the (n_visits, K) smoothed posteriors
    gamma, and the (n_visits - 1, K, K) pairwise endpoint posteriors xi,
    each xi[t] summing to 1 over both axes.
    """
    E = emission_matrix(model, seq.observations)
    P = interval_transitions(model, seq.times, cache)
    ll, alpha, c = _forward(model, seq, P, E)
    beta = _backward(P, E, c)
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    xi = alpha[:-1, :, None] * P * (E[1:, None, :] * beta[1:, None, :] / c[1:, None, None])
    if len(xi):
        xi /= xi.sum(axis=(1, 2), keepdims=True)
    return ll, gamma, xi


def viterbi(
    model: ChainModel, seq: VisitSequence, cache: dict | None = None
) -> tuple[np.ndarray, float]:
    """Most probable state path and its log-probability.

    Ties are broken toward the lexicographically smallest state sequence:
    the max-product recursion runs backward and the trace forward, taking
    the lowest state index whenever scores tie exactly.
    """
    E = emission_matrix(model, seq.observations)
    P = interval_transitions(model, seq.times, cache)
    n, K = E.shape
    with np.errstate(divide="ignore"):
        logE = np.log(E)
        logP = np.log(P)
        logpi = np.log(model.pi)
    # suffix[t, i]: best log-score of any path over visits t..n-1 given
    # state i at visit t, excluding terms before visit t.
    suffix = np.zeros((n, K))
    for t in range(n - 2, -1, -1):
        suffix[t] = np.max(logP[t] + (logE[t + 1] + suffix[t + 1])[None, :], axis=1)
    head = logpi + logE[0] + suffix[0]
    best = float(np.max(head))
    if best == -np.inf:
        raise DegenerateLikelihoodError(seq.subject_id, 0)
    path = np.empty(n, dtype=int)
    path[0] = int(np.argmax(head))
    for t in range(1, n):
        scores = logP[t - 1][path[t - 1]] + logE[t] + suffix[t]
        path[t] = int(np.argmax(scores))
    return path, best


def dataset_loglik(model: ChainModel, cohort: Cohort) -> float:
    """Sum of per-subject log-likelihoods, accumulated in subject-id order."""
    if cohort.marker_names != model.marker_names:
        raise ValueError(
            f"cohort markers {cohort.marker_names} do not match model "
            f"markers {model.marker_names}"
        )
    sequences = cohort.sorted_sequences()
    all_dts = [np.diff(seq.times) for seq in sequences if seq.n_visits > 1]
    cache = transition_cache(
        model, np.concatenate(all_dts) if all_dts else np.empty(0)
    )
    total = 0.0
    for seq in sequences:
        ll, _ = forward_filter(model, seq, cache)
        total += ll
    return total
