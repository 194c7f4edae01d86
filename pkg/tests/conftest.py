import sys
from pathlib import Path

import numpy as np
import pytest

# oracles.py lives next to the tests; make it importable regardless of
# how pytest was invoked.
sys.path.insert(0, str(Path(__file__).parent))

from cthmm.model import ChainModel, TransitionMask


@pytest.fixture
def rng():
    return np.random.default_rng(20260818)


def make_chain_model(rates, emissions, pi=None, marker_names=None):
    """Chain model from per-step rates and a (K, M) emission table."""
    emissions = np.asarray(emissions, dtype=float)
    K = emissions.shape[0]
    assert len(rates) == K - 1
    Q = np.zeros((K, K))
    for i, q in enumerate(rates):
        Q[i, i + 1] = q
    Q[np.arange(K), np.arange(K)] = -Q.sum(axis=1)
    if pi is None:
        pi = np.full(K, 1.0 / K)
    names = marker_names or tuple(f"m{j}" for j in range(emissions.shape[1]))
    return ChainModel(tuple(names), np.asarray(pi, float), Q, emissions, TransitionMask.chain(K))


@pytest.fixture
def three_state_chain():
    """Well-separated 3-state chain used across the inference tests."""
    return make_chain_model(
        rates=[0.4, 0.7],
        emissions=[[0.1, 0.1, 0.1], [0.9, 0.1, 0.1], [0.9, 0.9, 0.9]],
        pi=[0.8, 0.15, 0.05],
    )
