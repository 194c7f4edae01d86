"""Model and cohort containers: masks, chain models, visit sequences."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import validate_generator

# Observation codes inside a visit's marker vector.
POSITIVE = 1
NEGATIVE = 0
MISSING = -1

# Emission probabilities are kept away from {0, 1} so a single
# contradictory observation can never produce a -inf log-likelihood.
EMISSION_CLAMP = (1e-6, 1.0 - 1e-6)

MASK_PRESETS = ("full", "forward", "chain")


@dataclass(frozen=True)
class TransitionMask:
    """Boolean K x K matrix of allowed off-diagonal transitions."""

    preset: str
    allowed: np.ndarray

    def __post_init__(self):
        allowed = np.asarray(self.allowed, dtype=bool).copy()
        np.fill_diagonal(allowed, False)
        K = allowed.shape[0]
        if K > 1 and not allowed.any():
            raise ValueError("mask must allow at least one transition for K > 1")
        allowed.setflags(write=False)
        object.__setattr__(self, "allowed", allowed)

    @property
    def dim(self) -> int:
        return self.allowed.shape[0]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(self.allowed)]

    @classmethod
    def full(cls, K: int) -> "TransitionMask":
        return cls("full", ~np.eye(K, dtype=bool))

    @classmethod
    def forward(cls, K: int) -> "TransitionMask":
        i, j = np.indices((K, K))
        return cls("forward", j > i)

    @classmethod
    def chain(cls, K: int) -> "TransitionMask":
        i, j = np.indices((K, K))
        return cls("chain", j == i + 1)

    @classmethod
    def from_preset(cls, preset: str, K: int) -> "TransitionMask":
        if preset not in MASK_PRESETS:
            raise ValueError(f"unknown mask preset {preset!r}, expected one of {MASK_PRESETS}")
        return getattr(cls, preset)(K)


@dataclass(frozen=True)
class ChainModel:
    """A continuous-time hidden Markov model with binary-marker emissions.

    Fields
    ------
    marker_names : names of the M observed binary markers.
    pi : (K,) initial state distribution.
    Q : (K, K) generator matrix respecting ``mask``.
    emissions : (K, M) probability that each marker is positive per state.
        Clamped into EMISSION_CLAMP at construction.
    mask : allowed transition structure.
    """

    marker_names: tuple[str, ...]
    pi: np.ndarray
    Q: np.ndarray
    emissions: np.ndarray
    mask: TransitionMask

    def __post_init__(self):
        object.__setattr__(self, "marker_names", tuple(self.marker_names))
        pi = np.asarray(self.pi, dtype=float).copy()
        if pi.ndim != 1:
            raise ValueError("pi must be a vector")
        if (pi < 0).any():
            raise ValueError("pi has negative entries")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError(f"pi must sum to 1 within 1e-12, got {pi.sum()!r}")
        K = pi.shape[0]
        if self.mask.dim != K:
            raise ValueError("mask dimension does not match pi")
        Q = validate_generator(self.Q, self.mask.allowed).copy()
        emissions = np.asarray(self.emissions, dtype=float).copy()
        if emissions.shape != (K, len(self.marker_names)):
            raise ValueError(
                f"emissions must be (K, M) = ({K}, {len(self.marker_names)}), "
                f"got {emissions.shape}"
            )
        if not np.isfinite(emissions).all():
            raise ValueError("emissions have non-finite entries")
        emissions = np.clip(emissions, *EMISSION_CLAMP)
        for arr in (pi, Q, emissions):
            arr.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "emissions", emissions)

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def n_markers(self) -> int:
        return len(self.marker_names)

    @property
    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.Q)


@dataclass
class VisitSequence:
    """Time-ordered visits of one subject.

    ``observations`` is an (n_visits, M) int8 array with POSITIVE /
    NEGATIVE / MISSING codes. ``aux`` holds named per-visit columns that
    are never used in model fitting.
    """

    subject_id: str
    times: np.ndarray
    observations: np.ndarray
    aux: dict[str, list] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.observations = np.asarray(self.observations, dtype=np.int8)
        n = self.times.shape[0]
        if n < 1:
            raise ValueError(f"subject {self.subject_id!r} has no visits")
        if self.observations.ndim != 2 or self.observations.shape[0] != n:
            raise ValueError(
                f"subject {self.subject_id!r}: observations shape "
                f"{self.observations.shape} does not match {n} visits"
            )
        if n > 1 and not (np.diff(self.times) > 0).all():
            raise ValueError(f"subject {self.subject_id!r} has non-increasing visit times")
        for name, col in self.aux.items():
            if len(col) != n:
                raise ValueError(
                    f"subject {self.subject_id!r}: aux column {name!r} has "
                    f"{len(col)} values for {n} visits"
                )

    @property
    def n_visits(self) -> int:
        return self.times.shape[0]


@dataclass
class Cohort:
    """A set of visit sequences over a shared marker panel."""

    sequences: list[VisitSequence]
    marker_names: tuple[str, ...]
    aux_schema: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.marker_names = tuple(self.marker_names)
        M = len(self.marker_names)
        ids = set()
        for seq in self.sequences:
            if seq.subject_id in ids:
                raise ValueError(f"duplicate subject id {seq.subject_id!r}")
            ids.add(seq.subject_id)
            if seq.observations.shape[1] != M:
                raise ValueError(
                    f"subject {seq.subject_id!r} has {seq.observations.shape[1]} "
                    f"markers, cohort declares {M}"
                )
        for name, kind in self.aux_schema.items():
            if kind not in ("numeric", "binary", "categorical"):
                raise ValueError(f"aux column {name!r} has unknown kind {kind!r}")

    @property
    def n_subjects(self) -> int:
        return len(self.sequences)

    @property
    def total_visits(self) -> int:
        return sum(seq.n_visits for seq in self.sequences)

    def by_id(self) -> dict[str, VisitSequence]:
        return {seq.subject_id: seq for seq in self.sequences}

    def sorted_sequences(self) -> list[VisitSequence]:
        return sorted(self.sequences, key=lambda s: s.subject_id)

    def subset(self, subject_ids) -> "Cohort":
        wanted = set(subject_ids)
        return Cohort(
            [seq for seq in self.sequences if seq.subject_id in wanted],
            self.marker_names,
            dict(self.aux_schema),
        )
