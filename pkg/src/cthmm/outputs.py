"""Post-fit analytics over a trained model and a cohort.

Everything downstream of training lives here: per-visit state labels with
uncertainty flags, dwell times, horizon transition matrices, trajectory
segmentation, per-state variable summaries, timeline bands, and subgroup
filtering. All functions are pure; labeled cohorts are treated as
immutable once built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import queries
from .inference import forward_filter, viterbi
from .linalg import transition_matrix
from .model import MISSING, POSITIVE, ChainModel, Cohort, VisitSequence

# exit rates below this count as "no outflow" for sink marking and segmentation
SINK_RATE = 1e-6
# minimum fraction of subjects starting in a state for it to open a new segment
SEGMENT_START_MASS = 0.01


@dataclass
class DwellTime:
    state: int
    exit_rate: float
    mean_years: float
    is_sink: bool


@dataclass
class LabeledSubject:
    subject_id: str
    times: np.ndarray
    viterbi_states: np.ndarray
    filtered: np.ndarray
    filtered_argmax: np.ndarray
    discrepancy: np.ndarray
    log_likelihood: float

    @property
    def n_visits(self) -> int:
        return len(self.times)


@dataclass
class LabeledCohort:
    cohort: Cohort = field(repr=False)
    n_states: int
    subjects: list[LabeledSubject]

    def __post_init__(self):
        self._by_id = {s.subject_id: s for s in self.subjects}

    def by_id(self, subject_id: str) -> LabeledSubject:
        return self._by_id[subject_id]

    @property
    def n_discrepancies(self) -> int:
        return int(sum(s.discrepancy.sum() for s in self.subjects))

    @property
    def total_visits(self) -> int:
        return sum(s.n_visits for s in self.subjects)


@dataclass
class TimelineBand:
    state: int
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class TrajectorySegment:
    states: tuple[int, ...]
    member_ids: tuple[str, ...]
    entry_ages: dict[int, np.ndarray] = field(repr=False)


@dataclass
class StateSummaryTable:
    """Per-state aggregates over labeled visits.

    ``aux`` maps column name to a length-K list: numeric columns give the
    mean, binary columns the positive rate, categorical columns a
    value-frequency mapping; entries are None for states with no labeled
    visits (or no non-missing values).
    """

    emissions: np.ndarray
    marker_names: tuple[str, ...]
    visit_counts: np.ndarray
    mean_age: np.ndarray
    marker_positive_rate: np.ndarray
    aux: dict[str, list]


def dwell_times(model: ChainModel) -> list[DwellTime]:
    """Expected sojourn per state: 1/exit-rate, infinite for absorbing states."""
    out = []
    for i, q in enumerate(model.exit_rates):
        mean = math.inf if q <= 0.0 else 1.0 / q
        out.append(DwellTime(state=i, exit_rate=float(q), mean_years=mean, is_sink=q < SINK_RATE))
    return out


def horizon_matrix(model: ChainModel, horizon_months: float) -> np.ndarray:
    """Transition probabilities over a horizon given in months."""
    if horizon_months < 0:
        raise ValueError(f"horizon must be >= 0 months, got {horizon_months}")
    return transition_matrix(model.Q, horizon_months / 12.0)


def label_cohort(model: ChainModel, cohort: Cohort) -> LabeledCohort:
    """Assign a state to every visit, two ways, and flag where they differ.

    The Viterbi path gives the jointly most probable assignment; the
    filtered argmax gives the per-visit assignment from evidence so far.
    A disagreement at a visit marks the assignment there as uncertain.
    """
    if cohort.marker_names != model.marker_names:
        raise ValueError(
            f"cohort markers {cohort.marker_names} do not match model "
            f"markers {model.marker_names}"
        )
    cache: dict = {}
    labeled = []
    for seq in cohort.sequences:
        ll, filtered = forward_filter(model, seq, cache)
        path, _ = viterbi(model, seq, cache)
        filtered_argmax = filtered.argmax(axis=1)
        labeled.append(
            LabeledSubject(
                subject_id=seq.subject_id,
                times=seq.times,
                viterbi_states=path,
                filtered=filtered,
                filtered_argmax=filtered_argmax,
                discrepancy=path != filtered_argmax,
                log_likelihood=ll,
            )
        )
    return LabeledCohort(cohort=cohort, n_states=model.n_states, subjects=labeled)


def timeline_bands(
    labeled: LabeledCohort, age_axis: str | None = None
) -> dict[str, list[TimelineBand]]:
    """Viterbi labels as contiguous colored bands per subject.

    Runs of identical labels form bands; the unobserved transition time
    between two runs is placed at the midpoint of the straddling visit
    pair. The first band starts at the first visit and the last band ends
    at the last visit, so per-subject durations telescope exactly.

    ``age_axis`` selects a numeric auxiliary column as the horizontal
    axis; the default is the visit times themselves.
    """
    bands: dict[str, list[TimelineBand]] = {}
    seq_by_id = labeled.cohort.by_id() if age_axis is not None else {}
    for subject in labeled.subjects:
        axis = _axis_values(seq_by_id, subject, age_axis)
        states = subject.viterbi_states
        out = []
        run_start_age = axis[0]
        run_start = 0
        for i in range(1, len(states)):
            if states[i] != states[i - 1]:
                boundary = 0.5 * (axis[i - 1] + axis[i])
                out.append(TimelineBand(int(states[run_start]), float(run_start_age), float(boundary)))
                run_start_age = boundary
                run_start = i
        out.append(TimelineBand(int(states[run_start]), float(run_start_age), float(axis[-1])))
        bands[subject.subject_id] = out
    return bands


def _axis_values(seq_by_id, subject: LabeledSubject, age_axis: str | None) -> np.ndarray:
    if age_axis is None:
        return subject.times
    seq = seq_by_id[subject.subject_id]
    if age_axis not in seq.aux:
        raise ValueError(f"unknown auxiliary column {age_axis!r}")
    values = np.asarray(seq.aux[age_axis], dtype=float)
    if not np.all(np.isfinite(values)) or np.any(np.diff(values) <= 0):
        raise ValueError(f"axis column {age_axis!r} must be finite and strictly increasing")
    return values


def segment_trajectories(model: ChainModel, labeled: LabeledCohort) -> list[TrajectorySegment]:
    """Partition the chain into contiguous runs traversed as units.

    A boundary opens before state j when the previous state's exit rate is
    effectively zero, or when no decoded trajectory ever crosses from
    below j to j-or-above while at least SEGMENT_START_MASS of subjects
    begin in j (an entry point, not an unreachable state). Crossings are
    counted on consecutive visit pairs, so a decoded jump that skips over
    j-1 still connects the two sides.
    """
    if model.mask.preset != "chain":
        raise ValueError(f"segmentation requires a chain-masked model, got {model.mask.preset!r}")
    K = model.n_states
    n_subjects = len(labeled.subjects)
    if n_subjects == 0:
        raise ValueError("cannot segment an empty cohort")

    crossings = np.zeros(K, dtype=np.int64)  # crossings[j]: decoded moves from <j to >=j
    starts = np.zeros(K, dtype=np.int64)
    for subject in labeled.subjects:
        states = subject.viterbi_states
        starts[states[0]] += 1
        for a, b in zip(states[:-1], states[1:]):
            if a < b:
                crossings[a + 1 : b + 1] += 1

    boundaries = [0]
    for j in range(1, K):
        rate_dead = model.exit_rates[j - 1] < SINK_RATE
        empirically_split = (
            crossings[j] == 0 and starts[j] >= SEGMENT_START_MASS * n_subjects
        )
        if rate_dead or empirically_split:
            boundaries.append(j)
    boundaries.append(K)

    segments = []
    segment_of_state = np.empty(K, dtype=np.int64)
    for si, (lo, hi) in enumerate(zip(boundaries[:-1], boundaries[1:])):
        segment_of_state[lo:hi] = si
        segments.append((lo, hi))

    members: list[list[str]] = [[] for _ in segments]
    entry_ages: list[dict[int, list[float]]] = [{} for _ in segments]
    for subject in labeled.subjects:
        si = int(segment_of_state[subject.viterbi_states[0]])
        members[si].append(subject.subject_id)
        seen: set[int] = set()
        for t, s in zip(subject.times, subject.viterbi_states):
            s = int(s)
            if s not in seen:
                seen.add(s)
                entry_ages[int(segment_of_state[s])].setdefault(s, []).append(float(t))

    return [
        TrajectorySegment(
            states=tuple(range(lo, hi)),
            member_ids=tuple(sorted(members[si])),
            entry_ages={s: np.array(ages) for s, ages in sorted(entry_ages[si].items())},
        )
        for si, (lo, hi) in enumerate(segments)
    ]


def state_summary(
    model: ChainModel,
    labeled: LabeledCohort,
    running_max: tuple[str, ...] = (),
) -> StateSummaryTable:
    """Per-state emission probabilities plus aggregates of auxiliary columns.

    Auxiliary variables are summarized over the visits labeled with each
    state and play no role in fitting. Columns named in ``running_max``
    are first transformed to their per-subject running maximum, so the
    aggregate reads "highest value seen by the time of arriving here".
    """
    cohort = labeled.cohort
    for col in running_max:
        if col not in cohort.aux_schema:
            raise ValueError(f"unknown auxiliary column {col!r}")
    K = model.n_states
    counts = np.zeros(K, dtype=np.int64)
    age_sum = np.zeros(K)
    pos = np.zeros((K, model.n_markers))
    tot = np.zeros((K, model.n_markers))
    aux_values: dict[str, list[list]] = {col: [[] for _ in range(K)] for col in cohort.aux_schema}

    seq_by_id = cohort.by_id()
    for subject in labeled.subjects:
        seq = seq_by_id[subject.subject_id]
        states = subject.viterbi_states
        for k in range(K):
            sel = states == k
            counts[k] += int(sel.sum())
            age_sum[k] += float(subject.times[sel].sum())
            obs = seq.observations[sel]
            tot[k] += (obs != MISSING).sum(axis=0)
            pos[k] += (obs == POSITIVE).sum(axis=0)
        for col in cohort.aux_schema:
            values = _aux_column(seq, col, transform=col in running_max)
            for v, k in zip(values, states):
                if v is not None:
                    aux_values[col][k].append(v)

    mean_age = np.where(counts > 0, age_sum / np.maximum(counts, 1), np.nan)
    rate = np.where(tot > 0, pos / np.maximum(tot, 1), np.nan)
    aux: dict[str, list] = {}
    for col, kind in cohort.aux_schema.items():
        aux[col] = [_aggregate(aux_values[col][k], kind) for k in range(K)]
    return StateSummaryTable(
        emissions=model.emissions.copy(),
        marker_names=model.marker_names,
        visit_counts=counts,
        mean_age=mean_age,
        marker_positive_rate=rate,
        aux=aux,
    )


def _aux_column(seq: VisitSequence, col: str, transform: bool) -> list:
    values = list(seq.aux[col])
    if not transform:
        return values
    best = None
    out = []
    for v in values:
        if v is not None:
            best = v if best is None else max(best, v)
        out.append(best)
    return out


def _aggregate(values: list, kind: str):
    if not values:
        return None
    if kind == "numeric":
        return float(np.mean([float(v) for v in values]))
    if kind == "binary":
        return float(np.mean([1.0 if v in (1, True, "1") else 0.0 for v in values]))
    counts: dict[str, int] = {}
    for v in values:
        counts[str(v)] = counts.get(str(v), 0) + 1
    return {k: c / len(values) for k, c in sorted(counts.items())}


def subject_features(labeled: LabeledCohort) -> dict[str, queries.SubjectFeatures]:
    """Per-subject facts consumed by filter predicates."""
    bands = timeline_bands(labeled)
    features = {}
    for subject in labeled.subjects:
        dwell: dict[int, float] = {}
        for band in bands[subject.subject_id]:
            dwell[band.state] = dwell.get(band.state, 0.0) + band.duration
        features[subject.subject_id] = queries.SubjectFeatures(
            visited=frozenset(int(s) for s in subject.viterbi_states),
            first_state=int(subject.viterbi_states[0]),
            last_state=int(subject.viterbi_states[-1]),
            dwell=dwell,
        )
    return features


def subgroup_filter(labeled: LabeledCohort, query: str) -> set[str]:
    """Subject ids matching a filter expression; empty expression matches all."""
    predicate = queries.parse_query(query)
    features = subject_features(labeled)
    return {sid for sid, f in features.items() if predicate.matches(f)}
