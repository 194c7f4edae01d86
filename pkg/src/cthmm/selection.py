"""Experiment grid and model-selection protocol.

The grid mirrors the evaluation loop of the modeling study: V random
subject-level 7:3 splits, a sweep over candidate state counts, M random
initializations each, one row per trained instance. Selection combines
the per-K median predictive log-likelihood curve with the BIC curve; the
recommendation is advisory and the full curves always ship with it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .inference import dataset_loglik
from .model import ChainModel, Cohort, TransitionMask
from .training import FitResult, TrainConfig, em_fit, init_random

# spawn_key tags for deriving independent seed streams from the master seed
_TAG_SPLIT = 1
_TAG_FIT = 2


def derive_seed(master_seed: int, *key: int) -> int:
    """Deterministic 64-bit seed for a tagged subtask of a master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class GridSpec:
    k_min: int
    k_max: int
    n_splits: int = 10
    n_inits: int = 10
    train_ratio: float = 0.7
    constraints: tuple[str, ...] = ("chain",)
    master_seed: int = 0
    max_iterations: int = 500
    tolerance: float = 1e-6

    def __post_init__(self):
        if not 2 <= self.k_min <= self.k_max:
            raise ValueError(f"need 2 <= k_min <= k_max, got {self.k_min}..{self.k_max}")
        if self.n_splits < 1 or self.n_inits < 1:
            raise ValueError("n_splits and n_inits must be >= 1")
        if not 0.0 < self.train_ratio < 1.0:
            raise ValueError(f"train_ratio must be in (0, 1), got {self.train_ratio}")
        if not self.constraints:
            raise ValueError("need at least one constraint preset")

    @property
    def n_cells(self) -> int:
        return (
            self.n_splits
            * (self.k_max - self.k_min + 1)
            * self.n_inits
            * len(self.constraints)
        )


@dataclass
class ExperimentResult:
    split_id: int
    n_states: int
    init_index: int
    constraint: str
    train_ll: float
    validation_ll: float
    validation_bic: float
    param_count: int
    iterations: int
    converged: bool
    wall_time: float
    error: str | None = None


@dataclass
class SelectionReport:
    recommended_k: int
    flags: list[str]
    per_k: dict[int, dict]
    delta: float
    epsilon: float

    def to_dict(self) -> dict:
        """JSON-friendly form; per-K keys become strings."""
        return {
            "recommended_k": self.recommended_k,
            "flags": list(self.flags),
            "per_k": {str(k): v for k, v in sorted(self.per_k.items())},
            "delta": self.delta,
            "epsilon": self.epsilon,
        }


def split_subjects(
    cohort: Cohort, ratio: float, seed: int
) -> tuple[Cohort, Cohort]:
    """Subject-level train/validation partition; never splits a subject's visits."""
    n = cohort.n_subjects
    if n < 2:
        raise ValueError(f"need at least 2 subjects to split, got {n}")
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    n_train = int(math.floor(ratio * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    ids = sorted(seq.subject_id for seq in cohort.sequences)
    perm = np.random.default_rng(seed).permutation(n)
    train_ids = {ids[i] for i in perm[:n_train]}
    train = cohort.subset(train_ids)
    validation = cohort.subset(set(ids) - train_ids)
    return train, validation


def param_count(K: int, n_markers: int, mask: TransitionMask | str) -> int:
    """Free parameters: (K-1) initial probabilities, allowed rates, K*M emissions."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if isinstance(mask, str):
        mask = TransitionMask.from_preset(mask, K)
    return (K - 1) + len(mask.edges) + K * n_markers


def bic(validation_ll: float, p: int, n_observations: int) -> float:
    """Bayesian Information Criterion: p*ln(n) - 2*LL."""
    if n_observations < 1:
        raise ValueError(f"need n_observations >= 1, got {n_observations}")
    return p * math.log(n_observations) - 2.0 * validation_ll


def run_grid(cohort: Cohort, spec: GridSpec) -> list[ExperimentResult]:
    """Train every (split, K, constraint, init) cell and score it.

    Every cell's fit is reproducible from (master seed, split id, K, init
    index) alone. Individual fit failures are recorded in their result row
    (NaN scores plus the error message) and never abort the grid.
    """
    results: list[ExperimentResult] = []
    for v in range(spec.n_splits):
        split_seed = derive_seed(spec.master_seed, _TAG_SPLIT, v)
        train, validation = split_subjects(cohort, spec.train_ratio, split_seed)
        n_val = validation.total_visits
        for K in range(spec.k_min, spec.k_max + 1):
            for ci, constraint in enumerate(spec.constraints):
                p = param_count(K, len(cohort.marker_names), constraint)
                for m in range(spec.n_inits):
                    config = TrainConfig(
                        n_states=K,
                        mask_preset=constraint,
                        max_iterations=spec.max_iterations,
                        tolerance=spec.tolerance,
                        seed=derive_seed(spec.master_seed, _TAG_FIT, v, K, ci, m),
                    )
                    t0 = time.perf_counter()
                    try:
                        fit = em_fit(init_random(config, train), train, config)
                        val_ll = dataset_loglik(fit.model, validation)
                        results.append(
                            ExperimentResult(
                                split_id=v,
                                n_states=K,
                                init_index=m,
                                constraint=constraint,
                                train_ll=fit.final_ll,
                                validation_ll=val_ll,
                                validation_bic=bic(val_ll, p, n_val),
                                param_count=p,
                                iterations=fit.iterations,
                                converged=fit.converged,
                                wall_time=time.perf_counter() - t0,
                            )
                        )
                    except Exception as exc:  # noqa: BLE001 - grid must survive any cell
                        results.append(
                            ExperimentResult(
                                split_id=v,
                                n_states=K,
                                init_index=m,
                                constraint=constraint,
                                train_ll=float("nan"),
                                validation_ll=float("nan"),
                                validation_bic=float("nan"),
                                param_count=p,
                                iterations=0,
                                converged=False,
                                wall_time=time.perf_counter() - t0,
                                error=f"{type(exc).__name__}: {exc}",
                            )
                        )
    return results


def per_k_curves(results: list[ExperimentResult]) -> dict[int, dict]:
    """Median and quartiles of validation LL and BIC per K (finite rows only)."""
    curves: dict[int, dict] = {}
    for K in sorted({r.n_states for r in results}):
        lls = np.array(
            [r.validation_ll for r in results if r.n_states == K and math.isfinite(r.validation_ll)]
        )
        bics = np.array(
            [r.validation_bic for r in results if r.n_states == K and math.isfinite(r.validation_bic)]
        )
        trains = np.array(
            [r.train_ll for r in results if r.n_states == K and math.isfinite(r.train_ll)]
        )
        if lls.size == 0:
            continue
        curves[K] = {
            "validation_ll": _quartiles(lls),
            "validation_bic": _quartiles(bics),
            "train_ll": _quartiles(trains),
            "n_fits": int(lls.size),
        }
    return curves


def _quartiles(values: np.ndarray) -> dict[str, float]:
    return {
        "q25": float(np.percentile(values, 25)),
        "median": float(np.percentile(values, 50)),
        "q75": float(np.percentile(values, 75)),
    }


def select_k(
    results: list[ExperimentResult], delta: float = 0.01, epsilon: float = 0.005
) -> SelectionReport:
    """Advisory elbow rule over the per-K median curves.

    Scanning K upward, the first K whose median predictive-LL gain over
    K-1 drops below ``delta`` times the total LL range marks K-1 as the
    elbow; the elbow is recommended if its median BIC sits within
    ``epsilon`` (relative) of the best BIC seen up to it. A flat curve
    recommends the smallest K; a curve that keeps climbing recommends the
    largest K and flags that no elbow was found. When the gain does drop
    somewhere but every candidate fails the BIC check, the recommendation
    falls back to the K minimizing median validation BIC, flagged so a
    human reads the full curve.
    """
    curves = per_k_curves(results)
    ks = sorted(curves)
    if len(ks) < 2:
        raise ValueError(f"need results for at least 2 distinct K, got {len(ks)}")
    med_ll = {K: curves[K]["validation_ll"]["median"] for K in ks}
    med_bic = {K: curves[K]["validation_bic"]["median"] for K in ks}
    ll_range = max(med_ll.values()) - min(med_ll.values())

    if ll_range == 0.0:
        return SelectionReport(ks[0], ["flat predictive-likelihood curve"], curves, delta, epsilon)

    saw_gain_drop = False
    for prev, K in zip(ks, ks[1:]):
        gain = med_ll[K] - med_ll[prev]
        if gain < delta * ll_range:
            saw_gain_drop = True
            best_so_far = min(med_bic[k] for k in ks if k <= prev)
            if abs(med_bic[prev] - best_so_far) <= epsilon * abs(best_so_far):
                return SelectionReport(prev, [], curves, delta, epsilon)
    if saw_gain_drop:
        best_k = min(ks, key=lambda k: med_bic[k])
        return SelectionReport(
            best_k, ["elbow candidates rejected by BIC; minimum validation-BIC K"], curves,
            delta, epsilon,
        )
    return SelectionReport(ks[-1], ["no elbow found"], curves, delta, epsilon)
