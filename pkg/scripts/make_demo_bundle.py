"""Build a demonstration analytics bundle for the explorer.

Constructs an 11-state forward chain whose trajectory graph splits into
three segments: two interior rates are effectively zero, so states 0-2,
3-7, and 8-10 form disconnected blocks and subjects enter at states 0,
3, or 8 without ever crossing between blocks. A simulated cohort plus
the full bundle (dwell times, horizon matrices, segments, timelines)
land in --out-dir, ready for

    cthmm serve --bundle <out-dir>/bundle.json
"""

import argparse
import os

import numpy as np

from cthmm.dataio import emit_report, write_cohort_csv, write_model
from cthmm.model import ChainModel, Cohort, TransitionMask, VisitSequence
from cthmm.synth import SimSpec, simulate_cohort

K = 11
DEAD_RATE = 1e-9  # below the sink threshold, so the edge never fires


def three_segment_model() -> ChainModel:
    rates = np.full(K - 1, 0.5)
    rates[[2, 7]] = DEAD_RATE
    Q = np.zeros((K, K))
    Q[np.arange(K - 1), np.arange(1, K)] = rates
    Q[np.arange(K), np.arange(K)] = -Q.sum(axis=1)
    M = 10
    emissions = np.full((K, M), 0.05)
    for k in range(K):
        emissions[k, :k] = 0.95  # one marker converts per stage
    pi = np.zeros(K)
    pi[[0, 3, 8]] = [0.45, 0.30, 0.25]
    names = tuple(f"m{j}" for j in range(M))
    return ChainModel(names, pi, Q, emissions, TransitionMask.chain(K))


def with_aux(result, seed: int) -> Cohort:
    """Attach a severity score (state-correlated) and a site label per subject."""
    rng = np.random.default_rng(seed + 1_000_003)
    sequences = []
    for seq in result.cohort.sequences:
        states = result.true_states[seq.subject_id]
        score = np.round(1.0 + states + rng.normal(0.0, 0.5, size=len(states)), 2)
        site = rng.choice(["north", "south", "east"])
        aux = {"score": [float(v) for v in score], "site": [site] * len(states)}
        sequences.append(VisitSequence(seq.subject_id, seq.times, seq.observations, aux))
    return Cohort(
        sequences,
        result.cohort.marker_names,
        aux_schema={"score": "numeric", "site": "categorical"},
    )


def run(n_subjects: int, seed: int, out_dir: str) -> None:
    model = three_segment_model()
    result = simulate_cohort(
        SimSpec(model=model, n_subjects=n_subjects, followup_cap=12.0, seed=seed)
    )
    cohort = with_aux(result, seed)
    os.makedirs(out_dir, exist_ok=True)
    cohort_path = os.path.join(out_dir, "cohort.csv")
    model_path = os.path.join(out_dir, "model.json")
    bundle_path = os.path.join(out_dir, "bundle.json")
    write_cohort_csv(cohort, cohort_path)
    write_model(model, model_path)
    bundle = emit_report(model, cohort, bundle_path, horizons=(12, 24, 36, 60))

    segments = bundle["segments"]
    print(f"{n_subjects} subjects, {K} states, "
          + " | ".join(f"segment {seg['states'][0]}-{seg['states'][-1]}" for seg in segments))
    for seg in segments:
        print(f"  states {seg['states']}: {len(seg['member_ids'])} subjects")
    print(f"wrote {cohort_path}, {model_path}, {bundle_path}")
    print(f"next: cthmm serve --bundle {bundle_path}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--subjects", type=int, default=120)
    ap.add_argument("--seed", type=int, default=31)
    ap.add_argument("--out-dir", default="demo_bundle")
    args = ap.parse_args()
    run(args.subjects, args.seed, args.out_dir)


if __name__ == "__main__":
    main()
