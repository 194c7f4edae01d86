"""End-to-end acceptance checks for the package's promised behavior.

One test per promise: exact-inference oracle equivalence, kernel
accuracy, EM monotonicity, parameter recovery, the state-count selection
protocol, dwell/horizon analytics, trajectory segmentation, and
byte-level determinism of every artifact. Each test prints a single
PASS/FAIL line with the measured numbers (run with ``pytest -s`` to see
them on a green run).
"""

import json
import math
import time
import warnings
from dataclasses import asdict

import numpy as np

from cthmm.dataio import (
    emit_report,
    parse_cohort_csv,
    read_model,
    write_cohort_csv,
    write_model,
)
from cthmm.errors import StarvedStateWarning
from cthmm.inference import forward_backward, forward_filter, interval_transitions, viterbi
from cthmm.linalg import conditioned_moments, expm, transition_matrix
from cthmm.model import TransitionMask
from cthmm.outputs import dwell_times, horizon_matrix, label_cohort, segment_trajectories
from cthmm.selection import (
    _TAG_SPLIT,
    GridSpec,
    bic,
    derive_seed,
    param_count,
    run_grid,
    select_k,
    split_subjects,
)
from cthmm.synth import SimSpec, simulate_cohort, simulate_path
from cthmm.training import TrainConfig, em_fit, init_random

from conftest import make_chain_model
from oracles import (
    enum_inference,
    quad_conditioned_jumps,
    quad_conditioned_occupation,
    random_generator,
    random_model,
    random_sequence,
)


def _criterion(name: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}", flush=True)
    assert passed, f"{name}: {detail}"


def test_inference_matches_exhaustive_enumeration():
    rng = np.random.default_rng(7041)
    t0 = time.perf_counter()
    max_ll_rel = max_vit = max_post = 0.0
    for _ in range(200):
        model = random_model(rng)
        seq = random_sequence(rng, model)
        # Enumerate over the package's own interval matrices so the check
        # isolates the recursions; the kernels have their own oracles.
        oracle = enum_inference(
            model, seq.times, seq.observations,
            transitions=interval_transitions(model, seq.times),
        )
        ll, _ = forward_filter(model, seq)
        _, gamma, _ = forward_backward(model, seq)
        _, best = viterbi(model, seq)
        max_ll_rel = max(max_ll_rel, abs(ll - oracle["loglik"]) / max(abs(oracle["loglik"]), 1.0))
        max_post = max(max_post, float(np.abs(gamma - oracle["posteriors"]).max()))
        max_vit = max(max_vit, abs(best - oracle["viterbi_logp"]))
    elapsed = time.perf_counter() - t0
    _criterion(
        "inference oracle equivalence",
        max_ll_rel < 1e-9 and max_vit < 1e-10 and max_post < 1e-10 and elapsed < 30.0,
        f"200 instances, LL rel {max_ll_rel:.2e} (<1e-9), Viterbi {max_vit:.2e} "
        f"(<1e-10), posteriors {max_post:.2e} (<1e-10), {elapsed:.1f}s (<30s)",
    )


def test_transition_kernels_accurate():
    rng = np.random.default_rng(7042)
    t0 = time.perf_counter()

    worst_row = worst_ck = 0.0
    for _ in range(40):
        K = int(rng.integers(2, 6))
        Q = random_generator(rng, K)
        dts = rng.uniform(0.05, 4.0, size=6)
        P = expm(np.array([Q * dt for dt in dts]))
        worst_row = max(worst_row, float(np.abs(P.sum(axis=2) - 1.0).max()))
        s, t = rng.uniform(0.1, 2.0, size=2)
        composed = expm(Q, s) @ expm(Q, t)
        worst_ck = max(worst_ck, float(np.abs(composed - expm(Q, s + t)).max()))

    worst_moment = 0.0
    for mask in (TransitionMask.chain(3), None):
        Q = random_generator(rng, 3, mask=mask)
        cm = conditioned_moments(Q, 0.8, mask=None if mask is None else mask.allowed)
        for a in range(3):
            for b in range(3):
                if not cm.reachable[a, b]:
                    continue
                occ = quad_conditioned_occupation(Q, 0.8, a, b)
                worst_moment = max(worst_moment, float(np.abs(cm.occupation[a, b] - occ).max()))
        for e, (k, l) in enumerate(cm.edges[:2]):
            jumps = quad_conditioned_jumps(Q, 0.8, 0, 2, k, l)
            worst_moment = max(worst_moment, abs(cm.jumps[0, 2, e] - jumps))

    two_state = np.array([[-1.0, 1.0], [0.0, 0.0]])
    P1 = transition_matrix(two_state, 1.0)
    closed = max(abs(P1[0, 0] - math.exp(-1.0)), abs(P1[0, 1] - (1.0 - math.exp(-1.0))))

    elapsed = time.perf_counter() - t0
    _criterion(
        "kernel correctness",
        worst_row < 1e-10 and worst_ck < 1e-8 and worst_moment < 1e-6
        and closed < 1e-9 and elapsed < 10.0,
        f"row sums {worst_row:.2e} (<1e-10), Chapman-Kolmogorov {worst_ck:.2e} (<1e-8), "
        f"conditioned moments vs quadrature {worst_moment:.2e} (<1e-6), "
        f"2-state closed form 0.36788/0.63212 off by {closed:.2e} (<1e-9), {elapsed:.1f}s (<10s)",
    )


def test_em_loglik_never_decreases():
    rng = np.random.default_rng(7043)
    t0 = time.perf_counter()
    worst_drop = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StarvedStateWarning)
        for i in range(50):
            model = random_model(rng)
            cohort = simulate_cohort(
                SimSpec(model=model, n_subjects=12, followup_cap=6.0, seed=9000 + i)
            ).cohort
            config = TrainConfig(
                n_states=model.n_states,
                mask_preset=model.mask.preset,
                max_iterations=12,
                tolerance=1e-12,
                seed=i,
            )
            fit = em_fit(init_random(config, cohort), cohort, config)
            if len(fit.ll_trace) > 1:
                worst_drop = min(worst_drop, float(np.diff(fit.ll_trace).min()))
    elapsed = time.perf_counter() - t0
    _criterion(
        "EM monotonicity",
        worst_drop >= -1e-8,
        f"50 cohorts, worst LL step {worst_drop:.2e} (>= -1e-8), {elapsed:.1f}s",
    )


TRUE_RATES = (0.4, 0.7)
TRUE_EMISSIONS = (
    (0.05, 0.05, 0.05, 0.05),
    (0.95, 0.95, 0.05, 0.05),
    (0.95, 0.95, 0.95, 0.95),
)


def test_parameter_recovery_from_synthetic_cohorts():
    truth = make_chain_model(list(TRUE_RATES), [list(r) for r in TRUE_EMISSIONS], pi=[1.0, 0.0, 0.0])
    target_emissions = np.array(TRUE_EMISSIONS)
    t0 = time.perf_counter()
    successes = 0
    worst_rate = worst_emission = 0.0
    for seed in range(10):
        cohort = simulate_cohort(
            SimSpec(model=truth, n_subjects=500, followup_cap=10.0, seed=seed)
        ).cohort
        config = TrainConfig(
            n_states=3, mask_preset="chain", max_iterations=60, tolerance=1e-3, seed=seed
        )
        fit = em_fit(init_random(config, cohort), cohort, config)
        rate_err = max(
            abs(fit.model.Q[0, 1] - TRUE_RATES[0]) / TRUE_RATES[0],
            abs(fit.model.Q[1, 2] - TRUE_RATES[1]) / TRUE_RATES[1],
        )
        emission_err = float(np.abs(fit.model.emissions - target_emissions).max())
        worst_rate = max(worst_rate, rate_err)
        worst_emission = max(worst_emission, emission_err)
        if rate_err <= 0.15 and emission_err <= 0.05:
            successes += 1
    elapsed = time.perf_counter() - t0
    _criterion(
        "parameter recovery",
        successes >= 9 and elapsed < 60.0,
        f"{successes}/10 seeds within bounds (need >= 9); worst rate error "
        f"{worst_rate:.1%} (cap 15%), worst emission error {worst_emission:.3f} "
        f"(cap 0.05), {elapsed:.1f}s (<60s)",
    )


def _selection_truth():
    """True K = 4 chain whose adjacent states differ in two markers."""
    emissions = [
        [0.05] * 6,
        [0.95, 0.95, 0.05, 0.05, 0.05, 0.05],
        [0.95, 0.95, 0.95, 0.95, 0.05, 0.05],
        [0.95] * 6,
    ]
    return make_chain_model([0.55, 0.55, 0.55], emissions, pi=[1.0, 0.0, 0.0, 0.0])


def test_state_count_selection_protocol():
    t0 = time.perf_counter()
    p_eleven = param_count(11, 3, "chain")
    bic_exact = bic(-2000.0, 53, 1000) == 53 * math.log(1000) - 2.0 * (-2000.0)

    truth = _selection_truth()
    recommended = []
    counts_ok = True
    bic_rows_ok = True
    for m in range(10):
        cohort = simulate_cohort(
            SimSpec(model=truth, n_subjects=90, followup_cap=9.0, seed=derive_seed(77, m))
        ).cohort
        spec = GridSpec(
            k_min=2,
            k_max=6,
            n_splits=3,
            n_inits=3,
            train_ratio=0.7,
            constraints=("chain",),
            master_seed=m,
            max_iterations=120,
            tolerance=1e-3,
        )
        results = run_grid(cohort, spec)
        counts_ok = counts_ok and len(results) == 45 and spec.n_cells == 45
        if m == 0:
            for v in range(spec.n_splits):
                split_seed = derive_seed(spec.master_seed, _TAG_SPLIT, v)
                _, validation = split_subjects(cohort, spec.train_ratio, split_seed)
                n_val = validation.total_visits
                for row in results:
                    if row.split_id == v and row.error is None:
                        bic_rows_ok = bic_rows_ok and (
                            row.validation_bic
                            == bic(row.validation_ll, row.param_count, n_val)
                        )
        recommended.append(select_k(results).recommended_k)
    successes = sum(1 for k in recommended if k in (4, 5))
    elapsed = time.perf_counter() - t0
    _criterion(
        "model selection protocol",
        counts_ok and successes >= 8 and p_eleven == 53 and bic_exact
        and bic_rows_ok and elapsed < 300.0,
        f"45 results per grid, recommendations {recommended} -> {successes}/10 in "
        f"{{4,5}} (need >= 8), p(K=11,M=3,chain) = {p_eleven} (expect 53), BIC identity "
        f"exact = {bic_exact and bic_rows_ok}, {elapsed:.0f}s (<300s)",
    )


def test_dwell_and_horizon_analytics():
    t0 = time.perf_counter()
    model = make_chain_model([0.25, 0.5], [[0.05], [0.5], [0.95]], pi=[1.0, 0.0, 0.0])
    dwell = dwell_times(model)
    exact = (
        dwell[0].mean_years == 1.0 / 0.25
        and dwell[1].mean_years == 1.0 / 0.5
        and dwell[2].mean_years == math.inf
    )

    sojourn_model = make_chain_model([0.25], [[0.1], [0.9]], pi=[1.0, 0.0])
    rng = np.random.default_rng(7046)
    sojourns = np.empty(10_000)
    filled = 0
    while filled < sojourns.size:
        path = simulate_path(sojourn_model, 400.0, rng, initial_state=0)
        if path.n_jumps >= 1:
            sojourns[filled] = path.jump_times[1]
            filled += 1
    mc_err = abs(float(sojourns.mean()) - 4.0) / 4.0

    slow = make_chain_model(
        [0.1] * 5,
        [[0.05], [0.2], [0.35], [0.5], [0.65], [0.8]],
        pi=[1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    )
    P24 = horizon_matrix(slow, 24.0)
    diag = np.diag(P24)
    dominant = bool(np.all(diag > 1.0 - diag)) and bool(np.all(P24.argmax(axis=1) == np.arange(6)))

    elapsed = time.perf_counter() - t0
    _criterion(
        "dwell and horizon analytics",
        exact and mc_err < 0.05 and dominant,
        f"dwell means exactly 1/q, Monte-Carlo sojourn mean {sojourns.mean():.3f}y vs 4.0y "
        f"({mc_err:.1%}, cap 5%), 24-month matrix diagonally dominant = {dominant}, {elapsed:.1f}s",
    )


def test_trajectory_segmentation_recovers_three_blocks():
    t0 = time.perf_counter()
    rates = [0.5] * 10
    rates[2] = 1e-9
    rates[7] = 1e-9
    emissions = [[0.95] * k + [0.05] * (10 - k) for k in range(11)]
    pi = np.zeros(11)
    pi[[0, 3, 8]] = 1.0 / 3.0
    model = make_chain_model(rates, emissions, pi=pi)
    result = simulate_cohort(SimSpec(model=model, n_subjects=45, followup_cap=12.0, seed=31))
    labeled = label_cohort(model, result.cohort)
    segments = segment_trajectories(model, labeled)

    shapes = [seg.states for seg in segments]
    expected = [tuple(range(0, 3)), tuple(range(3, 8)), tuple(range(8, 11))]
    members = [set(seg.member_ids) for seg in segments]
    all_ids = {seq.subject_id for seq in result.cohort.sequences}
    partition = (
        set().union(*members) == all_ids
        and sum(len(m) for m in members) == len(all_ids)
        and all(members)
    )
    elapsed = time.perf_counter() - t0
    _criterion(
        "trajectory segmentation",
        shapes == expected and partition,
        f"segments {['-'.join(map(str, (s[0], s[-1]))) for s in shapes]} (expect 0-2, 3-7, 8-10), "
        f"member counts {[len(m) for m in members]} partition 45 subjects, {elapsed:.1f}s",
    )


def test_determinism_and_lossless_round_trips(tmp_path):
    t0 = time.perf_counter()
    truth = make_chain_model(
        [0.5, 0.8], [[0.1, 0.1], [0.9, 0.1], [0.9, 0.9]], pi=[1.0, 0.0, 0.0]
    )
    spec = SimSpec(model=truth, n_subjects=30, followup_cap=8.0, seed=5)
    cohort = simulate_cohort(spec).cohort

    paths = [str(tmp_path / f"cohort{i}.csv") for i in (1, 2)]
    write_cohort_csv(cohort, paths[0])
    write_cohort_csv(simulate_cohort(spec).cohort, paths[1])
    cohorts_identical = open(paths[0], "rb").read() == open(paths[1], "rb").read()

    parsed = parse_cohort_csv(paths[0])
    cohort_lossless = all(
        (a.times == b.times).all() and (a.observations == b.observations).all()
        for a, b in zip(cohort.sequences, parsed.sequences)
    )

    config = TrainConfig(n_states=3, mask_preset="chain", max_iterations=25, tolerance=1e-3, seed=0)
    fit = em_fit(init_random(config, cohort), cohort, config)
    model_path = str(tmp_path / "model.json")
    write_model(fit.model, model_path)
    back = read_model(model_path)
    model_lossless = (
        np.array_equal(back.pi, fit.model.pi)
        and np.array_equal(back.Q, fit.model.Q)
        and np.array_equal(back.emissions, fit.model.emissions)
        and back.marker_names == fit.model.marker_names
    )

    grid_spec = GridSpec(
        k_min=2, k_max=3, n_splits=2, n_inits=2, constraints=("chain",),
        master_seed=3, max_iterations=10, tolerance=1e-2,
    )
    payload = [
        json.dumps(
            [{k: v for k, v in asdict(r).items() if k != "wall_time"} for r in run_grid(cohort, grid_spec)],
            sort_keys=True,
        )
        for _ in range(2)
    ]
    grids_identical = payload[0] == payload[1]

    bundle_paths = [str(tmp_path / f"bundle{i}.json") for i in (1, 2)]
    emit_report(fit.model, cohort, bundle_paths[0], horizons=(12, 24))
    emit_report(fit.model, cohort, bundle_paths[1], horizons=(12, 24))
    bundles_identical = open(bundle_paths[0], "rb").read() == open(bundle_paths[1], "rb").read()

    elapsed = time.perf_counter() - t0
    _criterion(
        "determinism and round-trips",
        cohorts_identical and cohort_lossless and model_lossless
        and grids_identical and bundles_identical,
        f"cohort CSVs byte-identical = {cohorts_identical}, CSV round-trip lossless = "
        f"{cohort_lossless}, model JSON round-trip lossless = {model_lossless}, grids "
        f"value-identical (timing metadata aside) = {grids_identical}, bundles "
        f"byte-identical = {bundles_identical}, {elapsed:.1f}s",
    )
