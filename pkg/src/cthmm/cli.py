"""Command-line interface: simulate, train, select, decode, report, serve.

Every command is deterministic given its flags and seeds. Exit codes:
0 on success, 2 on validation errors (bad files, bad arguments, invariant
violations), 1 on anything unexpected.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import sys

import click

from . import __version__
from .dataio import (
    emit_report,
    parse_cohort_csv,
    read_bundle,
    read_model,
    write_cohort_csv,
    write_labels_csv,
    write_model,
    write_truth_csv,
)
from .errors import CohortParseError, QueryParseError, SchemaError
from .outputs import label_cohort
from .selection import GridSpec, derive_seed, run_grid, select_k
from .synth import SimSpec, simulate_cohort
from .training import TrainConfig, em_fit, init_random

_VALIDATION_ERRORS = (CohortParseError, SchemaError, QueryParseError, ValueError, OSError)


def _validated(fn):
    """Map input/contract failures to exit code 2; let anything else escape."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _VALIDATION_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
@click.version_option(version=__version__)
def cli():
    """Constrained continuous-time hidden Markov models of disease progression."""


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--subjects", required=True, type=int)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--truth-out", type=click.Path(dir_okay=False), help="Ground-truth state sidecar CSV.")
@click.option("--interval-mean", default=0.8, show_default=True, help="Mean visit interval, years.")
@click.option("--interval-sd", default=0.94, show_default=True, help="SD of visit interval, years.")
@click.option("--cap", default=15.0, show_default=True, help="Follow-up cap, years.")
@click.option("--missingness", default=0.1, show_default=True, help="Per-marker dropout probability.")
@_validated
def simulate(model_path, subjects, seed, out_path, truth_out, interval_mean, interval_sd, cap, missingness):
    """Simulate a synthetic cohort from a generating model."""
    model = read_model(model_path)
    spec = SimSpec(
        model=model,
        n_subjects=subjects,
        interval_mean=interval_mean,
        interval_sd=interval_sd,
        followup_cap=cap,
        missingness=missingness,
        seed=seed,
    )
    result = simulate_cohort(spec)
    write_cohort_csv(result.cohort, out_path)
    if truth_out:
        write_truth_csv(result.true_states, result.cohort, truth_out)
    click.echo(f"wrote {result.cohort.n_subjects} subjects, {result.cohort.total_visits} visits to {out_path}")


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--states", required=True, type=int)
@click.option("--mask", default="chain", show_default=True, type=click.Choice(["chain", "forward", "full"]))
@click.option("--inits", default=1, show_default=True, type=int)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--max-iterations", default=500, show_default=True, type=int)
@click.option("--tolerance", default=1e-6, show_default=True, type=float)
@click.option("--markers", help="Comma-separated marker column names (default: inferred).")
@_validated
def train(data_path, states, mask, inits, seed, out_path, max_iterations, tolerance, markers):
    """Fit a model by EM; with --inits > 1, keep the best by training LL."""
    marker_names = tuple(markers.split(",")) if markers else None
    cohort = parse_cohort_csv(data_path, marker_names=marker_names)
    if inits < 1:
        raise click.BadParameter("--inits must be >= 1")
    best = None
    for m in range(inits):
        config = TrainConfig(
            n_states=states,
            mask_preset=mask,
            max_iterations=max_iterations,
            tolerance=tolerance,
            seed=derive_seed(seed, m),
        )
        fit = em_fit(init_random(config, cohort), cohort, config)
        click.echo(
            f"init {m}: LL {fit.final_ll:.6f} after {fit.iterations} iterations"
            f"{'' if fit.converged else ' (not converged)'}"
        )
        if best is None or fit.final_ll > best.final_ll:
            best = fit
    write_model(best.model, out_path)
    click.echo(f"wrote model (K={states}, mask={mask}, LL {best.final_ll:.6f}) to {out_path}")


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--kmin", required=True, type=int)
@click.option("--kmax", required=True, type=int)
@click.option("--splits", default=10, show_default=True, type=int)
@click.option("--inits", default=10, show_default=True, type=int)
@click.option("--ratio", default=0.7, show_default=True, type=float)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--mask", "masks", multiple=True, default=("chain",), show_default=True,
              type=click.Choice(["chain", "forward", "full"]))
@click.option("--max-iterations", default=500, show_default=True, type=int)
@click.option("--tolerance", default=1e-6, show_default=True, type=float)
@click.option("--markers", help="Comma-separated marker column names (default: inferred).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_validated
def select(data_path, kmin, kmax, splits, inits, ratio, seed, masks, max_iterations, tolerance, markers, out_path):
    """Run the split/state-count/init grid and report a recommended K."""
    marker_names = tuple(markers.split(",")) if markers else None
    cohort = parse_cohort_csv(data_path, marker_names=marker_names)
    spec = GridSpec(
        k_min=kmin,
        k_max=kmax,
        n_splits=splits,
        n_inits=inits,
        train_ratio=ratio,
        constraints=tuple(masks),
        master_seed=seed,
        max_iterations=max_iterations,
        tolerance=tolerance,
    )
    results = run_grid(cohort, spec)
    report = select_k(results)
    document = {
        "grid": dataclasses.asdict(spec),
        "results": [dataclasses.asdict(r) for r in results],
        "selection": report.to_dict(),
    }
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(document, fh, sort_keys=True, indent=2)
        fh.write("\n")
    failed = sum(1 for r in results if r.error is not None)
    click.echo(f"{len(results)} fits ({failed} failed), wrote {out_path}")
    flags = f" [{'; '.join(report.flags)}]" if report.flags else ""
    click.echo(f"recommended K = {report.recommended_k}{flags}")


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_validated
def decode(model_path, data_path, out_path):
    """Label every visit with its Viterbi state and filtered posterior."""
    model = read_model(model_path)
    cohort = parse_cohort_csv(data_path, marker_names=model.marker_names)
    labeled = label_cohort(model, cohort)
    write_labels_csv(labeled, out_path)
    click.echo(
        f"labeled {labeled.total_visits} visits "
        f"({labeled.n_discrepancies} discrepancies) to {out_path}"
    )


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", "horizons", multiple=True, default=(24,), show_default=True, type=int)
@click.option("--selection", "selection_path", type=click.Path(exists=True, dir_okay=False),
              help="Embed the selection report from a `select` output file.")
@click.option("--running-max", "running_max", multiple=True,
              help="Auxiliary columns to summarize as per-subject running maxima.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_validated
def report(model_path, data_path, horizons, selection_path, running_max, out_path):
    """Emit the self-contained analytics bundle consumed by serve and the UI."""
    model = read_model(model_path)
    cohort = parse_cohort_csv(data_path, marker_names=model.marker_names)
    selection = None
    if selection_path:
        with open(selection_path, encoding="utf-8") as fh:
            selection = json.load(fh).get("selection")
    bundle = emit_report(
        model,
        cohort,
        out_path,
        horizons=tuple(horizons),
        selection=selection,
        running_max=tuple(running_max),
    )
    click.echo(
        f"wrote bundle (K={bundle['n_states']}, {bundle['n_subjects']} subjects, "
        f"horizons {sorted(bundle['horizons'], key=int)}) to {out_path}"
    )


@cli.command()
@click.option("--bundle", "bundle_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--static", "static_dir", type=click.Path(file_okay=False),
              help="Directory of built UI assets to serve at /.")
@_validated
def serve(bundle_path, port, host, static_dir):
    """Serve a report bundle over HTTP for the browser explorer."""
    read_bundle(bundle_path)  # validate before binding the port
    from .server import serve as run_server

    run_server(bundle_path, port=port, host=host, static_dir=static_dir)


main = cli

if __name__ == "__main__":
    main()
