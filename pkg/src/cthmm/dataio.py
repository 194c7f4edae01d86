"""File formats: cohort CSV, model document, labels CSV, report bundle.

All writers are deterministic: identical inputs produce byte-identical
files (JSON with sorted keys, LF line endings, shortest round-trip float
representation, no timestamps).
"""

from __future__ import annotations

import csv
import json
import math
from typing import Iterable

import numpy as np

from .errors import CohortParseError, SchemaError
from .model import MISSING, NEGATIVE, POSITIVE, ChainModel, Cohort, TransitionMask, VisitSequence
from .outputs import (
    LabeledCohort,
    dwell_times,
    horizon_matrix,
    label_cohort,
    segment_trajectories,
    state_summary,
    timeline_bands,
)

MODEL_SCHEMA_VERSION = 1
BUNDLE_SCHEMA_VERSION = 1

_MARKER_CELLS = {"0", "1", ""}


# ---------------------------------------------------------------- cohort csv

def parse_cohort_csv(path: str, marker_names: Iterable[str] | None = None) -> Cohort:
    """Read a cohort from `subject_id,age_years,<marker...>[,<aux...>]`.

    Marker cells are `1` (positive), `0` (negative), or empty (missing).
    Columns after age_years are treated as markers up to the first column
    containing a non-{0,1,empty} cell; the rest become auxiliary columns.
    Pass ``marker_names`` to pin the marker set explicitly instead.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CohortParseError("empty file", 1)
    header = rows[0]
    if len(header) < 3 or header[0] != "subject_id" or header[1] != "age_years":
        raise CohortParseError(
            "header must start with subject_id,age_years and name at least one marker", 1
        )
    columns = header[2:]
    if len(set(header)) != len(header):
        raise CohortParseError("duplicate column names in header", 1)

    body = [(i + 2, row) for i, row in enumerate(rows[1:]) if row]
    for line, row in body:
        if len(row) != len(header):
            raise CohortParseError(
                f"expected {len(header)} cells, got {len(row)}", line
            )

    if marker_names is None:
        markers = _infer_marker_columns(columns, body)
    else:
        markers = list(marker_names)
        if markers != columns[: len(markers)]:
            raise CohortParseError(
                f"marker columns {markers} must lead the data columns, found {columns[: len(markers)]}",
                1,
            )
    if not markers:
        raise CohortParseError("no marker columns identified", 1)
    aux_cols = columns[len(markers):]

    order: list[str] = []
    per_subject: dict[str, dict] = {}
    for line, row in body:
        sid = row[0]
        try:
            age = float(row[1])
        except ValueError:
            raise CohortParseError(f"age_years cell {row[1]!r} is not a number", line) from None
        if not math.isfinite(age):
            raise CohortParseError(f"age_years cell {row[1]!r} is not finite", line)
        if sid not in per_subject:
            per_subject[sid] = {"ages": [], "obs": [], "aux": {c: [] for c in aux_cols}}
            order.append(sid)
        entry = per_subject[sid]
        if entry["ages"] and age <= entry["ages"][-1]:
            raise CohortParseError(
                f"ages for subject {sid!r} must be strictly increasing", line
            )
        entry["ages"].append(age)
        obs_row = []
        for name, cell in zip(markers, row[2 : 2 + len(markers)]):
            if cell not in _MARKER_CELLS:
                raise CohortParseError(
                    f"marker {name!r} cell {cell!r} must be 0, 1, or empty", line
                )
            obs_row.append(MISSING if cell == "" else (POSITIVE if cell == "1" else NEGATIVE))
        entry["obs"].append(obs_row)
        for name, cell in zip(aux_cols, row[2 + len(markers):]):
            entry["aux"][name].append(cell if cell != "" else None)

    aux_schema = {c: _infer_aux_kind(per_subject, c) for c in aux_cols}
    sequences = []
    for sid in order:
        entry = per_subject[sid]
        aux = {
            c: [_convert_aux(v, aux_schema[c]) for v in entry["aux"][c]] for c in aux_cols
        }
        sequences.append(
            VisitSequence(
                subject_id=sid,
                times=np.array(entry["ages"]),
                observations=np.array(entry["obs"], dtype=np.int8),
                aux=aux,
            )
        )
    return Cohort(sequences=sequences, marker_names=tuple(markers), aux_schema=aux_schema)


def _infer_marker_columns(columns: list[str], body: list) -> list[str]:
    n = len(columns)
    binary_like = n
    for j in range(n):
        cells = {row[2 + j] for _, row in body}
        if not cells <= _MARKER_CELLS:
            binary_like = j
            break
    return columns[:binary_like]


def _infer_aux_kind(per_subject: dict, col: str) -> str:
    values = [
        v
        for entry in per_subject.values()
        for v in entry["aux"][col]
        if v is not None
    ]
    if values and all(v in ("0", "1") for v in values):
        return "binary"
    try:
        for v in values:
            float(v)
        return "numeric"
    except ValueError:
        return "categorical"


def _convert_aux(value, kind: str):
    if value is None:
        return None
    if kind == "numeric":
        return float(value)
    if kind == "binary":
        return int(value)
    return value


def write_cohort_csv(cohort: Cohort, path: str) -> None:
    aux_cols = list(cohort.aux_schema)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject_id", "age_years", *cohort.marker_names, *aux_cols])
        for seq in cohort.sequences:
            for t in range(seq.n_visits):
                cells = [seq.subject_id, repr(float(seq.times[t]))]
                for m in range(len(cohort.marker_names)):
                    v = seq.observations[t, m]
                    cells.append("" if v == MISSING else str(int(v)))
                for col in aux_cols:
                    v = seq.aux[col][t]
                    cells.append("" if v is None else _format_aux(v, cohort.aux_schema[col]))
                writer.writerow(cells)


def _format_aux(value, kind: str) -> str:
    if kind == "numeric":
        return repr(float(value))
    if kind == "binary":
        return str(int(value))
    return str(value)


def write_truth_csv(true_states: dict[str, np.ndarray], cohort: Cohort, path: str) -> None:
    """Ground-truth sidecar: subject_id,age_years,true_state."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject_id", "age_years", "true_state"])
        for seq in cohort.sequences:
            states = true_states[seq.subject_id]
            for t in range(seq.n_visits):
                writer.writerow([seq.subject_id, repr(float(seq.times[t])), int(states[t])])


# ------------------------------------------------------------ labels csv

def write_labels_csv(labeled: LabeledCohort, path: str) -> None:
    """Per-visit decoded labels with the filtered posterior spelled out."""
    K = labeled.n_states
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["subject_id", "age_years", "viterbi_state", "filtered_argmax", "discrepancy"]
            + [f"p_state_{k}" for k in range(K)]
        )
        for subject in labeled.subjects:
            for t in range(subject.n_visits):
                writer.writerow(
                    [
                        subject.subject_id,
                        repr(float(subject.times[t])),
                        int(subject.viterbi_states[t]),
                        int(subject.filtered_argmax[t]),
                        int(subject.discrepancy[t]),
                    ]
                    + [repr(float(p)) for p in subject.filtered[t]]
                )


# ---------------------------------------------------------- model document

def model_to_dict(model: ChainModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "n_states": model.n_states,
        "marker_names": list(model.marker_names),
        "mask": model.mask.preset,
        "pi": model.pi.tolist(),
        "rates": [
            {"from": i, "to": j, "rate": float(model.Q[i, j])} for i, j in model.mask.edges
        ],
        "emissions": model.emissions.tolist(),
    }


def model_from_dict(doc: dict) -> ChainModel:
    if not isinstance(doc, dict):
        raise SchemaError("model document must be an object")
    version = doc.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported model schema_version {version!r}, expected {MODEL_SCHEMA_VERSION}"
        )
    missing = {"n_states", "marker_names", "mask", "pi", "rates", "emissions"} - doc.keys()
    if missing:
        raise SchemaError(f"model document missing fields: {sorted(missing)}")
    K = doc["n_states"]
    mask = TransitionMask.from_preset(doc["mask"], K)
    allowed = set(mask.edges)
    seen = set()
    Q = np.zeros((K, K))
    for entry in doc["rates"]:
        edge = (entry["from"], entry["to"])
        if edge not in allowed:
            raise SchemaError(f"rate entry {edge} is not an allowed {doc['mask']} edge")
        if edge in seen:
            raise SchemaError(f"duplicate rate entry {edge}")
        seen.add(edge)
        Q[edge] = entry["rate"]
    if seen != allowed:
        raise SchemaError(
            f"expected rate entries for all {len(allowed)} allowed edges, got {len(seen)}"
        )
    Q[np.arange(K), np.arange(K)] = -Q.sum(axis=1)
    return ChainModel(
        marker_names=tuple(doc["marker_names"]),
        pi=np.array(doc["pi"], dtype=float),
        Q=Q,
        emissions=np.array(doc["emissions"], dtype=float),
        mask=mask,
    )


def write_model(model: ChainModel, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def read_model(path: str) -> ChainModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"model document is not valid JSON: {exc}") from exc
    return model_from_dict(doc)


# ----------------------------------------------------------- report bundle

def build_report(
    model: ChainModel,
    cohort: Cohort,
    horizons: tuple[int, ...] = (24,),
    selection: dict | None = None,
    running_max: tuple[str, ...] = (),
) -> dict:
    """Assemble the self-contained analytics bundle for the CLI, API, and UI.

    Contains everything the explorer renders: model parameters, dwell
    times, horizon matrices, per-state summaries, trajectory segments
    (chain-mask models only), per-subject timeline bands and labels, and
    the auxiliary columns needed to recompute subgroup summaries.
    """
    horizons = tuple(int(h) for h in horizons)
    if any(h < 0 for h in horizons):
        raise ValueError(f"horizons must be >= 0 months, got {list(horizons)}")
    labeled = label_cohort(model, cohort)
    bands = timeline_bands(labeled)
    summary = state_summary(model, labeled, running_max=running_max)
    if model.mask.preset == "chain":
        segments = [
            {
                "states": list(seg.states),
                "member_ids": list(seg.member_ids),
                "entry_ages": {
                    str(state): _distribution_summary(ages)
                    for state, ages in seg.entry_ages.items()
                },
            }
            for seg in segment_trajectories(model, labeled)
        ]
    else:
        segments = None

    bundle = {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "n_states": model.n_states,
        "n_subjects": cohort.n_subjects,
        "total_visits": cohort.total_visits,
        "marker_names": list(model.marker_names),
        "aux_schema": dict(cohort.aux_schema),
        "model": model_to_dict(model),
        "dwell": [
            {
                "state": d.state,
                "exit_rate": d.exit_rate,
                "mean_years": None if math.isinf(d.mean_years) else d.mean_years,
                "is_sink": d.is_sink,
            }
            for d in dwell_times(model)
        ],
        "horizons": {
            str(int(h)): horizon_matrix(model, h).tolist() for h in horizons
        },
        "state_summary": {
            "emissions": summary.emissions.tolist(),
            "marker_names": list(summary.marker_names),
            "visit_counts": summary.visit_counts.tolist(),
            "mean_age": summary.mean_age.tolist(),
            "marker_positive_rate": summary.marker_positive_rate.tolist(),
            "aux": summary.aux,
        },
        "segments": segments,
        "timelines": {
            sid: [{"state": b.state, "start": b.start, "end": b.end} for b in sub_bands]
            for sid, sub_bands in bands.items()
        },
        "labels": {
            s.subject_id: {
                "ages": s.times.tolist(),
                "viterbi": s.viterbi_states.tolist(),
                "filtered_argmax": s.filtered_argmax.tolist(),
                "discrepancy": [int(v) for v in s.discrepancy],
            }
            for s in labeled.subjects
        },
        "aux": {
            seq.subject_id: {col: list(seq.aux[col]) for col in cohort.aux_schema}
            for seq in cohort.sequences
        },
        "discrepancies": {"total": labeled.n_discrepancies},
        "selection": selection,
    }
    return _jsonify(bundle)


def _distribution_summary(ages: np.ndarray) -> dict:
    return {
        "count": int(len(ages)),
        "mean": float(np.mean(ages)),
        "min": float(np.min(ages)),
        "q25": float(np.percentile(ages, 25)),
        "median": float(np.percentile(ages, 50)),
        "q75": float(np.percentile(ages, 75)),
        "max": float(np.max(ages)),
    }


def _jsonify(value):
    """Recursively coerce to JSON-safe types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_bundle(bundle: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(bundle, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def read_bundle(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            bundle = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"bundle is not valid JSON: {exc}") from exc
    version = bundle.get("schema_version") if isinstance(bundle, dict) else None
    if version != BUNDLE_SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported bundle schema_version {version!r}, expected {BUNDLE_SCHEMA_VERSION}"
        )
    missing = {"model", "dwell", "horizons", "state_summary", "timelines", "labels"} - bundle.keys()
    if missing:
        raise SchemaError(f"bundle missing fields: {sorted(missing)}")
    return bundle


def emit_report(
    model: ChainModel,
    cohort: Cohort,
    path: str,
    horizons: tuple[int, ...] = (24,),
    selection: dict | None = None,
    running_max: tuple[str, ...] = (),
) -> dict:
    bundle = build_report(
        model, cohort, horizons=horizons, selection=selection, running_max=running_max
    )
    write_bundle(bundle, path)
    return bundle
