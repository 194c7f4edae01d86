"""Read-only HTTP service exposing a report bundle to the explorer UI.

All responses are derived from the loaded bundle; there are no mutation
endpoints and no server-side session state, so handlers are reentrant and
identical requests always produce identical responses. Subgroup filter
expressions are evaluated here, against the bundle's decoded labels, so
the browser never needs the raw cohort.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import queries
from .dataio import model_from_dict, read_bundle
from .errors import QueryParseError
from .linalg import transition_matrix
from .outputs import _aggregate

_LOCAL_ORIGINS = r"https?://(localhost|127\.0\.0\.1)(:\d+)?"


class SubgroupRequest(BaseModel):
    filter: str = ""


def _subject_features(bundle: dict) -> dict[str, queries.SubjectFeatures]:
    features = {}
    for sid, label in bundle["labels"].items():
        states = label["viterbi"]
        dwell: dict[int, float] = {}
        for band in bundle["timelines"][sid]:
            dwell[band["state"]] = dwell.get(band["state"], 0.0) + (band["end"] - band["start"])
        features[sid] = queries.SubjectFeatures(
            visited=frozenset(states),
            first_state=states[0],
            last_state=states[-1],
            dwell=dwell,
        )
    return features


def _evaluate_filter(bundle: dict, features: dict, expression: str) -> list[str]:
    try:
        predicate = queries.parse_query(expression)
    except QueryParseError as exc:
        raise HTTPException(
            status_code=400,
            detail={"message": str(exc), "position": exc.position},
        ) from exc
    return sorted(sid for sid, f in features.items() if predicate.matches(f))


def _subgroup_summary(bundle: dict, subject_ids: list[str]) -> dict:
    K = bundle["n_states"]
    counts = [0] * K
    age_sum = [0.0] * K
    aux_schema: dict[str, str] = bundle.get("aux_schema", {})
    acc: dict[str, list[list]] = {col: [[] for _ in range(K)] for col in aux_schema}
    for sid in subject_ids:
        label = bundle["labels"][sid]
        for age, k in zip(label["ages"], label["viterbi"]):
            counts[k] += 1
            age_sum[k] += age
        for col in aux_schema:
            for v, k in zip(bundle["aux"][sid][col], label["viterbi"]):
                if v is not None:
                    acc[col][k].append(v)
    return {
        "visit_counts": counts,
        "mean_age": [age_sum[k] / counts[k] if counts[k] else None for k in range(K)],
        "aux": {
            col: [_aggregate(acc[col][k], kind) for k in range(K)]
            for col, kind in aux_schema.items()
        },
    }


def create_app(bundle: dict, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="trajectory explorer api", docs_url=None, redoc_url=None, openapi_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=_LOCAL_ORIGINS,
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )
    model = model_from_dict(bundle["model"])
    features = _subject_features(bundle)

    @app.get("/api/model")
    def get_model() -> JSONResponse:
        return JSONResponse(bundle["model"])

    @app.get("/api/states/summary")
    def get_states_summary() -> JSONResponse:
        return JSONResponse(
            {
                "n_states": bundle["n_states"],
                "state_summary": bundle["state_summary"],
                "segments": bundle.get("segments"),
                "discrepancies": bundle.get("discrepancies"),
            }
        )

    @app.get("/api/dwell")
    def get_dwell() -> JSONResponse:
        return JSONResponse({"dwell": bundle["dwell"]})

    @app.get("/api/transitions")
    def get_transitions(horizon: int = 24) -> JSONResponse:
        if horizon < 0:
            raise HTTPException(status_code=400, detail={"message": "horizon must be >= 0 months"})
        cached = bundle["horizons"].get(str(horizon))
        matrix = cached if cached is not None else transition_matrix(
            model.Q, horizon / 12.0
        ).tolist()
        return JSONResponse({"horizon_months": horizon, "matrix": matrix})

    @app.get("/api/selection")
    def get_selection() -> JSONResponse:
        return JSONResponse({"selection": bundle.get("selection")})

    @app.get("/api/timelines")
    def get_timelines(filter: str = "") -> JSONResponse:
        matched = _evaluate_filter(bundle, features, filter)
        return JSONResponse(
            {
                "subject_ids": matched,
                "timelines": {sid: bundle["timelines"][sid] for sid in matched},
            }
        )

    @app.post("/api/subgroups")
    def post_subgroups(request: SubgroupRequest) -> JSONResponse:
        matched = _evaluate_filter(bundle, features, request.filter)
        return JSONResponse(
            {
                "filter": request.filter,
                "subject_ids": matched,
                "n_subjects": len(matched),
                "per_state": _subgroup_summary(bundle, matched),
            }
        )

    if static_dir is not None and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:

        @app.get("/")
        def index() -> JSONResponse:
            return JSONResponse(
                {
                    "endpoints": [
                        "/api/model",
                        "/api/states/summary",
                        "/api/dwell",
                        "/api/transitions?horizon=<months>",
                        "/api/selection",
                        "/api/timelines?filter=<query>",
                        "POST /api/subgroups",
                    ]
                }
            )

    return app


def serve(bundle_path: str, port: int, host: str = "127.0.0.1", static_dir: str | None = None):
    import uvicorn

    app = create_app(read_bundle(bundle_path), static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)
