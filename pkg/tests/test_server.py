import numpy as np
import pytest
from fastapi.testclient import TestClient

from cthmm.dataio import build_report
from cthmm.model import Cohort, VisitSequence
from cthmm.server import create_app

from conftest import make_chain_model
from oracles import taylor_expm


def _model():
    return make_chain_model(
        rates=[0.4, 0.7],
        emissions=[[0.1, 0.1, 0.1], [0.9, 0.1, 0.1], [0.9, 0.9, 0.9]],
        pi=[0.8, 0.15, 0.05],
    )


def _bundle():
    model = _model()
    sequences = [
        VisitSequence(
            "S1", [0.0, 1.0, 2.0],
            np.array([[0, 0, 0], [0, 0, 0], [0, 0, 0]], dtype=np.int8),
            aux={"score": [1.0, 2.0, None], "site": ["north", "north", "south"]},
        ),
        VisitSequence(
            "S2", [0.0, 1.0],
            np.array([[1, 1, 1], [1, 1, 1]], dtype=np.int8),
            aux={"score": [4.0, 5.0], "site": ["east", "east"]},
        ),
        VisitSequence(
            "S3", [0.0, 3.0],
            np.array([[0, 0, 0], [1, 1, 1]], dtype=np.int8),
            aux={"score": [2.5, None], "site": [None, "west"]},
        ),
        VisitSequence(
            "S4", [0.0],
            np.array([[1, 0, 0]], dtype=np.int8),
            aux={"score": [3.0], "site": ["north"]},
        ),
    ]
    cohort = Cohort(
        sequences,
        model.marker_names,
        aux_schema={"score": "numeric", "site": "categorical"},
    )
    return build_report(model, cohort, horizons=(24,), selection={"recommended_k": 3})


@pytest.fixture(scope="module")
def bundle():
    return _bundle()


@pytest.fixture(scope="module")
def client(bundle):
    return TestClient(create_app(bundle))


def test_model_endpoint(client, bundle):
    response = client.get("/api/model")
    assert response.status_code == 200
    assert response.json() == bundle["model"]


def test_states_summary_endpoint(client, bundle):
    doc = client.get("/api/states/summary").json()
    assert doc["n_states"] == 3
    assert doc["state_summary"] == bundle["state_summary"]
    assert doc["segments"] == bundle["segments"]
    assert doc["discrepancies"] == bundle["discrepancies"]


def test_dwell_endpoint(client, bundle):
    doc = client.get("/api/dwell").json()
    assert doc == {"dwell": bundle["dwell"]}
    assert doc["dwell"][0]["mean_years"] == pytest.approx(2.5)
    assert doc["dwell"][2]["mean_years"] is None


def test_transitions_precomputed_horizon(client, bundle):
    doc = client.get("/api/transitions").json()
    assert doc["horizon_months"] == 24
    assert doc["matrix"] == bundle["horizons"]["24"]


def test_transitions_computed_horizon(client):
    doc = client.get("/api/transitions", params={"horizon": 60}).json()
    matrix = np.array(doc["matrix"])
    expected = taylor_expm(_model().Q, 5.0)
    assert np.abs(matrix - expected).max() < 1e-9

    identity = np.array(client.get("/api/transitions", params={"horizon": 0}).json()["matrix"])
    assert np.abs(identity - np.eye(3)).max() < 1e-12

    assert client.get("/api/transitions", params={"horizon": -6}).status_code == 400


def test_selection_endpoint(client):
    assert client.get("/api/selection").json() == {"selection": {"recommended_k": 3}}


def test_selection_endpoint_null_when_absent(bundle):
    stripped = dict(bundle, selection=None)
    with TestClient(create_app(stripped)) as other:
        assert other.get("/api/selection").json() == {"selection": None}


def test_timelines_unfiltered(client, bundle):
    doc = client.get("/api/timelines").json()
    assert doc["subject_ids"] == sorted(bundle["labels"])
    assert doc["timelines"] == bundle["timelines"]


def test_timelines_filtered(client, bundle):
    doc = client.get("/api/timelines", params={"filter": "starts-in(0)"}).json()
    expected = sorted(
        sid for sid, label in bundle["labels"].items() if label["viterbi"][0] == 0
    )
    assert doc["subject_ids"] == expected
    assert set(doc["timelines"]) == set(expected)
    assert doc["timelines"][expected[0]] == bundle["timelines"][expected[0]]


def test_filter_parse_error_carries_position(client):
    response = client.get("/api/timelines", params={"filter": "starts-in("})
    assert response.status_code == 400
    detail = response.json()["detail"]
    assert detail["position"] == 10
    assert "(at position 10)" in detail["message"]

    response = client.post("/api/subgroups", json={"filter": "@"})
    assert response.status_code == 400
    assert response.json()["detail"]["position"] == 0


def test_subgroups_all_subjects(client, bundle):
    doc = client.post("/api/subgroups", json={"filter": ""}).json()
    assert doc["filter"] == ""
    assert doc["n_subjects"] == 4
    assert doc["subject_ids"] == sorted(bundle["labels"])
    per_state = doc["per_state"]
    assert sum(per_state["visit_counts"]) == bundle["total_visits"]

    counts = [0] * 3
    age_sum = [0.0] * 3
    scores = [[] for _ in range(3)]
    for sid, label in bundle["labels"].items():
        for age, k, v in zip(label["ages"], label["viterbi"], bundle["aux"][sid]["score"]):
            counts[k] += 1
            age_sum[k] += age
            if v is not None:
                scores[k].append(v)
    assert per_state["visit_counts"] == counts
    for k in range(3):
        if counts[k]:
            assert per_state["mean_age"][k] == pytest.approx(age_sum[k] / counts[k])
            if scores[k]:
                assert per_state["aux"]["score"][k] == pytest.approx(float(np.mean(scores[k])))
        else:
            assert per_state["mean_age"][k] is None
            assert per_state["aux"]["score"][k] is None


def test_subgroups_filtered_subset(client, bundle):
    everyone = client.post("/api/subgroups", json={"filter": ""}).json()
    subset = client.post("/api/subgroups", json={"filter": "visited-set contains {2}"}).json()
    assert set(subset["subject_ids"]) <= set(everyone["subject_ids"])
    assert subset["subject_ids"] == sorted(
        sid for sid, label in bundle["labels"].items() if 2 in label["viterbi"]
    )
    assert sum(subset["per_state"]["visit_counts"]) <= bundle["total_visits"]
    # Body defaults to the match-all filter.
    assert client.post("/api/subgroups", json={}).json()["n_subjects"] == 4


def test_repeated_requests_are_identical(client):
    for path in ("/api/model", "/api/dwell", "/api/timelines", "/api/states/summary"):
        assert client.get(path).content == client.get(path).content


def test_root_lists_endpoints(client):
    doc = client.get("/").json()
    assert "/api/model" in doc["endpoints"]
    assert any("subgroups" in e for e in doc["endpoints"])


def test_static_dir_serves_ui(bundle, tmp_path):
    (tmp_path / "index.html").write_text("<html>explorer shell</html>", encoding="utf-8")
    with TestClient(create_app(bundle, static_dir=str(tmp_path))) as ui_client:
        response = ui_client.get("/")
        assert response.status_code == 200
        assert "explorer shell" in response.text
        assert ui_client.get("/api/dwell").status_code == 200


def test_cors_allows_local_origins_only(client):
    allowed = client.get("/api/dwell", headers={"Origin": "http://localhost:5173"})
    assert allowed.headers.get("access-control-allow-origin") == "http://localhost:5173"
    loopback = client.get("/api/dwell", headers={"Origin": "http://127.0.0.1:8000"})
    assert loopback.headers.get("access-control-allow-origin") == "http://127.0.0.1:8000"
    denied = client.get("/api/dwell", headers={"Origin": "http://example.com"})
    assert "access-control-allow-origin" not in denied.headers
