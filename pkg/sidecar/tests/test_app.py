"""Wire-level tests through the test client: contract shapes and error codes."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi.testclient import TestClient

from detector_sidecar.app import create_app
from detector_sidecar.config import DetectorKind, SidecarConfig

SAMPLE = "The keeper walked the pier before dawn while the tide dragged the stones."


def _client(**overrides) -> TestClient:
    return TestClient(create_app(SidecarConfig(**overrides)))


class TestHealth:
    def test_healthz_ok_after_startup(self):
        response = _client().get("/healthz")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}

    def test_model_load_failure_reported_as_503(self):
        config = SidecarConfig()
        config.scorer_model = "not-a-model"  # skip validation to force a load failure
        client = TestClient(create_app(config))
        health = client.get("/healthz")
        assert health.status_code == 503
        assert health.json()["status"] == "error"
        score = client.post("/v1/score", json={"text": SAMPLE})
        assert score.status_code == 503


class TestScoreEndpoint:
    def test_contract_fields(self):
        response = _client().post("/v1/score", json={"text": "hello world"})
        assert response.status_code == 200
        payload = response.json()
        assert isinstance(payload["score"], float)
        assert 0.0 <= payload["score"] <= 1.0
        assert payload["label"] in {"ai", "human"}
        assert payload["detector"] == "cross_perplexity"
        assert isinstance(payload["version"], str) and payload["version"]

    def test_deterministic_across_calls_and_apps(self):
        first = _client().post("/v1/score", json={"text": SAMPLE}).json()
        second = _client().post("/v1/score", json={"text": SAMPLE}).json()
        assert first == second

    def test_empty_body_and_empty_text_rejected(self):
        client = _client()
        assert client.post("/v1/score", content=b"").status_code == 400
        assert client.post("/v1/score", json={}).status_code == 400
        assert client.post("/v1/score", json={"text": ""}).status_code == 400
        assert client.post("/v1/score", json={"text": 5}).status_code == 400

    def test_oversize_text_rejected_with_max_documented(self):
        client = _client(max_text_chars=100)
        response = client.post("/v1/score", json={"text": "x" * 101})
        assert response.status_code == 413
        assert "100" in response.json()["detail"]

    def test_label_boundary_against_live_score(self):
        score = _client().post("/v1/score", json={"text": SAMPLE}).json()["score"]
        at_threshold = _client(threshold=score).post("/v1/score", json={"text": SAMPLE}).json()
        assert at_threshold["label"] == "human"
        just_below = float(np.nextafter(score, 0.0))
        flagged = _client(threshold=just_below).post("/v1/score", json={"text": SAMPLE}).json()
        assert flagged["label"] == "ai"

    def test_curvature_kind_served(self):
        client = _client(detector_kind=DetectorKind.CURVATURE)
        payload = client.post("/v1/score", json={"text": SAMPLE}).json()
        assert payload["detector"] == "curvature"

    def test_concurrent_requests_all_answered(self):
        app = create_app(SidecarConfig())

        def one_request(i: int) -> dict:
            with TestClient(app) as client:
                response = client.post("/v1/score", json={"text": f"{SAMPLE} {i % 2}"})
                assert response.status_code == 200
                return response.json()

        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(one_request, range(8)))
        assert results[0] == results[2] == results[4] == results[6]
        assert results[1] == results[3] == results[5] == results[7]
        assert results[0] != results[1]
