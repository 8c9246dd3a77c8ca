#!/usr/bin/env python3
"""Record real scoring-service responses into a replayable transcript.

Runs both detector kinds in-process (no sockets) and captures request and
response pairs keyed by text. Texts are distinct across kinds because
transcript lookup is by exact text. The primary suite's contract tests run
against this file without the service installed or running.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from detector_sidecar.app import create_app
from detector_sidecar.config import DetectorKind, SidecarConfig

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "sidecar_transcript.jsonl"

TEXTS = {
    DetectorKind.CROSS_PERPLEXITY: [
        "The keeper crossed the yard before first light and checked the lamp wicks one by one.",
        "In conclusion, it is important to note that the aforementioned considerations "
        "delve into a rich tapestry of interconnected factors.",
        "Rain moved across the harbor in slow gray sheets; the boats knocked against "
        "the pilings until the tide turned at last, toward evening, toward home.",
        "hello world",
    ],
    DetectorKind.CURVATURE: [
        "A trader from the valley set out his stall beside the well and counted the "
        "jars of honey that had survived the long road over the pass.",
        "Furthermore, the data demonstrates that optimal outcomes are achieved when "
        "stakeholders leverage synergistic frameworks across verticals.",
        "Twelve herons stood in the shallows. None of them moved. The river moved.",
        "goodbye moon",
    ],
}


def main() -> None:
    rows = []
    for kind, texts in TEXTS.items():
        client = TestClient(create_app(SidecarConfig(detector_kind=kind)))
        health = client.get("/healthz")
        assert health.status_code == 200 and health.json() == {"status": "ok"}, health.text
        for text in texts:
            response = client.post("/v1/score", json={"text": text})
            assert response.status_code == 200, response.text
            rows.append({"request": {"text": text}, "response": response.json()})
    with OUT.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"recorded {len(rows)} responses to {OUT}")


if __name__ == "__main__":
    main()
