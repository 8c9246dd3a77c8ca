"""Clients and label algebra for external AI-text detectors.

Detectors live behind a small HTTP contract (POST /v1/score with {"text": ...},
GET /healthz) so commercial APIs, local scorers, and recorded transcripts are
interchangeable. Label vocabularies differ per vendor; everything is parsed
into one seven-value enum and grouped into three buckets for reporting.
Score-only detectors get a label from a strict greater-than threshold.
"""

from __future__ import annotations

import enum
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import requests

log = logging.getLogger(__name__)

# Published operating points for the two bundled score-only detector families,
# on their 0-to-1 AI-likelihood scale.
CROSS_PERPLEXITY_THRESHOLD = 0.9015310749276843
CURVATURE_THRESHOLD = 0.7890873125379173

SCORE_PATH = "/v1/score"
HEALTH_PATH = "/healthz"

# Response shape for POST /v1/score. Field names are normative; a response
# must carry detector and version plus at least one of label or score.
RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["detector", "version"],
    "properties": {
        "label": {"type": "string"},
        "score": {"type": "number"},
        "ai_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "keywords": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["phrase", "count"],
                "properties": {
                    "phrase": {"type": "string"},
                    "count": {"type": "integer", "minimum": 0},
                },
            },
        },
        "detector": {"type": "string"},
        "version": {"type": "string"},
    },
    "anyOf": [{"required": ["label"]}, {"required": ["score"]}],
}


class Label(str, enum.Enum):
    AI = "ai"
    HIGHLY_LIKELY_AI = "highly_likely_ai"
    LIKELY_AI = "likely_ai"
    POSSIBLY_AI = "possibly_ai"
    MIXED = "mixed"
    UNLIKELY_AI = "unlikely_ai"
    HUMAN = "human"


class GroupedLabel(str, enum.Enum):
    AI_INVOLVEMENT = "ai_involvement"
    MIXED = "mixed"
    HUMAN = "human"


# Three-way grouping used by every report. The possibly-AI label lands in the
# mixed bucket: treating it as AI involvement would overstate detection.
_GROUPING = {
    Label.AI: GroupedLabel.AI_INVOLVEMENT,
    Label.HIGHLY_LIKELY_AI: GroupedLabel.AI_INVOLVEMENT,
    Label.LIKELY_AI: GroupedLabel.AI_INVOLVEMENT,
    Label.HUMAN: GroupedLabel.HUMAN,
    Label.UNLIKELY_AI: GroupedLabel.HUMAN,
    Label.MIXED: GroupedLabel.MIXED,
    Label.POSSIBLY_AI: GroupedLabel.MIXED,
}


class DetectorError(Exception):
    """Base for detector failures."""


class DetectorUnavailableError(DetectorError):
    """Endpoint unreachable or retries exhausted."""


class DetectorProtocolError(DetectorError):
    """Response did not match the wire contract; raw payload preserved."""

    def __init__(self, message: str, payload: object = None) -> None:
        super().__init__(message)
        self.payload = payload


def parse_label(raw: str) -> Label:
    """Parse a vendor label, tolerating case and spacing differences."""
    canonical = "_".join(part for part in raw.strip().lower().replace("-", " ").replace("_", " ").split())
    try:
        return Label(canonical)
    except ValueError:
        raise DetectorProtocolError(f"unrecognized detector label {raw!r}", payload=raw)


def group_label(label: Label) -> GroupedLabel:
    return _GROUPING[label]


def binarize_score(score: float, threshold: float) -> bool:
    """AI-positive iff score is strictly greater than the threshold."""
    return score > threshold


@dataclass(frozen=True)
class KeywordHit:
    phrase: str
    count: int


@dataclass(frozen=True)
class DetectorVerdict:
    detector_id: str
    label: Label | None
    score: float | None = None
    ai_fraction: float | None = None
    keywords: tuple[KeywordHit, ...] = ()
    version: str | None = None

    def to_record(self) -> dict:
        return {
            "detector": self.detector_id,
            "label": self.label.value if self.label else None,
            "score": self.score,
            "ai_fraction": self.ai_fraction,
            "keywords": [{"phrase": k.phrase, "count": k.count} for k in self.keywords],
            "version": self.version,
        }

    @classmethod
    def from_record(cls, record: dict) -> "DetectorVerdict":
        return cls(
            detector_id=record["detector"],
            label=Label(record["label"]) if record.get("label") else None,
            score=record.get("score"),
            ai_fraction=record.get("ai_fraction"),
            keywords=tuple(
                KeywordHit(k["phrase"], k["count"]) for k in record.get("keywords") or ()
            ),
            version=record.get("version"),
        )


class HttpDetectorClient:
    """Talks to one detector endpoint over the score/health contract."""

    def __init__(
        self,
        detector_id: str,
        base_url: str,
        threshold: float | None = None,
        timeout_s: float = 60.0,
        max_attempts: int = 3,
        base_delay_ms: int = 250,
    ) -> None:
        self.detector_id = detector_id
        self.base_url = base_url.rstrip("/")
        self.threshold = threshold
        self.timeout_s = timeout_s
        self.max_attempts = max_attempts
        self.base_delay_ms = base_delay_ms

    def healthy(self) -> bool:
        try:
            response = requests.get(self.base_url + HEALTH_PATH, timeout=self.timeout_s)
        except requests.RequestException:
            return False
        return response.status_code == 200 and response.json().get("status") == "ok"

    def score(self, text: str) -> dict:
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = requests.post(
                    self.base_url + SCORE_PATH, json={"text": text}, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = DetectorUnavailableError(
                        f"{self.detector_id} returned {response.status_code}"
                    )
                else:
                    try:
                        return response.json()
                    except ValueError as exc:
                        raise DetectorProtocolError(
                            f"{self.detector_id} returned non-JSON body",
                            payload=response.text,
                        ) from exc
            if attempt < self.max_attempts:
                time.sleep(self.base_delay_ms / 1000.0 * (2 ** (attempt - 1)))
        raise DetectorUnavailableError(
            f"{self.detector_id} unreachable after {self.max_attempts} attempts: {last_error}"
        )


class TranscriptDetectorClient:
    """Replays recorded request/response pairs; no network involved.

    The transcript is JSONL of {"request": {"text": ...}, "response": {...}}
    keyed by exact text, which makes offline runs and contract tests
    reproducible without the detector process.
    """

    def __init__(
        self, detector_id: str, path: str | Path, threshold: float | None = None
    ) -> None:
        self.detector_id = detector_id
        self.threshold = threshold
        self._responses: dict[str, dict] = {}
        with Path(path).open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._responses[record["request"]["text"]] = record["response"]

    def healthy(self) -> bool:
        return True

    def score(self, text: str) -> dict:
        if text not in self._responses:
            raise DetectorUnavailableError(
                f"{self.detector_id} transcript has no recorded response for this text"
            )
        return self._responses[text]


class MockDetectorClient:
    """Returns scripted response payloads in call order."""

    def __init__(
        self, detector_id: str, responses: Sequence[dict], threshold: float | None = None
    ) -> None:
        self.detector_id = detector_id
        self.threshold = threshold
        self._responses = list(responses)
        self._position = 0
        self.calls: list[str] = []

    def healthy(self) -> bool:
        return True

    def score(self, text: str) -> dict:
        self.calls.append(text)
        if self._position >= len(self._responses):
            raise DetectorUnavailableError(f"{self.detector_id} mock script exhausted")
        response = self._responses[self._position]
        self._position += 1
        return response


def classify(client, text: str) -> DetectorVerdict:
    """Query one detector and normalize its response into a verdict.

    A response with a score but no label gets the label derived from the
    client's configured threshold. A response with neither label nor score
    violates the contract.
    """
    payload = client.score(text)
    if not isinstance(payload, Mapping):
        raise DetectorProtocolError("detector response is not an object", payload=payload)
    label: Label | None = None
    if payload.get("label") is not None:
        label = parse_label(payload["label"])
    score = payload.get("score")
    if score is not None:
        score = float(score)
    if label is None:
        if score is None:
            raise DetectorProtocolError(
                "detector response carries neither label nor score", payload=dict(payload)
            )
        threshold = getattr(client, "threshold", None)
        if threshold is None:
            raise DetectorProtocolError(
                f"{client.detector_id} returned only a score and no threshold is configured",
                payload=dict(payload),
            )
        label = Label.AI if binarize_score(score, threshold) else Label.HUMAN
    keywords = tuple(
        KeywordHit(entry["phrase"], int(entry["count"]))
        for entry in payload.get("keywords") or ()
    )
    ai_fraction = payload.get("ai_fraction")
    return DetectorVerdict(
        detector_id=client.detector_id,
        label=label,
        score=score,
        ai_fraction=float(ai_fraction) if ai_fraction is not None else None,
        keywords=keywords,
        version=payload.get("version"),
    )


@dataclass(frozen=True)
class DetectorRates:
    """Aggregate outcomes for one detector over a verdict set.

    Counts are carried alongside percentages so that rates over a partition
    of the set recombine exactly.
    """

    detector_id: str
    n: int
    n_ai_involvement: int
    n_mixed: int
    n_human: int
    pct_ai_involvement: float
    pct_mixed: float
    mean_ai_fraction: float | None
    n_scored: int
    n_score_flagged: int
    pct_score_flagged: float | None

    def to_record(self) -> dict:
        return {
            "detector": self.detector_id,
            "n": self.n,
            "n_ai_involvement": self.n_ai_involvement,
            "n_mixed": self.n_mixed,
            "n_human": self.n_human,
            "pct_ai_involvement": self.pct_ai_involvement,
            "pct_mixed": self.pct_mixed,
            "mean_ai_fraction": self.mean_ai_fraction,
            "n_scored": self.n_scored,
            "n_score_flagged": self.n_score_flagged,
            "pct_score_flagged": self.pct_score_flagged,
        }


def detection_rates(verdicts: Sequence[DetectorVerdict]) -> dict[str, DetectorRates]:
    """Per-detector grouped-label percentages and score statistics."""
    if not verdicts:
        raise ValueError("detection_rates needs at least one verdict")
    by_detector: dict[str, list[DetectorVerdict]] = {}
    for verdict in verdicts:
        by_detector.setdefault(verdict.detector_id, []).append(verdict)
    rates: dict[str, DetectorRates] = {}
    for detector_id, group in sorted(by_detector.items()):
        n = len(group)
        n_ai = sum(1 for v in group if v.label and group_label(v.label) is GroupedLabel.AI_INVOLVEMENT)
        n_mixed = sum(1 for v in group if v.label and group_label(v.label) is GroupedLabel.MIXED)
        n_human = sum(1 for v in group if v.label and group_label(v.label) is GroupedLabel.HUMAN)
        fractions = [v.ai_fraction for v in group if v.ai_fraction is not None]
        scored = [v for v in group if v.score is not None]
        flagged = [
            v for v in scored if v.label and group_label(v.label) is GroupedLabel.AI_INVOLVEMENT
        ]
        rates[detector_id] = DetectorRates(
            detector_id=detector_id,
            n=n,
            n_ai_involvement=n_ai,
            n_mixed=n_mixed,
            n_human=n_human,
            pct_ai_involvement=100.0 * n_ai / n,
            pct_mixed=100.0 * n_mixed / n,
            mean_ai_fraction=sum(fractions) / len(fractions) if fractions else None,
            n_scored=len(scored),
            n_score_flagged=len(flagged),
            pct_score_flagged=100.0 * len(flagged) / len(scored) if scored else None,
        )
    return rates
