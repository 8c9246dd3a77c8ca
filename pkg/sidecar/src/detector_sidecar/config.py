"""Service configuration: detector kind, model identifiers, threshold, port."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class DetectorKind(str, enum.Enum):
    CROSS_PERPLEXITY = "cross_perplexity"
    CURVATURE = "curvature"


# Decision thresholds the service labels against, one per detector kind.
# Strictly greater than the threshold means the AI-positive label.
DEFAULT_THRESHOLDS: dict[DetectorKind, float] = {
    DetectorKind.CROSS_PERPLEXITY: 0.9015310749276843,
    DetectorKind.CURVATURE: 0.7890873125379173,
}

# Hard cap on request text size; longer requests are refused with 413.
DEFAULT_MAX_TEXT_CHARS = 20_000


class SidecarConfigError(ValueError):
    """Raised for invalid service configuration."""


@dataclass
class SidecarConfig:
    """Everything the service needs to load models and answer requests.

    Model identifiers use the form "builtin:<name>"; the name seeds the
    deterministic built-in character model, so two identifiers give two
    distinct fixed models. The reference model is only consulted by the
    cross-perplexity detector.
    """

    detector_kind: DetectorKind = DetectorKind.CROSS_PERPLEXITY
    scorer_model: str = "builtin:prose-a"
    reference_model: str = "builtin:prose-b"
    threshold: float | None = None
    port: int = 8799
    max_text_chars: int = DEFAULT_MAX_TEXT_CHARS

    def __post_init__(self) -> None:
        self.detector_kind = DetectorKind(self.detector_kind)
        if self.threshold is None:
            self.threshold = DEFAULT_THRESHOLDS[self.detector_kind]
        self.threshold = float(self.threshold)
        if not 0.0 <= self.threshold <= 1.0:
            raise SidecarConfigError(f"threshold must be within [0, 1]: {self.threshold}")
        self.port = int(self.port)
        if not 0 < self.port < 65536:
            raise SidecarConfigError(f"port out of range: {self.port}")
        self.max_text_chars = int(self.max_text_chars)
        if self.max_text_chars <= 0:
            raise SidecarConfigError(f"max_text_chars must be positive: {self.max_text_chars}")
        for model in (self.scorer_model, self.reference_model):
            if not model.startswith("builtin:") or len(model) <= len("builtin:"):
                raise SidecarConfigError(
                    f"unknown model identifier {model!r}; expected builtin:<name>"
                )
