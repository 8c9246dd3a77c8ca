"""The two detector scorers and the score-to-label rule.

cross_perplexity: ratio of the scorer model's per-character log-perplexity to
the cross-entropy between the scorer's and a reference model's next-character
distributions. Lower ratios read as machine-like, so the probability mapping
inverts the ratio around a fixed center.

curvature: how far the text's log-likelihood sits above the model's own
expected log-likelihood, in standard deviations computed analytically from
the per-position distributions. Higher sits read as machine-like.

Both raw statistics pass through a fixed logistic squash onto (0, 1). The
squash constants are fixed by convention, not calibrated against any corpus;
the decision thresholds carried in the service configuration are what give
the scores their operating point. Labeling is a pure function of
(score, threshold): strictly greater means the AI-positive label.
"""

from __future__ import annotations

import numpy as np

from .config import DetectorKind, SidecarConfig
from .lm import CharLM, encode

# Logistic squash constants (fixed, uncalibrated; see module docstring).
CROSS_PERPLEXITY_CENTER = 1.0
CROSS_PERPLEXITY_SCALE = 0.02
CURVATURE_SCALE = 2.0

AI_LABEL = "ai"
HUMAN_LABEL = "human"


class ScoringError(ValueError):
    """Raised when a text cannot be scored (e.g. empty after encoding)."""


def _sigmoid(x: float) -> float:
    return float(1.0 / (1.0 + np.exp(-x)))


def cross_perplexity_raw(text: str, scorer: CharLM, reference: CharLM) -> float:
    """log-perplexity(scorer) / cross-entropy(scorer's dists, reference's dists)."""
    indices = encode(text)
    if len(indices) == 0:
        raise ScoringError("cannot score empty text")
    log_ppl = -float(scorer.token_log_probs(indices).mean())
    scorer_dists = np.exp(scorer.log_distributions(indices))
    reference_log_dists = reference.log_distributions(indices)
    cross_entropy = -float((scorer_dists * reference_log_dists).sum(axis=1).mean())
    return log_ppl / cross_entropy


def curvature_raw(text: str, scorer: CharLM) -> float:
    """Standardized gap between actual and expected log-likelihood under scorer."""
    indices = encode(text)
    if len(indices) == 0:
        raise ScoringError("cannot score empty text")
    log_dists = scorer.log_distributions(indices)
    dists = np.exp(log_dists)
    log_likelihood = float(log_dists[np.arange(len(indices)), indices].sum())
    expected_per_position = (dists * log_dists).sum(axis=1)
    second_moment = (dists * log_dists**2).sum(axis=1)
    variance = float((second_moment - expected_per_position**2).sum())
    expected = float(expected_per_position.sum())
    if variance <= 0.0:
        return 0.0
    return (log_likelihood - expected) / float(np.sqrt(variance))


def score_probability(text: str, kind: DetectorKind, scorer: CharLM, reference: CharLM | None) -> float:
    if kind is DetectorKind.CROSS_PERPLEXITY:
        if reference is None:
            raise ScoringError("cross_perplexity needs a reference model")
        raw = cross_perplexity_raw(text, scorer, reference)
        return _sigmoid((CROSS_PERPLEXITY_CENTER - raw) / CROSS_PERPLEXITY_SCALE)
    raw = curvature_raw(text, scorer)
    return _sigmoid(raw / CURVATURE_SCALE)


def label_for(score: float, threshold: float) -> str:
    """Pure (score, threshold) -> label; strictly greater flags as AI."""
    return AI_LABEL if score > threshold else HUMAN_LABEL


class Scorer:
    """Loaded models plus configuration, ready to answer score requests."""

    def __init__(self, config: SidecarConfig) -> None:
        self.config = config
        self.scorer_model = CharLM(config.scorer_model)
        self.reference_model = (
            CharLM(config.reference_model)
            if config.detector_kind is DetectorKind.CROSS_PERPLEXITY
            else None
        )

    def score_text(self, text: str) -> dict:
        score = score_probability(
            text, self.config.detector_kind, self.scorer_model, self.reference_model
        )
        return {
            "label": label_for(score, self.config.threshold),
            "score": score,
            "detector": self.config.detector_kind.value,
            "version": _version_string(self.config),
        }


def _version_string(config: SidecarConfig) -> str:
    from . import __version__

    return f"{__version__}+{config.scorer_model.split(':', 1)[1]}"
