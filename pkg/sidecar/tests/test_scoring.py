"""Scorer unit tests: determinism, ranges, and the score-to-label rule."""

import numpy as np
import pytest

from detector_sidecar.config import DetectorKind, SidecarConfig, SidecarConfigError
from detector_sidecar.lm import BOS_INDEX, OTHER_INDEX, VOCAB_SIZE, CharLM, ModelLoadError, encode
from detector_sidecar.scoring import (
    Scorer,
    ScoringError,
    cross_perplexity_raw,
    curvature_raw,
    label_for,
    score_probability,
)

SAMPLE = "The keeper walked the pier before dawn while the tide dragged the stones."


class TestCharLM:
    def test_same_identifier_same_weights(self):
        a = CharLM("builtin:prose-a")
        b = CharLM("builtin:prose-a")
        indices = encode(SAMPLE)
        assert np.array_equal(a.token_log_probs(indices), b.token_log_probs(indices))

    def test_different_identifiers_differ(self):
        a = CharLM("builtin:prose-a")
        b = CharLM("builtin:prose-b")
        indices = encode(SAMPLE)
        assert not np.allclose(a.token_log_probs(indices), b.token_log_probs(indices))

    def test_bad_identifier_rejected(self):
        with pytest.raises(ModelLoadError):
            CharLM("prose-a")
        with pytest.raises(ModelLoadError):
            CharLM("builtin:")

    def test_encode_buckets_non_printable(self):
        indices = encode("a\tб")
        assert indices[0] == ord("a") - 32
        assert indices[1] == OTHER_INDEX
        # Non-ASCII encodes to multi-byte UTF-8; every byte lands in the bucket.
        assert all(i == OTHER_INDEX for i in indices[2:])
        assert BOS_INDEX == VOCAB_SIZE - 1

    def test_distributions_are_normalized(self):
        model = CharLM("builtin:prose-a")
        dists = model.log_distributions(encode("hello world"))
        totals = np.exp(dists).sum(axis=1)
        assert np.allclose(totals, 1.0, atol=1e-12)
        assert dists.shape == (len("hello world"), VOCAB_SIZE)


class TestRawStatistics:
    def test_cross_perplexity_positive_and_deterministic(self):
        scorer = CharLM("builtin:prose-a")
        reference = CharLM("builtin:prose-b")
        first = cross_perplexity_raw(SAMPLE, scorer, reference)
        second = cross_perplexity_raw(SAMPLE, scorer, reference)
        assert first == second
        assert first > 0.0

    def test_curvature_deterministic(self):
        scorer = CharLM("builtin:prose-a")
        assert curvature_raw(SAMPLE, scorer) == curvature_raw(SAMPLE, scorer)

    def test_empty_text_rejected(self):
        scorer = CharLM("builtin:prose-a")
        reference = CharLM("builtin:prose-b")
        with pytest.raises(ScoringError):
            cross_perplexity_raw("", scorer, reference)
        with pytest.raises(ScoringError):
            curvature_raw("", scorer)

    def test_texts_get_distinct_scores(self):
        scorer = CharLM("builtin:prose-a")
        reference = CharLM("builtin:prose-b")
        a = cross_perplexity_raw(SAMPLE, scorer, reference)
        b = cross_perplexity_raw("completely different material here", scorer, reference)
        assert a != b


class TestProbabilityAndLabel:
    def test_scores_live_in_unit_interval(self):
        scorer = CharLM("builtin:prose-a")
        reference = CharLM("builtin:prose-b")
        for kind in DetectorKind:
            score = score_probability(SAMPLE, kind, scorer, reference)
            assert 0.0 < score < 1.0

    def test_cross_perplexity_requires_reference(self):
        scorer = CharLM("builtin:prose-a")
        with pytest.raises(ScoringError):
            score_probability(SAMPLE, DetectorKind.CROSS_PERPLEXITY, scorer, None)

    def test_label_rule_is_strictly_greater(self):
        assert label_for(0.5, 0.5) == "human"
        assert label_for(0.5 + 1e-12, 0.5) == "ai"
        assert label_for(0.4999999, 0.5) == "human"

    def test_scorer_response_fields(self):
        scorer = Scorer(SidecarConfig(detector_kind=DetectorKind.CURVATURE))
        response = scorer.score_text(SAMPLE)
        assert set(response) == {"label", "score", "detector", "version"}
        assert response["detector"] == "curvature"
        assert response["label"] in {"ai", "human"}
        assert isinstance(response["score"], float)
        assert response["version"].endswith("+prose-a")


class TestConfig:
    def test_threshold_defaults_per_kind(self):
        cross = SidecarConfig(detector_kind=DetectorKind.CROSS_PERPLEXITY)
        curvature = SidecarConfig(detector_kind=DetectorKind.CURVATURE)
        assert cross.threshold == 0.9015310749276843
        assert curvature.threshold == 0.7890873125379173

    def test_explicit_threshold_kept(self):
        config = SidecarConfig(threshold=0.5)
        assert config.threshold == 0.5

    def test_invalid_values_rejected(self):
        with pytest.raises(SidecarConfigError):
            SidecarConfig(threshold=1.5)
        with pytest.raises(SidecarConfigError):
            SidecarConfig(port=0)
        with pytest.raises(SidecarConfigError):
            SidecarConfig(scorer_model="prose-a")
        with pytest.raises(SidecarConfigError):
            SidecarConfig(max_text_chars=0)
