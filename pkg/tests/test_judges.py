"""True/false verdict parsing and the single re-ask on unparseable replies."""

from __future__ import annotations

import pytest

from stitchtext.gateway import ResponseCache
from stitchtext.judges import (
    JudgeParseError,
    judge_coherence,
    judge_relevance,
    parse_verdict,
)



class TestParseVerdict:
    def test_simple_true(self):
        verdict, rationale = parse_verdict("True. The ending contradicts the start.")
        assert verdict is True
        assert rationale == "The ending contradicts the start."

    def test_simple_false(self):
        verdict, rationale = parse_verdict("False")
        assert verdict is False
        assert rationale == ""

    def test_case_insensitive(self):
        assert parse_verdict("TRUE, because reasons")[0] is True
        assert parse_verdict("false - fine throughout")[0] is False

    def test_first_token_wins(self):
        verdict, rationale = parse_verdict("True. But false in spirit.")
        assert verdict is True
        assert rationale == "But false in spirit."

    def test_verdict_after_preamble(self):
        verdict, rationale = parse_verdict("Verdict: False; no issues found")
        assert verdict is False
        assert rationale == "no issues found"

    def test_embedded_in_word_does_not_match(self):
        with pytest.raises(JudgeParseError):
            parse_verdict("Truthfully, the text is falsely accused.")

    def test_no_verdict_raises_with_raw(self):
        with pytest.raises(JudgeParseError) as excinfo:
            parse_verdict("The text flows nicely.")
        assert excinfo.value.raw_response == "The text flows nicely."


class TestCoherenceJudge:
    def test_true_means_problems_so_check_fails(self, mock_gateway):
        gateway, _ = mock_gateway(["True. The second scene contradicts the first."])
        verdict = judge_coherence(gateway, "some text", "m")
        assert verdict.dimension == "coherence"
        assert verdict.passed is False
        assert "contradicts" in verdict.rationale

    def test_false_means_clean_so_check_passes(self, mock_gateway):
        gateway, _ = mock_gateway(["False. Reads smoothly."])
        verdict = judge_coherence(gateway, "some text", "m")
        assert verdict.passed is True


class TestRelevanceJudge:
    def test_true_means_adheres(self, mock_gateway):
        gateway, _ = mock_gateway(["True. Follows the prompt closely."])
        verdict = judge_relevance(gateway, "text", "prompt", "m")
        assert verdict.dimension == "relevance"
        assert verdict.passed is True

    def test_false_means_off_prompt(self, mock_gateway):
        gateway, _ = mock_gateway(["False. Ignores the requested setting."])
        verdict = judge_relevance(gateway, "text", "prompt", "m")
        assert verdict.passed is False


class TestReAsk:
    def test_unparseable_reply_triggers_exactly_one_re_ask(self, mock_gateway):
        gateway, backend = mock_gateway(["Hmm, hard to say.", "False. Clean."])
        verdict = judge_coherence(gateway, "text", "m")
        assert verdict.passed is True
        assert len(backend.calls) == 2
        # The re-ask carries the format reminder; the first ask does not.
        assert "must start with the single word" not in backend.calls[0]["prompt"]
        assert "must start with the single word" in backend.calls[1]["prompt"]

    def test_re_ask_bypasses_cached_bad_reply(self, mock_gateway):
        gateway, backend = mock_gateway(["Shrug.", "True. Broken midway."])
        gateway.cache = ResponseCache()
        verdict = judge_coherence(gateway, "text", "m")
        assert verdict.passed is False
        assert len(backend.calls) == 2  # second call was not served from cache

    def test_second_failure_propagates(self, mock_gateway):
        gateway, backend = mock_gateway(["No idea.", "Still no idea."])
        with pytest.raises(JudgeParseError):
            judge_coherence(gateway, "text", "m")
        assert len(backend.calls) == 2

    def test_raw_response_preserved_on_verdict(self, mock_gateway):
        raw = "False. All good."
        gateway, _ = mock_gateway([raw])
        verdict = judge_coherence(gateway, "text", "m")
        assert verdict.raw_response == raw
