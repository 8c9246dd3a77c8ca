"""Model-as-judge checks for coherence and prompt relevance.

Both judges ask for a True/False verdict plus justification and parse the
first standalone true/false token out of the reply. An unparseable reply is
re-asked once with an explicit format reminder appended through a dedicated
template placeholder; the reminder changes the rendered prompt, so a cached
bad reply is not replayed. Judge verdicts are metrics from a model, not
ground truth, and reports must present them as such.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .gateway import Gateway, PromptRequest

log = logging.getLogger(__name__)

_VERDICT_RE = re.compile(r"\b(true|false)\b", re.IGNORECASE)

_FORMAT_REMINDER = (
    "\nYour reply must start with the single word True or False, "
    "optionally followed by a short justification."
)


class JudgeParseError(Exception):
    """No standalone true/false token, even after the re-ask."""

    def __init__(self, message: str, raw_response: str) -> None:
        super().__init__(message)
        self.raw_response = raw_response


@dataclass(frozen=True)
class JudgeVerdict:
    dimension: str  # "coherence" | "relevance"
    passed: bool
    rationale: str
    raw_response: str

    def to_record(self) -> dict:
        return {
            "dimension": self.dimension,
            "passed": self.passed,
            "rationale": self.rationale,
            "raw_response": self.raw_response,
        }


def parse_verdict(raw: str) -> tuple[bool, str]:
    """Extract (verdict, rationale) from a judge reply.

    The verdict is the first standalone true/false token, case-insensitive.
    The rationale is whatever follows that token, with leading separator
    punctuation stripped. No token at all raises JudgeParseError.
    """
    match = _VERDICT_RE.search(raw)
    if match is None:
        raise JudgeParseError(f"no true/false verdict in judge reply: {raw!r}", raw)
    verdict = match.group(1).lower() == "true"
    rationale = raw[match.end() :].lstrip(" \t\r\n.,:;!?)-").strip()
    return verdict, rationale


def _ask(
    gateway: Gateway,
    template_id: str,
    bindings: dict,
    model_id: str,
    decode_params: dict,
) -> tuple[bool, str, str]:
    first = gateway.complete(
        PromptRequest(
            template_id=template_id,
            bindings={**bindings, "format_reminder": ""},
            model_id=model_id,
            decode_params=decode_params,
        )
    )
    try:
        verdict, rationale = parse_verdict(first.text)
        return verdict, rationale, first.text
    except JudgeParseError:
        log.warning("unparseable %s judge reply, re-asking once", template_id)
    second = gateway.complete(
        PromptRequest(
            template_id=template_id,
            bindings={**bindings, "format_reminder": _FORMAT_REMINDER},
            model_id=model_id,
            decode_params=decode_params,
        )
    )
    verdict, rationale = parse_verdict(second.text)
    return verdict, rationale, second.text


def judge_coherence(
    gateway: Gateway, text: str, model_id: str, decode_params: dict | None = None
) -> JudgeVerdict:
    """Ask whether the text has coherence problems.

    The template makes True mean "has problems", so the check passes when the
    parsed verdict is False.
    """
    verdict, rationale, raw = _ask(
        gateway, "coherence", {"text": text}, model_id, decode_params or {}
    )
    return JudgeVerdict(
        dimension="coherence", passed=not verdict, rationale=rationale, raw_response=raw
    )


def judge_relevance(
    gateway: Gateway,
    text: str,
    writing_prompt: str,
    model_id: str,
    decode_params: dict | None = None,
) -> JudgeVerdict:
    """Ask whether the text fully adheres to its writing prompt."""
    verdict, rationale, raw = _ask(
        gateway,
        "relevance",
        {"text": text, "writing_prompt": writing_prompt},
        model_id,
        decode_params or {},
    )
    return JudgeVerdict(
        dimension="relevance", passed=verdict, rationale=rationale, raw_response=raw
    )
