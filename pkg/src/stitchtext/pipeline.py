"""Draft, revise, and polish loop that stitches snippets into one text.

A single model call drafts the text from the prompt and the sampled snippets
under explicit copy and length targets. If the measured copy rate falls below
threshold, or a detector flags the draft as AI (per the configured gate), one
revision pass re-asks with the draft included. Up to a fixed number of polish
passes then repair coherence seams, stopping early the moment the model
replies with the literal no-edits marker. Every stage is recorded with its
attribution so a run can be audited after the fact.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .attribution import AttributionResult, TrigramIndex, build_index, run_attribution
from .corpus import InsufficientCorpusError, Snippet, SnippetStore, sample_snippets
from .detectors import DetectorVerdict, GroupedLabel, classify, group_label
from .gateway import Gateway, PromptRequest

log = logging.getLogger(__name__)

NO_EDITS_MARKER = "no edits"


class ReviseGate(str, enum.Enum):
    COPY_RATE_ONLY = "copy_rate_only"
    DETECTOR_ONLY = "detector_only"
    EITHER = "either"
    DISABLED = "disabled"


class PipelineConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    """Knobs for one generation run; defaults match the standard recipe."""

    copy_target: float = 0.9
    copy_rate_threshold: float = 0.6
    word_target: int = 500
    max_polish_rounds: int = 3
    max_revise_rounds: int = 1
    revise_gate: ReviseGate = ReviseGate.EITHER
    detector_id: str | None = None
    mode: str = "fiction"  # "fiction" | "nonfiction"
    seed: int = 0
    snippets_per_prompt: int = 1500
    model_id: str = "default"
    decode_params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if isinstance(self.revise_gate, str):
            self.revise_gate = ReviseGate(self.revise_gate)
        if not 0.0 <= self.copy_target <= 1.0:
            raise PipelineConfigError(f"copy_target must be in [0, 1], got {self.copy_target}")
        if self.copy_rate_threshold > self.copy_target:
            raise PipelineConfigError(
                f"copy_rate_threshold {self.copy_rate_threshold} exceeds "
                f"copy_target {self.copy_target}"
            )
        if self.max_polish_rounds < 0:
            raise PipelineConfigError("max_polish_rounds must be >= 0")
        if self.max_revise_rounds < 0:
            raise PipelineConfigError("max_revise_rounds must be >= 0")
        if self.mode not in ("fiction", "nonfiction"):
            raise PipelineConfigError(f"mode must be fiction or nonfiction, got {self.mode!r}")


# Detector labels that read as "the draft looks AI-written" for gating.
_REVISE_TRIGGER = GroupedLabel.AI_INVOLVEMENT


def needs_revision(
    attribution: AttributionResult,
    verdict: DetectorVerdict | None,
    config: PipelineConfig,
) -> bool:
    """Gate decision for the single revision pass. Pure function of inputs."""
    gate = config.revise_gate
    if gate is ReviseGate.DISABLED:
        return False
    low_copy = attribution.copy_rate < config.copy_rate_threshold
    if gate is ReviseGate.COPY_RATE_ONLY:
        return low_copy
    if verdict is None or verdict.label is None:
        raise PipelineConfigError(
            f"revise_gate {gate.value!r} needs a detector verdict and none was supplied"
        )
    flagged = group_label(verdict.label) is _REVISE_TRIGGER
    if gate is ReviseGate.DETECTOR_ONLY:
        return flagged
    return low_copy or flagged


@dataclass(frozen=True)
class StageRecord:
    stage: str  # "draft" | "revise" | "polish"
    text: str
    attribution: AttributionResult
    detector_verdict: DetectorVerdict | None = None

    def to_record(self) -> dict:
        return {
            "stage": self.stage,
            "text": self.text,
            "attribution": self.attribution.to_record(),
            "detector_verdict": (
                self.detector_verdict.to_record() if self.detector_verdict else None
            ),
        }


@dataclass
class GenerationRecord:
    prompt_id: str
    writing_prompt: str
    snippet_ids: list[str]
    drafts: list[StageRecord]
    final_text: str
    revise_triggered: bool
    polish_rounds_used: int
    stopped_on_no_edits: bool

    def to_record(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "writing_prompt": self.writing_prompt,
            "snippet_ids": self.snippet_ids,
            "drafts": [stage.to_record() for stage in self.drafts],
            "final_text": self.final_text,
            "revise_triggered": self.revise_triggered,
            "polish_rounds_used": self.polish_rounds_used,
            "stopped_on_no_edits": self.stopped_on_no_edits,
        }

    @classmethod
    def from_record(cls, record: dict) -> "GenerationRecord":
        drafts = [
            StageRecord(
                stage=stage["stage"],
                text=stage["text"],
                attribution=AttributionResult.from_record(stage["attribution"]),
                detector_verdict=(
                    DetectorVerdict.from_record(stage["detector_verdict"])
                    if stage.get("detector_verdict")
                    else None
                ),
            )
            for stage in record["drafts"]
        ]
        return cls(
            prompt_id=record["prompt_id"],
            writing_prompt=record["writing_prompt"],
            snippet_ids=record["snippet_ids"],
            drafts=drafts,
            final_text=record["final_text"],
            revise_triggered=record["revise_triggered"],
            polish_rounds_used=record["polish_rounds_used"],
            stopped_on_no_edits=record["stopped_on_no_edits"],
        )


class PipelineStageError(Exception):
    """A stage failed; the partial record is preserved for debugging."""

    def __init__(self, stage: str, prompt_id: str, cause: Exception, partial: GenerationRecord):
        super().__init__(f"stage {stage!r} failed for prompt {prompt_id!r}: {cause}")
        self.stage = stage
        self.prompt_id = prompt_id
        self.cause = cause
        self.partial = partial


def _template(base: str, config: PipelineConfig) -> str:
    if config.mode == "nonfiction" and base in ("generation", "generation_revise", "edit"):
        return f"{base}_nonfiction"
    return base


def _copy_percent(config: PipelineConfig) -> str:
    return str(round(config.copy_target * 100))


def draft(
    writing_prompt: str,
    snippets: Sequence[Snippet],
    config: PipelineConfig,
    gateway: Gateway,
) -> str:
    """First full generation from prompt plus snippets."""
    request = PromptRequest(
        template_id=_template("generation", config),
        bindings={
            "writing_prompt": writing_prompt,
            "snippets": [snippet.text for snippet in snippets],
            "copy_percent": _copy_percent(config),
            "word_count": str(config.word_target),
        },
        model_id=config.model_id,
        decode_params=config.decode_params,
    )
    return gateway.complete(request).text


def revise(
    writing_prompt: str,
    current: str,
    snippets: Sequence[Snippet],
    config: PipelineConfig,
    gateway: Gateway,
) -> str:
    """One revision pass that re-asks with the draft included."""
    request = PromptRequest(
        template_id=_template("generation_revise", config),
        bindings={
            "writing_prompt": writing_prompt,
            "draft": current,
            "snippets": [snippet.text for snippet in snippets],
            "copy_percent": _copy_percent(config),
            "word_count": str(config.word_target),
        },
        model_id=config.model_id,
        decode_params=config.decode_params,
    )
    return gateway.complete(request).text


def polish_pass(
    writing_prompt: str, current: str, config: PipelineConfig, gateway: Gateway
) -> tuple[str, bool]:
    """One coherence-repair pass.

    Returns (text, edited). The no-edits marker is matched case-insensitively
    after trimming surrounding whitespace; on a marker reply the input text
    comes back unchanged.
    """
    request = PromptRequest(
        template_id=_template("edit", config),
        bindings={
            "writing_prompt": writing_prompt,
            "draft": current,
            "copy_percent": _copy_percent(config),
        },
        model_id=config.model_id,
        decode_params=config.decode_params,
    )
    reply = gateway.complete(request).text
    if reply.strip().lower() == NO_EDITS_MARKER:
        return current, False
    return reply, True


def _gate_uses_detector(config: PipelineConfig) -> bool:
    return config.revise_gate in (ReviseGate.DETECTOR_ONLY, ReviseGate.EITHER)


def run_pipeline(
    writing_prompt: str,
    prompt_id: str,
    snippets: Sequence[Snippet],
    config: PipelineConfig,
    gateway: Gateway,
    index: TrigramIndex | None = None,
    detector=None,
) -> GenerationRecord:
    """Full draft / gated revise / polish loop for one prompt.

    The attribution index defaults to one built over exactly the snippets
    offered to the model, so the copy rate measures reuse of what the model
    actually saw. Gateway calls total 1 + (1 if revised) + polish rounds used.
    """
    if index is None:
        index = build_index(snippets)
    if _gate_uses_detector(config) and detector is None:
        raise PipelineConfigError(
            f"revise_gate {config.revise_gate.value!r} requires a detector client"
        )

    record = GenerationRecord(
        prompt_id=prompt_id,
        writing_prompt=writing_prompt,
        snippet_ids=[snippet.id for snippet in snippets],
        drafts=[],
        final_text="",
        revise_triggered=False,
        polish_rounds_used=0,
        stopped_on_no_edits=False,
    )

    def _run_stage(stage: str, action):
        try:
            return action()
        except Exception as exc:
            raise PipelineStageError(stage, prompt_id, exc, record) from exc

    current = _run_stage("draft", lambda: draft(writing_prompt, snippets, config, gateway))
    attribution = run_attribution(index, current, text_id=prompt_id)
    verdict = (
        _run_stage("draft", lambda: classify(detector, current))
        if _gate_uses_detector(config)
        else None
    )
    record.drafts.append(StageRecord("draft", current, attribution, verdict))
    record.final_text = current

    rounds = 0
    while rounds < config.max_revise_rounds and needs_revision(attribution, verdict, config):
        current = _run_stage(
            "revise", lambda: revise(writing_prompt, current, snippets, config, gateway)
        )
        rounds += 1
        record.revise_triggered = True
        attribution = run_attribution(index, current, text_id=prompt_id)
        verdict = (
            _run_stage("revise", lambda: classify(detector, current))
            if _gate_uses_detector(config)
            else None
        )
        record.drafts.append(StageRecord("revise", current, attribution, verdict))
        record.final_text = current

    for _ in range(config.max_polish_rounds):
        new_text, edited = _run_stage(
            "polish", lambda: polish_pass(writing_prompt, current, config, gateway)
        )
        record.polish_rounds_used += 1
        if not edited:
            record.stopped_on_no_edits = True
            break
        current = new_text
        attribution = run_attribution(index, current, text_id=prompt_id)
        record.drafts.append(StageRecord("polish", current, attribution, None))
        record.final_text = current

    return record


def run_vanilla(
    writing_prompt: str, prompt_id: str, config: PipelineConfig, gateway: Gateway
) -> GenerationRecord:
    """Unconstrained single-call baseline for the same prompt."""
    request = PromptRequest(
        template_id="vanilla",
        bindings={"writing_prompt": writing_prompt, "word_count": str(config.word_target)},
        model_id=config.model_id,
        decode_params=config.decode_params,
    )
    text = gateway.complete(request).text
    attribution = run_attribution(build_index([]), text, text_id=prompt_id)
    return GenerationRecord(
        prompt_id=prompt_id,
        writing_prompt=writing_prompt,
        snippet_ids=[],
        drafts=[StageRecord("draft", text, attribution, None)],
        final_text=text,
        revise_triggered=False,
        polish_rounds_used=0,
        stopped_on_no_edits=False,
    )


def derive_seed(seed: int, key: str) -> int:
    """Stable per-prompt seed; independent of Python's salted hash."""
    digest = hashlib.sha256(f"{seed}:{key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class BatchEntry:
    """One prompt's outcome: a record on success, stage and error on failure."""

    prompt_id: str
    record: GenerationRecord | None = None
    stage: str | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.record is None


def run_batch(
    prompts: Sequence[tuple[str, str]],
    store: SnippetStore,
    config: PipelineConfig,
    gateway: Gateway,
    detector=None,
    workers: int = 1,
) -> list[BatchEntry]:
    """Run the pipeline over (prompt_id, writing_prompt) pairs.

    Each prompt samples its own snippets with a seed derived from the run
    seed and the prompt id, so one prompt's outcome never shifts another's
    inputs. A failing prompt becomes a failure entry; the batch continues.
    Output order always matches input order. workers > 1 is only safe with
    backends that tolerate interleaved calls (not the scripted mock).
    """
    if config.snippets_per_prompt > len(store):
        raise InsufficientCorpusError(
            f"snippets_per_prompt={config.snippets_per_prompt} exceeds "
            f"store size {len(store)}"
        )

    def _one(pair: tuple[str, str]) -> BatchEntry:
        prompt_id, writing_prompt = pair
        try:
            snippets = sample_snippets(
                store, config.snippets_per_prompt, derive_seed(config.seed, prompt_id)
            )
            record = run_pipeline(
                writing_prompt, prompt_id, snippets, config, gateway, detector=detector
            )
            return BatchEntry(prompt_id=prompt_id, record=record)
        except PipelineStageError as exc:
            log.error("prompt %s failed at stage %s: %s", prompt_id, exc.stage, exc.cause)
            return BatchEntry(prompt_id=prompt_id, stage=exc.stage, error=str(exc.cause))
        except Exception as exc:
            log.error("prompt %s failed: %s", prompt_id, exc)
            return BatchEntry(prompt_id=prompt_id, stage="setup", error=str(exc))

    if workers <= 1:
        return [_one(pair) for pair in prompts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one, prompts))


def save_records(entries: Iterable[BatchEntry], path: str | Path) -> None:
    """Write successful records as JSONL; failures become tagged stubs."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for entry in entries:
            if entry.record is not None:
                row = entry.record.to_record()
            else:
                row = {"prompt_id": entry.prompt_id, "failed_stage": entry.stage, "error": entry.error}
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_records(path: str | Path) -> list[GenerationRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if "final_text" in row:
                records.append(GenerationRecord.from_record(row))
    return records
