"""Evaluation tables, highlighted provenance views, and sweep summaries.

One report bundles per-text rows (word count, copy rate, judge verdicts,
detector outcomes) with aggregates that are recomputable exactly from the
rows. The highlighted view wraps every copied span in markers that carry the
owning snippet id; stripping the markers reconstructs the original text
byte-for-byte, including texts that contain the marker characters themselves.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .attribution import AttributionResult, Span
from .detectors import DetectorRates, DetectorVerdict, detection_rates, group_label
from .judges import JudgeVerdict
from .pipeline import GenerationRecord

log = logging.getLogger(__name__)

MARK_OPEN = "⟦"  # left white square bracket
MARK_CLOSE = "⟧"  # right white square bracket


class ReportError(Exception):
    pass


def word_count(text: str) -> int:
    """Whitespace word count; the same counter used for corpus filtering."""
    return len(text.split())


@dataclass(frozen=True)
class TextRow:
    text_id: str
    word_count: int
    copy_rate: float
    coherence_passed: bool | None
    relevance_passed: bool | None
    detector_labels: dict[str, str | None] = field(default_factory=dict)
    detector_grouped: dict[str, str | None] = field(default_factory=dict)
    detector_scores: dict[str, float | None] = field(default_factory=dict)
    detector_ai_fractions: dict[str, float | None] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "text_id": self.text_id,
            "word_count": self.word_count,
            "copy_rate": self.copy_rate,
            "coherence_passed": self.coherence_passed,
            "relevance_passed": self.relevance_passed,
            "detector_labels": self.detector_labels,
            "detector_grouped": self.detector_grouped,
            "detector_scores": self.detector_scores,
            "detector_ai_fractions": self.detector_ai_fractions,
        }


@dataclass(frozen=True)
class Aggregates:
    n_texts: int
    mean_word_count: float
    mean_copy_rate: float
    copy_pct_display: int
    pct_coherent: float | None
    pct_relevant: float | None
    mean_ai_fraction: float | None
    detector_rates: dict[str, DetectorRates]

    def to_record(self) -> dict:
        return {
            "n_texts": self.n_texts,
            "mean_word_count": self.mean_word_count,
            "mean_copy_rate": self.mean_copy_rate,
            "copy_pct_display": self.copy_pct_display,
            "pct_coherent": self.pct_coherent,
            "pct_relevant": self.pct_relevant,
            "mean_ai_fraction": self.mean_ai_fraction,
            "detector_rates": {
                detector: rates.to_record() for detector, rates in self.detector_rates.items()
            },
        }


@dataclass
class EvalReport:
    rows: list[TextRow]
    aggregates: Aggregates
    texts: dict[str, str] = field(default_factory=dict)
    spans: dict[str, tuple[Span, ...]] = field(default_factory=dict)
    sweep: dict[float, Aggregates] | None = None
    sectional: list[float] | None = None
    keyword_totals: list[tuple[str, int]] = field(default_factory=list)


def compute_aggregates(
    rows: Sequence[TextRow], verdicts: Sequence[DetectorVerdict]
) -> Aggregates:
    """Aggregate per-text rows; every value recomputes exactly from the rows.

    Judge percentages are over texts that have a verdict for that dimension;
    detector statistics come from detection_rates over the raw verdicts.
    """
    if not rows:
        raise ReportError("cannot aggregate an empty row set")
    n = len(rows)
    mean_words = sum(row.word_count for row in rows) / n
    mean_copy = sum(row.copy_rate for row in rows) / n
    coherent = [row.coherence_passed for row in rows if row.coherence_passed is not None]
    relevant = [row.relevance_passed for row in rows if row.relevance_passed is not None]
    fractions = [
        fraction
        for row in rows
        for fraction in row.detector_ai_fractions.values()
        if fraction is not None
    ]
    return Aggregates(
        n_texts=n,
        mean_word_count=mean_words,
        mean_copy_rate=mean_copy,
        copy_pct_display=round(mean_copy * 100),
        pct_coherent=100.0 * sum(coherent) / len(coherent) if coherent else None,
        pct_relevant=100.0 * sum(relevant) / len(relevant) if relevant else None,
        mean_ai_fraction=sum(fractions) / len(fractions) if fractions else None,
        detector_rates=detection_rates(verdicts) if verdicts else {},
    )


def build_report(
    records: Sequence[GenerationRecord],
    verdicts_by_text: Mapping[str, Sequence[DetectorVerdict]] | None = None,
    judgments_by_text: Mapping[str, Sequence[JudgeVerdict]] | None = None,
) -> EvalReport:
    """Assemble rows from pipeline records plus optional verdicts/judgments.

    Missing verdicts or judgments leave nulls in the row and a warning in the
    log; aggregates are computed over the values that are present.
    """
    verdicts_by_text = verdicts_by_text or {}
    judgments_by_text = judgments_by_text or {}
    rows: list[TextRow] = []
    texts: dict[str, str] = {}
    spans: dict[str, tuple[Span, ...]] = {}
    all_verdicts: list[DetectorVerdict] = []
    keyword_pool: list[DetectorVerdict] = []

    for record in records:
        text_id = record.prompt_id
        final_attr = record.drafts[-1].attribution
        texts[text_id] = record.final_text
        spans[text_id] = final_attr.spans

        coherence: bool | None = None
        relevance: bool | None = None
        for judgment in judgments_by_text.get(text_id, ()):
            if judgment.dimension == "coherence":
                coherence = judgment.passed
            elif judgment.dimension == "relevance":
                relevance = judgment.passed
        if coherence is None or relevance is None:
            log.warning("text %s is missing judge verdicts", text_id)

        labels: dict[str, str] = {}
        grouped: dict[str, str] = {}
        scores: dict[str, float | None] = {}
        fractions: dict[str, float | None] = {}
        text_verdicts = list(verdicts_by_text.get(text_id, ()))
        if not text_verdicts:
            log.warning("text %s has no detector verdicts", text_id)
        for verdict in text_verdicts:
            labels[verdict.detector_id] = verdict.label.value if verdict.label else None
            grouped[verdict.detector_id] = (
                group_label(verdict.label).value if verdict.label else None
            )
            scores[verdict.detector_id] = verdict.score
            fractions[verdict.detector_id] = verdict.ai_fraction
            all_verdicts.append(verdict)
            if verdict.keywords:
                keyword_pool.append(verdict)

        rows.append(
            TextRow(
                text_id=text_id,
                word_count=word_count(record.final_text),
                copy_rate=final_attr.copy_rate,
                coherence_passed=coherence,
                relevance_passed=relevance,
                detector_labels=labels,
                detector_grouped=grouped,
                detector_scores=scores,
                detector_ai_fractions=fractions,
            )
        )

    return EvalReport(
        rows=rows,
        aggregates=compute_aggregates(rows, all_verdicts),
        texts=texts,
        spans=spans,
        keyword_totals=keyword_stats(keyword_pool),
    )


def sectional_summary(records: Sequence[GenerationRecord], k: int = 4) -> list[float] | None:
    """Mean per-quarter copy rate over final texts long enough to split."""
    from .attribution import sectional_rates

    per_text: list[list[float]] = []
    for record in records:
        final = record.drafts[-1]
        try:
            per_text.append(sectional_rates(final.attribution, final.text, k))
        except Exception:
            log.warning("text %s too short for %d sections, skipped", record.prompt_id, k)
    if not per_text:
        return None
    return [sum(rates[i] for rates in per_text) / len(per_text) for i in range(k)]


def keyword_stats(verdicts: Sequence[DetectorVerdict]) -> list[tuple[str, int]]:
    """Sum detector keyword counts per phrase, case-preserving.

    Distinct capitalizations stay distinct rows. Sorted by total descending,
    then phrase, so output order is stable.
    """
    totals: dict[str, int] = {}
    for verdict in verdicts:
        for hit in verdict.keywords:
            totals[hit.phrase] = totals.get(hit.phrase, 0) + hit.count
    return sorted(totals.items(), key=lambda item: (-item[1], item[0]))


def _escape(text: str) -> str:
    return text.replace(MARK_OPEN, MARK_OPEN * 2).replace(MARK_CLOSE, MARK_CLOSE * 2)


def highlight(text: str, spans: Sequence[Span]) -> str:
    """Wrap copied spans in provenance markers.

    Literal marker characters in the source text are escaped by doubling, so
    strip_markers always reconstructs the original bytes.
    """
    pieces: list[str] = []
    position = 0
    for span in spans:
        if span.label != "copied":
            continue
        pieces.append(_escape(text[position : span.start]))
        pieces.append(f"{MARK_OPEN}copied:{span.source}{MARK_CLOSE}")
        pieces.append(_escape(text[span.start : span.end]))
        pieces.append(f"{MARK_OPEN}/copied{MARK_CLOSE}")
        position = span.end
    pieces.append(_escape(text[position:]))
    return "".join(pieces)


def strip_markers(highlighted: str) -> str:
    """Invert highlight(): drop markers, undo escaping."""
    out: list[str] = []
    i = 0
    n = len(highlighted)
    while i < n:
        char = highlighted[i]
        if char == MARK_OPEN:
            if i + 1 < n and highlighted[i + 1] == MARK_OPEN:
                out.append(MARK_OPEN)
                i += 2
                continue
            end = highlighted.find(MARK_CLOSE, i + 1)
            if end == -1:
                raise ReportError("unterminated highlight marker")
            i = end + 1
            continue
        if char == MARK_CLOSE:
            if i + 1 < n and highlighted[i + 1] == MARK_CLOSE:
                out.append(MARK_CLOSE)
                i += 2
                continue
            raise ReportError("stray marker close without escape")
        out.append(char)
        i += 1
    return "".join(out)


def _fmt_pct(value: float | None) -> str:
    return "-" if value is None else f"{value:.1f}"


def _fmt_frac(value: float | None) -> str:
    return "-" if value is None else f"{value:.3f}"


def _summary_table(label: str, aggregates: Aggregates) -> list[str]:
    detectors = sorted(aggregates.detector_rates)
    header = ["Config", "N", "Words", "Copy %", "Relevant %", "Coherent %"]
    for detector in detectors:
        header += [f"{detector} AI %", f"{detector} mixed %", f"{detector} AI frac"]
    divider = ["---"] * len(header)
    row = [
        label,
        str(aggregates.n_texts),
        f"{aggregates.mean_word_count:.1f}",
        str(aggregates.copy_pct_display),
        _fmt_pct(aggregates.pct_relevant),
        _fmt_pct(aggregates.pct_coherent),
    ]
    for detector in detectors:
        rates = aggregates.detector_rates[detector]
        row += [
            _fmt_pct(rates.pct_ai_involvement),
            _fmt_pct(rates.pct_mixed),
            _fmt_frac(rates.mean_ai_fraction),
        ]
    return [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join(divider) + " |",
        "| " + " | ".join(row) + " |",
    ]


def render_markdown(report: EvalReport) -> str:
    """Markdown summary: headline table, optional sweep table, judges footer."""
    lines = ["# Evaluation summary", ""]
    lines += _summary_table("all", report.aggregates)
    if report.sectional:
        lines += ["", "## Copy rate by text quarter", ""]
        quarters = " | ".join(f"{rate:.3f}" for rate in report.sectional)
        lines += [
            "| " + " | ".join(f"Q{i + 1}" for i in range(len(report.sectional))) + " |",
            "| " + " | ".join(["---"] * len(report.sectional)) + " |",
            "| " + quarters + " |",
        ]
    if report.sweep:
        lines += ["", "## Copy-target sweep", ""]
        sample = next(iter(report.sweep.values()))
        detectors = sorted(sample.detector_rates)
        header = ["Copy target", "Copy %", "Coherent %"]
        for detector in detectors:
            header.append(f"{detector} AI %")
        lines.append("| " + " | ".join(header) + " |")
        lines.append("| " + " | ".join(["---"] * len(header)) + " |")
        for target in report.sweep:
            aggregates = report.sweep[target]
            row = [
                f"{target:g}",
                str(aggregates.copy_pct_display),
                _fmt_pct(aggregates.pct_coherent),
            ]
            for detector in detectors:
                row.append(_fmt_pct(aggregates.detector_rates[detector].pct_ai_involvement))
            lines.append("| " + " | ".join(row) + " |")
    if report.keyword_totals:
        lines += ["", "## Detector keywords", ""]
        lines.append("| Phrase | Count |")
        lines.append("| --- | --- |")
        for phrase, count in report.keyword_totals:
            lines.append(f"| {phrase} | {count} |")
    lines += [
        "",
        "Coherence and relevance columns are model-judge verdicts, reported as",
        "metrics rather than ground truth.",
        "",
    ]
    return "\n".join(lines)


def emit_report(
    report: EvalReport,
    out_dir: str | Path,
    formats: Sequence[str] = ("machine", "markdown", "highlighted"),
) -> list[Path]:
    """Write the selected formats under out_dir.

    The output directory is probed for writability before anything is
    written, so a bad destination fails with no partial output.
    """
    out_dir = Path(out_dir)
    unknown = set(formats) - {"machine", "markdown", "highlighted"}
    if unknown:
        raise ReportError(f"unknown report formats: {sorted(unknown)}")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise ReportError(f"output directory is not writable: {out_dir}: {exc}") from exc

    written: list[Path] = []
    if "machine" in formats:
        per_text = out_dir / "per_text.jsonl"
        with per_text.open("w", encoding="utf-8") as handle:
            for row in report.rows:
                handle.write(json.dumps(row.to_record(), ensure_ascii=False) + "\n")
        written.append(per_text)
        aggregate_path = out_dir / "aggregate.json"
        aggregate_path.write_text(
            json.dumps(report.aggregates.to_record(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        written.append(aggregate_path)
        if report.sweep is not None:
            sweep_path = out_dir / "sweep.jsonl"
            with sweep_path.open("w", encoding="utf-8") as handle:
                for target, aggregates in report.sweep.items():
                    row = {"copy_target": target, **aggregates.to_record()}
                    handle.write(json.dumps(row, ensure_ascii=False) + "\n")
            written.append(sweep_path)
    if "markdown" in formats:
        summary = out_dir / "summary.md"
        summary.write_text(render_markdown(report), encoding="utf-8")
        written.append(summary)
    if "highlighted" in formats:
        highlighted_dir = out_dir / "highlighted"
        highlighted_dir.mkdir(exist_ok=True)
        for text_id, text in report.texts.items():
            spans = report.spans.get(text_id, ())
            path = highlighted_dir / f"{text_id}.txt"
            path.write_text(highlight(text, spans), encoding="utf-8")
            written.append(path)
    return written
