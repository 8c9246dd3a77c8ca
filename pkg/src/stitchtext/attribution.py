"""Copy-rate measurement and span-level provenance for generated text.

A trigram inverted index over the snippet pool retrieves candidate sources for
a generated text. Candidates sharing at least four distinct trigrams survive,
a greedy pass keeps only snippets that contribute new trigrams, and the kept
snippets are concatenated (in order of first appearance in the text) into a
reference sequence. The copy rate is the token-level longest common
subsequence between text and reference, divided by the text's token count,
and the LCS alignment labels each text token as copied from a specific
snippet or freshly generated.

The LCS fill is a row recurrence vectorized with numpy. Writing L[i][j] =
max(L[i-1][j], L[i][j-1], L[i-1][j-1] + eq) and using that each row is
nondecreasing gives row[j] = max(prev[j], running_max(prev[k-1] + eq_k)),
which is a cumulative maximum. The test suite checks the result against an
independent pure-Python DP oracle.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import DuplicateSnippetError, Snippet
from .textnorm import NormalizedToken, normalize

log = logging.getLogger(__name__)

MIN_SHARED_TRIGRAMS = 4

Trigram = tuple[str, str, str]


class AttributionError(Exception):
    """Base for attribution failures."""


class SectionalError(AttributionError):
    """Text too short for the requested number of sections."""


def token_trigrams(norm_tokens: Sequence[str]) -> list[Trigram]:
    """All contiguous token trigrams, in order. Fewer than 3 tokens: none."""
    return [
        (norm_tokens[i], norm_tokens[i + 1], norm_tokens[i + 2])
        for i in range(len(norm_tokens) - 2)
    ]


@dataclass
class TrigramIndex:
    """Inverted index from trigram to the snippets containing it."""

    postings: dict[Trigram, set[str]] = field(default_factory=dict)
    snippet_norms: dict[str, list[str]] = field(default_factory=dict)
    snippet_trigrams: dict[str, frozenset[Trigram]] = field(default_factory=dict)


def build_index(snippets: Iterable[Snippet]) -> TrigramIndex:
    """Index snippets by their normalized-token trigrams.

    Snippets shorter than three normalized tokens contribute no postings but
    stay addressable. Duplicate ids are an error.
    """
    index = TrigramIndex()
    for snippet in snippets:
        if snippet.id in index.snippet_norms:
            raise DuplicateSnippetError(f"duplicate snippet id {snippet.id!r}")
        snippet_norms = [token.norm for token in normalize(snippet.text)]
        index.snippet_norms[snippet.id] = snippet_norms
        trigrams = frozenset(token_trigrams(snippet_norms))
        index.snippet_trigrams[snippet.id] = trigrams
        for trigram in trigrams:
            index.postings.setdefault(trigram, set()).add(snippet.id)
    return index


@dataclass(frozen=True)
class CandidateMatch:
    snippet_id: str
    shared_trigrams: frozenset[Trigram]

    @property
    def shared_count(self) -> int:
        return len(self.shared_trigrams)


def match_candidates(index: TrigramIndex, text: str) -> list[CandidateMatch]:
    """Snippets sharing at least MIN_SHARED_TRIGRAMS distinct trigrams.

    Sorted by shared count descending, snippet id ascending.
    """
    text_trigrams = set(token_trigrams([token.norm for token in normalize(text)]))
    shared: dict[str, set[Trigram]] = {}
    for trigram in text_trigrams:
        for snippet_id in index.postings.get(trigram, ()):
            shared.setdefault(snippet_id, set()).add(trigram)
    candidates = [
        CandidateMatch(snippet_id, frozenset(trigrams))
        for snippet_id, trigrams in shared.items()
        if len(trigrams) >= MIN_SHARED_TRIGRAMS
    ]
    candidates.sort(key=lambda match: (-match.shared_count, match.snippet_id))
    return candidates


def select_cover(candidates: Sequence[CandidateMatch]) -> list[str]:
    """Greedy cover: keep a candidate iff it adds at least one new trigram.

    Scans in the given order; the kept set covers exactly the union of all
    candidate trigram sets.
    """
    covered: set[Trigram] = set()
    kept: list[str] = []
    for candidate in candidates:
        if candidate.shared_trigrams - covered:
            kept.append(candidate.snippet_id)
            covered |= candidate.shared_trigrams
    return kept


@dataclass(frozen=True)
class Span:
    """Char-offset span of the text with a provenance label."""

    start: int
    end: int
    label: str  # "copied" | "generated"
    source: str | None = None  # owning snippet id for copied spans

    def to_record(self) -> dict:
        return {"start": self.start, "end": self.end, "label": self.label, "source": self.source}


@dataclass(frozen=True)
class AttributionResult:
    text_id: str
    copy_rate: float
    lcs_length: int
    text_token_count: int
    selected_snippets: tuple[str, ...]
    spans: tuple[Span, ...]

    def to_record(self) -> dict:
        return {
            "text_id": self.text_id,
            "copy_rate": self.copy_rate,
            "lcs_length": self.lcs_length,
            "text_token_count": self.text_token_count,
            "selected_snippets": list(self.selected_snippets),
            "spans": [span.to_record() for span in self.spans],
        }

    @classmethod
    def from_record(cls, record: dict) -> "AttributionResult":
        return cls(
            text_id=record["text_id"],
            copy_rate=record["copy_rate"],
            lcs_length=record["lcs_length"],
            text_token_count=record["text_token_count"],
            selected_snippets=tuple(record["selected_snippets"]),
            spans=tuple(
                Span(s["start"], s["end"], s["label"], s.get("source"))
                for s in record["spans"]
            ),
        )


def _lcs_table(reference: Sequence[int], text: Sequence[int]) -> np.ndarray:
    """Full DP table of LCS prefix lengths, shape (len(ref)+1, len(text)+1)."""
    m, n = len(reference), len(text)
    table = np.zeros((m + 1, n + 1), dtype=np.int32)
    if m == 0 or n == 0:
        return table
    text_arr = np.asarray(text, dtype=np.int64)
    for i in range(1, m + 1):
        prev = table[i - 1]
        eq = (text_arr == reference[i - 1]).astype(np.int32)
        candidate = prev[:-1] + eq
        table[i, 1:] = np.maximum.accumulate(np.maximum(prev[1:], candidate))
    return table


def _lcs_alignment(reference: Sequence[int], text: Sequence[int]) -> list[tuple[int, int]]:
    """One deterministic LCS alignment as (reference_pos, text_pos) pairs.

    Backtracks preferring diagonal matches, then the reference axis, so equal
    inputs always produce the same alignment and therefore the same spans.
    """
    table = _lcs_table(reference, text)
    pairs: list[tuple[int, int]] = []
    i, j = len(reference), len(text)
    while i > 0 and j > 0:
        if reference[i - 1] == text[j - 1] and table[i, j] == table[i - 1, j - 1] + 1:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif table[i - 1, j] >= table[i, j - 1]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def _intern(sequences: Iterable[Sequence[str]]) -> list[list[int]]:
    """Map token strings to small ints so numpy comparisons are cheap."""
    symbols: dict[str, int] = {}
    result = []
    for sequence in sequences:
        result.append([symbols.setdefault(token, len(symbols)) for token in sequence])
    return result


def _first_match_position(
    text_tris: list[Trigram], snippet_tris: frozenset[Trigram], fallback: int
) -> int:
    for position, trigram in enumerate(text_tris):
        if trigram in snippet_tris:
            return position
    return fallback


def attribute(
    index: TrigramIndex, text: str, kept: Sequence[str], text_id: str = ""
) -> AttributionResult:
    """Measure copy rate and label copied spans for one text.

    Kept snippets are reordered by the position of their first matched trigram
    in the text (ties by id), concatenated into the reference sequence, and
    aligned with the text by token-level LCS. Maximal runs of matched text
    tokens become copied spans labeled with the snippet owning the aligned
    reference tokens; runs split where ownership changes. Empty kept set or
    empty text yields copy rate 0.
    """
    tokens = normalize(text)
    text_norms = [token.norm for token in tokens]
    count = len(text_norms)

    if not kept or count == 0:
        spans = _build_spans(tokens, {})
        return AttributionResult(
            text_id=text_id,
            copy_rate=0.0,
            lcs_length=0,
            text_token_count=count,
            selected_snippets=(),
            spans=spans,
        )

    for snippet_id in kept:
        if snippet_id not in index.snippet_norms:
            raise AttributionError(f"kept snippet {snippet_id!r} is not in the index")

    text_tris = token_trigrams(text_norms)
    ordered = sorted(
        kept,
        key=lambda snippet_id: (
            _first_match_position(text_tris, index.snippet_trigrams[snippet_id], count),
            snippet_id,
        ),
    )

    reference_norms: list[str] = []
    owners: list[str] = []
    for snippet_id in ordered:
        snippet_norms = index.snippet_norms[snippet_id]
        reference_norms.extend(snippet_norms)
        owners.extend([snippet_id] * len(snippet_norms))

    reference_ids, text_ids = _intern([reference_norms, text_norms])
    pairs = _lcs_alignment(reference_ids, text_ids)
    lcs_length = len(pairs)
    owner_by_text_pos = {text_pos: owners[ref_pos] for ref_pos, text_pos in pairs}

    spans = _build_spans(tokens, owner_by_text_pos)
    return AttributionResult(
        text_id=text_id,
        copy_rate=lcs_length / count,
        lcs_length=lcs_length,
        text_token_count=count,
        selected_snippets=tuple(ordered),
        spans=spans,
    )


def _build_spans(
    tokens: Sequence[NormalizedToken], owner_by_text_pos: dict[int, str]
) -> tuple[Span, ...]:
    """Partition tokens into maximal same-label, same-owner char spans."""
    spans: list[Span] = []
    run_start: int | None = None
    run_owner: str | None = None
    run_end = 0
    for position, token in enumerate(tokens):
        owner = owner_by_text_pos.get(position)
        if run_start is None or owner != run_owner:
            if run_start is not None:
                label = "copied" if run_owner is not None else "generated"
                spans.append(Span(run_start, run_end, label, run_owner))
            run_start = token.char_span[0]
            run_owner = owner
        run_end = token.char_span[1]
    if run_start is not None:
        label = "copied" if run_owner is not None else "generated"
        spans.append(Span(run_start, run_end, label, run_owner))
    return tuple(spans)


def run_attribution(index: TrigramIndex, text: str, text_id: str = "") -> AttributionResult:
    """Convenience chain: match, cover, attribute."""
    candidates = match_candidates(index, text)
    kept = select_cover(candidates)
    return attribute(index, text, kept, text_id=text_id)


def copied_token_flags(result: AttributionResult, text: str) -> list[bool]:
    """Per normalized token: True when it sits inside a copied span."""
    flags: list[bool] = []
    copied = [span for span in result.spans if span.label == "copied"]
    position = 0
    for token in normalize(text):
        start, end = token.char_span
        while position < len(copied) and copied[position].end < end:
            position += 1
        inside = (
            position < len(copied)
            and copied[position].start <= start
            and end <= copied[position].end
        )
        flags.append(inside)
    return flags


def sectional_rates(result: AttributionResult, text: str, k: int = 4) -> list[float]:
    """Copy rate of k contiguous near-equal token blocks.

    Earlier blocks absorb the remainder when the count does not divide evenly.
    The token-weighted mean of the rates equals the overall copy rate.
    """
    flags = copied_token_flags(result, text)
    count = len(flags)
    if count < k:
        raise SectionalError(f"text has {count} tokens, need at least {k}")
    base, remainder = divmod(count, k)
    rates: list[float] = []
    position = 0
    for block in range(k):
        size = base + (1 if block < remainder else 0)
        chunk = flags[position : position + size]
        rates.append(sum(chunk) / size)
        position += size
    return rates


def save_results(results: Iterable[AttributionResult], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for result in results:
            handle.write(json.dumps(result.to_record(), ensure_ascii=False) + "\n")
