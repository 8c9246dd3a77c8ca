"""Snippet extraction, filtering, storage, and selection.

Raw documents are cut into paragraph or sentence candidates, pushed through a
fixed filter chain (length, alphanumeric ratio, language, metadata heuristics,
optional quality score), and the survivors become the snippet pool that
generation samples from. Filtering is deterministic: same input, same report.
"""

from __future__ import annotations

import enum
import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .textnorm import PRONOUN_PLACEHOLDER, normalize

log = logging.getLogger(__name__)

MIN_TOKENS = 20
MAX_TOKENS = 512
MIN_ALNUM_RATIO = 0.5
MIN_STOPWORD_RATIO = 0.08
METADATA_LINE_RATIO = 0.4
QUALITY_THRESHOLD = 7.5

# Blank-line boundary: two or more newlines, tolerant of interleaved
# horizontal whitespace and carriage returns.
_PARAGRAPH_SEP = re.compile(r"\n(?:[ \t\r]*\n)+")

_SENTENCE_BOUNDARY = re.compile(r"([.!?][\"'”’)\]]*)(\s+)(?=[\"“'‘A-Z])")

# Words that end with a period without ending a sentence.
_ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "rev", "hon", "st", "mt", "vs",
        "etc", "jr", "sr", "no", "vol", "fig", "gen", "col", "capt", "lt",
        "sgt", "approx", "dept", "est", "inc", "ltd",
    }
)

# Small fixed stopword list; the default language check asks what fraction of
# a candidate's word tokens land in it.
ENGLISH_STOPWORDS = frozenset(
    """a about above after again all also am an and any are as at be because
    been before being below between both but by could did do does doing down
    during each few for from further had has have having he her here hers him
    his how i if in into is it its just me more most my no nor not now of off
    on once only or other our out over own she so some such than that the
    their them then there these they this those through to too under until up
    very was we were what when where which while who whom why will with would
    you your""".split()
)

# Lines that look like table-of-contents rows, bare page numbers, or
# front-matter boilerplate.
_METADATA_PATTERNS = tuple(
    re.compile(pattern, re.IGNORECASE)
    for pattern in (
        r"^\s*(?:chapter|part|section|book|volume)\s+(?:\d+|[ivxlcdm]+)\b",
        r"^\s*\d{1,4}\s*$",
        r"^\s*(?:page|p\.)\s*\d+",
        r"\.{4,}\s*\d+\s*$",
        r"^\s*(?:table\s+of\s+)?contents\s*$",
        r"copyright|©|\(c\)\s*\d{4}",
        r"all rights reserved",
        r"isbn[\s:]*[\d-]",
        r"^\s*(?:first\s+)?published\s+(?:by|in)\b",
        r"printed in",
        r"^\s*acknowledg(?:e)?ments?\s*$",
    )
)

_WORD_RE = re.compile(r"[a-zA-Z]+")


class Scope(str, enum.Enum):
    PARAGRAPH = "paragraph"
    SENTENCE = "sentence"


class FilterReason(str, enum.Enum):
    TOO_SHORT = "too_short"
    TOO_LONG = "too_long"
    LOW_ALPHANUMERIC = "low_alphanumeric"
    NON_ENGLISH = "non_english"
    METADATA_LIKE = "metadata_like"
    LOW_QUALITY = "low_quality"


class CorpusError(Exception):
    """Base for corpus-layer failures."""


class InsufficientCorpusError(CorpusError):
    """Asked for more snippets than the store holds."""


class ScoringUnavailableError(CorpusError):
    """The quality scorer failed; retryable, not a rejection."""


class DuplicateSnippetError(CorpusError):
    """Two snippets with the same id reached the same store or index."""


def count_tokens(text: str) -> int:
    """Canonical token count: whitespace-delimited words."""
    return len(text.split())


@dataclass
class Snippet:
    """One candidate or accepted snippet.

    span covers the raw extracted segment; text_span covers the trimmed text,
    so document[text_span[0]:text_span[1]] == text. Offsets are populated by
    extraction and are not persisted.
    """

    id: str
    doc_id: str
    text: str
    token_count: int
    scope: Scope
    quality_score: float | None = None
    span: tuple[int, int] | None = None
    text_span: tuple[int, int] | None = None


@dataclass(frozen=True)
class FilterReport:
    snippet_id: str
    accepted: bool
    rejection_reasons: tuple[FilterReason, ...]

    def to_record(self) -> dict:
        return {
            "snippet_id": self.snippet_id,
            "accepted": self.accepted,
            "rejection_reasons": [reason.value for reason in self.rejection_reasons],
        }


def _trim_span(document: str, start: int, end: int) -> tuple[int, int]:
    while start < end and document[start].isspace():
        start += 1
    while end > start and document[end - 1].isspace():
        end -= 1
    return start, end


def _make_snippet(document: str, doc_id: str, scope: Scope, start: int, end: int) -> Snippet | None:
    text_start, text_end = _trim_span(document, start, end)
    if text_start >= text_end:
        return None
    text = document[text_start:text_end]
    return Snippet(
        id=f"{doc_id}:{text_start}:{text_end}",
        doc_id=doc_id,
        text=text,
        token_count=count_tokens(text),
        scope=scope,
        span=(start, end),
        text_span=(text_start, text_end),
    )


def _sentence_bounds(paragraph: str) -> list[tuple[int, int]]:
    bounds = []
    start = 0
    for match in _SENTENCE_BOUNDARY.finditer(paragraph):
        terminal = match.group(1)
        if terminal[0] == ".":
            before = re.search(r"(\w+)\Z", paragraph[: match.start(1)])
            if before is not None:
                word = before.group(1)
                # Stop-listed abbreviations and single initials keep the
                # sentence open.
                if word.lower() in _ABBREVIATIONS or (len(word) == 1 and word.isupper()):
                    continue
        bounds.append((start, match.end(1)))
        start = match.end(2)
    bounds.append((start, len(paragraph)))
    return bounds


def extract_snippets(document: str, doc_id: str, scope: Scope = Scope.PARAGRAPH) -> list[Snippet]:
    """Cut a raw document into candidate snippets.

    Paragraphs are the segments between blank-line boundaries; sentence scope
    further splits each paragraph at a fixed terminal-punctuation rule with an
    abbreviation stop-list. An empty or whitespace-only document yields no
    candidates. Re-slicing the document at a candidate's span reproduces the
    untrimmed segment; text_span locates the trimmed text.
    """
    candidates: list[Snippet] = []
    position = 0
    for separator in list(_PARAGRAPH_SEP.finditer(document)) + [None]:
        seg_end = separator.start() if separator is not None else len(document)
        if seg_end > position:
            if scope is Scope.PARAGRAPH:
                snippet = _make_snippet(document, doc_id, scope, position, seg_end)
                if snippet is not None:
                    candidates.append(snippet)
            else:
                paragraph = document[position:seg_end]
                for sent_start, sent_end in _sentence_bounds(paragraph):
                    snippet = _make_snippet(
                        document, doc_id, scope, position + sent_start, position + sent_end
                    )
                    if snippet is not None:
                        candidates.append(snippet)
        if separator is None:
            break
        position = separator.end()
    return candidates


def default_english_classifier(text: str) -> bool:
    """Stopword-frequency heuristic: English when >= 8% of words are stopwords."""
    words = _WORD_RE.findall(text.lower())
    if not words:
        return False
    hits = sum(1 for word in words if word in ENGLISH_STOPWORDS)
    return hits / len(words) >= MIN_STOPWORD_RATIO


def looks_like_metadata(text: str) -> bool:
    """True when >= 40% of non-empty lines match the metadata patterns."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        return False
    hits = sum(
        1 for line in lines if any(pattern.search(line) for pattern in _METADATA_PATTERNS)
    )
    return hits / len(lines) >= METADATA_LINE_RATIO


def _alnum_ratio(text: str) -> float:
    visible = [c for c in text if not c.isspace()]
    if not visible:
        return 0.0
    return sum(1 for c in visible if c.isalnum()) / len(visible)


QualityScorer = Callable[[str], float]
LanguageClassifier = Callable[[str], bool]


def apply_filters(
    candidate: Snippet,
    quality_scorer: QualityScorer | None = None,
    language_classifier: LanguageClassifier | None = None,
) -> FilterReport:
    """Run the full filter chain over one candidate.

    All firing reasons are reported, in a fixed order. When a scorer is given
    its result is memoized onto the candidate; a scorer exception surfaces as
    ScoringUnavailableError rather than a rejection.
    """
    classifier = language_classifier or default_english_classifier
    reasons: list[FilterReason] = []
    if candidate.token_count < MIN_TOKENS:
        reasons.append(FilterReason.TOO_SHORT)
    if candidate.token_count > MAX_TOKENS:
        reasons.append(FilterReason.TOO_LONG)
    if _alnum_ratio(candidate.text) < MIN_ALNUM_RATIO:
        reasons.append(FilterReason.LOW_ALPHANUMERIC)
    if not classifier(candidate.text):
        reasons.append(FilterReason.NON_ENGLISH)
    if looks_like_metadata(candidate.text):
        reasons.append(FilterReason.METADATA_LIKE)
    if quality_scorer is not None:
        score = candidate.quality_score
        if score is None:
            try:
                score = float(quality_scorer(candidate.text))
            except Exception as exc:
                raise ScoringUnavailableError(
                    f"quality scorer failed on snippet {candidate.id}: {exc}"
                ) from exc
            candidate.quality_score = score
        if score < QUALITY_THRESHOLD:
            reasons.append(FilterReason.LOW_QUALITY)
    return FilterReport(candidate.id, accepted=not reasons, rejection_reasons=tuple(reasons))


@dataclass
class SnippetStore:
    """Ordered pool of accepted snippets, all sharing one scope."""

    scope: Scope
    snippets: list[Snippet] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for snippet in self.snippets:
            if snippet.id in seen:
                raise DuplicateSnippetError(f"duplicate snippet id {snippet.id!r}")
            if snippet.scope != self.scope:
                raise CorpusError(
                    f"snippet {snippet.id!r} has scope {snippet.scope.value}, "
                    f"store holds {self.scope.value}"
                )
            seen.add(snippet.id)

    def __len__(self) -> int:
        return len(self.snippets)

    def __iter__(self):
        return iter(self.snippets)

    def add(self, snippet: Snippet) -> None:
        if any(existing.id == snippet.id for existing in self.snippets):
            raise DuplicateSnippetError(f"duplicate snippet id {snippet.id!r}")
        if snippet.scope != self.scope:
            raise CorpusError(
                f"snippet {snippet.id!r} has scope {snippet.scope.value}, "
                f"store holds {self.scope.value}"
            )
        self.snippets.append(snippet)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as handle:
            for snippet in self.snippets:
                record = {
                    "id": snippet.id,
                    "doc_id": snippet.doc_id,
                    "text": snippet.text,
                    "token_count": snippet.token_count,
                    "scope": snippet.scope.value,
                    "quality_score": snippet.quality_score,
                }
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SnippetStore":
        snippets: list[Snippet] = []
        scope: Scope | None = None
        with Path(path).open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                snippet = Snippet(
                    id=record["id"],
                    doc_id=record["doc_id"],
                    text=record["text"],
                    token_count=record["token_count"],
                    scope=Scope(record["scope"]),
                    quality_score=record.get("quality_score"),
                )
                scope = scope or snippet.scope
                snippets.append(snippet)
        if scope is None:
            raise CorpusError(f"empty snippet store: {path}")
        return cls(scope=scope, snippets=snippets)


def build_store(
    documents: Iterable[tuple[str, str]],
    scope: Scope = Scope.PARAGRAPH,
    quality_scorer: QualityScorer | None = None,
    language_classifier: LanguageClassifier | None = None,
) -> tuple[SnippetStore, list[FilterReport]]:
    """Extract and filter (doc_id, text) pairs into a store plus all reports."""
    store = SnippetStore(scope=scope)
    reports: list[FilterReport] = []
    for doc_id, text in documents:
        for candidate in extract_snippets(text, doc_id, scope):
            report = apply_filters(candidate, quality_scorer, language_classifier)
            reports.append(report)
            if report.accepted:
                store.add(candidate)
    return store, reports


def sample_snippets(store: SnippetStore, n: int, seed: int) -> list[Snippet]:
    """Uniform sample without replacement, reproducible for a given seed."""
    if n > len(store):
        raise InsufficientCorpusError(
            f"requested {n} snippets, store holds {len(store)}"
        )
    return random.Random(seed).sample(store.snippets, n)


def _content_stems(text: str) -> frozenset[str]:
    """Stems of tokens that are neither stopwords nor pronouns."""
    return frozenset(
        token.norm
        for token in normalize(text)
        if token.surface.lower() not in ENGLISH_STOPWORDS
        and token.norm != PRONOUN_PLACEHOLDER
    )


Ranker = Callable[[Snippet, str], float]


def rank_relevant(
    store: SnippetStore, prompt: str, n: int, ranker: Ranker | None = None
) -> list[Snippet]:
    """Top-n snippets for a prompt under a relevance ranker.

    The default ranker counts distinct content-word stems shared with the
    prompt; ties and zero scores fall back to snippet id order. A custom
    ranker maps (snippet, prompt) to a score where higher means more relevant.
    """
    if n > len(store):
        raise InsufficientCorpusError(
            f"requested {n} snippets, store holds {len(store)}"
        )
    if ranker is None:
        prompt_stems = _content_stems(prompt)
        keyed = [
            (-len(_content_stems(snippet.text) & prompt_stems), snippet.id, snippet)
            for snippet in store.snippets
        ]
    else:
        keyed = [(-ranker(snippet, prompt), snippet.id, snippet) for snippet in store.snippets]
    keyed.sort(key=lambda item: (item[0], item[1]))
    return [snippet for _, _, snippet in keyed[:n]]
