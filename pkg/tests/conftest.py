"""Shared fixtures and synthetic-corpus builders for the test suite."""

from __future__ import annotations

import random

import pytest

from stitchtext.corpus import Scope, Snippet
from stitchtext.gateway import Gateway, MockBackend, RetryPolicy


def make_snippet(snippet_id: str, text: str, scope: Scope = Scope.PARAGRAPH) -> Snippet:
    return Snippet(
        id=snippet_id,
        doc_id=f"doc_{snippet_id}",
        text=text,
        token_count=len(text.split()),
        scope=scope,
    )


def synth_word(index: int) -> str:
    """Vocabulary word that no stemmer rule touches and no pronoun matches."""
    return f"w{index}k"


def filler_word(index: int) -> str:
    """Filler vocabulary disjoint from synth_word output."""
    return f"f{index}q"


def build_synthetic_corpus(
    rng: random.Random, n_snippets: int, snippet_len: int
) -> list[Snippet]:
    """Snippets with per-snippet distinct tokens drawn from a shared vocab.

    Token streams are sampled without replacement inside each snippet, so a
    contiguous slice always carries distinct trigrams.
    """
    vocab_size = max(snippet_len * 2, n_snippets * snippet_len // 2)
    snippets = []
    for i in range(n_snippets):
        words = rng.sample(range(vocab_size), snippet_len)
        text = " ".join(synth_word(w) for w in words)
        snippets.append(make_snippet(f"s{i:03d}", text))
    return snippets


def plant_chunks(
    rng: random.Random,
    snippets: list[Snippet],
    n_tokens: int,
    copy_fraction: float,
    chunk_len: int = 12,
) -> tuple[str, int]:
    """Text of about n_tokens where copy_fraction is verbatim snippet chunks.

    Each chunk is a contiguous token slice from a distinct snippet, planted in
    snippet order, separated by filler from a disjoint vocabulary. Returns the
    text and the exact number of copied tokens.
    """
    n_chunks = max(1, round(copy_fraction * n_tokens / chunk_len))
    n_chunks = min(n_chunks, len(snippets))
    chosen = rng.sample(snippets, n_chunks)
    copied = n_chunks * chunk_len
    filler_total = max(0, n_tokens - copied)
    filler_counter = 0
    parts: list[str] = []
    per_gap = filler_total // (n_chunks + 1)
    for snippet in chosen:
        for _ in range(per_gap):
            parts.append(filler_word(filler_counter))
            filler_counter += 1
        words = snippet.text.split()
        start = rng.randrange(0, len(words) - chunk_len + 1)
        parts.extend(words[start : start + chunk_len])
    while filler_counter < filler_total:
        parts.append(filler_word(filler_counter))
        filler_counter += 1
    return " ".join(parts), copied


@pytest.fixture
def mock_gateway():
    """Factory: gateway over a scripted backend with zero retry delay."""

    def _make(script):
        backend = MockBackend(script)
        return Gateway(backend, retry=RetryPolicy(max_attempts=3, base_delay_ms=0)), backend

    return _make


_ACCEPTANCE_LINES: list[str] = []


def acceptance_line(name: str, passed: bool) -> None:
    """One visible pass/fail line per acceptance criterion.

    Printed inline (visible with -s) and replayed in the terminal summary so
    the verdict survives pytest's output capture on passing tests.
    """
    line = f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'}"
    print(line)
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
