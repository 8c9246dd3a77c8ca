"""Token normalization shared by the attribution index and the lexical ranker.

Normalization is rule-based and dependency-free so the copy-rate metric stays
reproducible across machines: alphanumeric tokenization, lowercasing, a fixed
suffix-stripping stemmer iterated to a fixpoint, and pronoun masking with a
single placeholder token. The exact stemmer behavior is pinned by the test
vectors shipped with the suite, not by any external library.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

# Purely alphanumeric so the placeholder survives a second normalization pass.
PRONOUN_PLACEHOLDER = "0pron0"

# Maximal runs of alphanumeric characters. Underscore is punctuation here.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_PRONOUN_SURFACES = frozenset(
    {
        "i", "me", "my", "mine", "myself",
        "you", "your", "yours", "yourself", "yourselves",
        "he", "him", "his", "himself",
        "she", "her", "hers", "herself",
        "it", "its", "itself",
        "we", "us", "our", "ours", "ourselves",
        "they", "them", "their", "theirs", "themselves",
    }
)

# (suffix, replacement, minimum characters that must remain before the suffix).
# Scanned in order; the first rule whose guard passes is applied, then the
# whole table is retried until no rule fires. Every replacement is strictly
# shorter than its suffix, so the loop terminates and stems are fixpoints.
_STEM_RULES: tuple[tuple[str, str, int], ...] = (
    ("ization", "ize", 2),
    ("ational", "ate", 2),
    ("fulness", "ful", 2),
    ("iveness", "ive", 2),
    ("ousness", "ous", 2),
    ("ations", "ate", 2),
    ("ingly", "", 3),
    ("iness", "y", 2),
    ("ments", "", 3),
    ("ation", "ate", 2),
    ("sses", "ss", 2),
    ("ness", "", 2),
    ("ment", "", 3),
    ("ions", "", 3),
    ("ies", "y", 2),
    ("ied", "y", 2),
    ("ily", "y", 2),
    ("ing", "", 3),
    ("ion", "", 3),
    ("es", "", 3),
    ("ed", "", 3),
    ("ly", "", 3),
    ("s", "", 3),
)

# Trailing doubled consonants collapsed after a bare-strip rule (runn -> run).
# l, s, z are excluded so fall/miss/buzz keep their spelling.
_DOUBLED = frozenset("bdfgmnprt")


def stem(word: str) -> str:
    """Stem a lowercased token with the fixed rule table, to a fixpoint."""
    current = word
    while True:
        changed = False
        for suffix, replacement, min_stem in _STEM_RULES:
            if not current.endswith(suffix):
                continue
            remaining = current[: len(current) - len(suffix)]
            if len(remaining) < min_stem:
                continue
            # Final -s never strips off a double-s ending (class, press).
            if suffix == "s" and remaining.endswith("s"):
                continue
            current = remaining + replacement
            if (
                not replacement
                and len(current) >= 2
                and current[-1] == current[-2]
                and current[-1] in _DOUBLED
            ):
                current = current[:-1]
            changed = True
            break
        if not changed:
            return current


# Masking happens after stemming, so the membership set must be closed under
# the stemmer (hers -> her, ourselves -> ourselv, ...).
_PRONOUN_NORMS = _PRONOUN_SURFACES | frozenset(stem(p) for p in _PRONOUN_SURFACES)


@dataclass(frozen=True)
class NormalizedToken:
    """One surviving token: original surface, normalized form, char offsets."""

    surface: str
    norm: str
    char_span: tuple[int, int]


def normalize(text: str) -> list[NormalizedToken]:
    """Tokenize and normalize text for matching.

    Tokens are maximal alphanumeric runs (everything else is a boundary and is
    dropped), lowercased, stemmed, and masked with ``PRONOUN_PLACEHOLDER`` when
    the stemmed form is a pronoun. char_span always points at the surviving
    surface token in the original text, so spans are strictly increasing and
    non-overlapping. Running normalize over its own space-joined norms yields
    the same norm sequence.
    """
    tokens: list[NormalizedToken] = []
    for match in _TOKEN_RE.finditer(text):
        surface = match.group(0)
        norm = stem(surface.lower())
        if not norm:
            continue
        if norm in _PRONOUN_NORMS:
            norm = PRONOUN_PLACEHOLDER
        tokens.append(NormalizedToken(surface, norm, (match.start(), match.end())))
    return tokens


def norms(text: str) -> list[str]:
    """Just the normalized forms, in order."""
    return [token.norm for token in normalize(text)]
