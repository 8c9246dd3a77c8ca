"""Deterministic built-in character language model.

A fixed-width character model with weights drawn from a seed derived from the
model identifier: same identifier, same weights, same scores, on every run.
That keeps the service self-contained (no downloads) while still producing
text-dependent next-character distributions the scorers can work with. It is
a scoring fixture, not a trained model, and makes no claim to accuracy.
"""

from __future__ import annotations

import hashlib

import numpy as np

# 95 printable ASCII characters, one bucket for everything else, one
# beginning-of-text symbol.
_PRINTABLE_BASE = 32
_N_PRINTABLE = 95
OTHER_INDEX = _N_PRINTABLE
BOS_INDEX = _N_PRINTABLE + 1
VOCAB_SIZE = _N_PRINTABLE + 2

CONTEXT_WIDTH = 3
HIDDEN_SIZE = 64


class ModelLoadError(RuntimeError):
    """Raised when a model identifier cannot be resolved to weights."""


def _seed_from_name(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def encode(text: str) -> np.ndarray:
    """Map text to vocabulary indices; non-printable-ASCII goes to one bucket."""
    codes = np.frombuffer(text.encode("utf-8", errors="replace"), dtype=np.uint8)
    indices = codes.astype(np.int64) - _PRINTABLE_BASE
    out_of_range = (indices < 0) | (indices >= _N_PRINTABLE)
    indices[out_of_range] = OTHER_INDEX
    return indices


class CharLM:
    """Next-character model: embeddings summed over a fixed context, tanh, softmax."""

    def __init__(self, model_id: str) -> None:
        if not model_id.startswith("builtin:") or len(model_id) <= len("builtin:"):
            raise ModelLoadError(f"cannot load model {model_id!r}; expected builtin:<name>")
        self.model_id = model_id
        rng = np.random.default_rng(_seed_from_name(model_id))
        scale = 0.6
        self._embeddings = rng.normal(
            0.0, scale, size=(CONTEXT_WIDTH, VOCAB_SIZE, HIDDEN_SIZE)
        )
        self._hidden_bias = rng.normal(0.0, 0.1, size=HIDDEN_SIZE)
        self._output = rng.normal(0.0, scale / np.sqrt(HIDDEN_SIZE), size=(HIDDEN_SIZE, VOCAB_SIZE))
        self._output_bias = rng.normal(0.0, 0.1, size=VOCAB_SIZE)

    def log_distributions(self, indices: np.ndarray) -> np.ndarray:
        """Per-position log P(next char | context) as an (n, vocab) array.

        Position i predicts indices[i] from the CONTEXT_WIDTH characters
        before it, padded with the beginning-of-text symbol.
        """
        n = len(indices)
        if n == 0:
            return np.zeros((0, VOCAB_SIZE))
        padded = np.concatenate([np.full(CONTEXT_WIDTH, BOS_INDEX, dtype=np.int64), indices])
        hidden = self._hidden_bias.copy()[np.newaxis, :].repeat(n, axis=0)
        for j in range(CONTEXT_WIDTH):
            context = padded[j : j + n]
            hidden = hidden + self._embeddings[j][context]
        hidden = np.tanh(hidden)
        logits = hidden @ self._output + self._output_bias
        logits -= logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(logits).sum(axis=1, keepdims=True))
        return logits - log_norm

    def token_log_probs(self, indices: np.ndarray) -> np.ndarray:
        """Log probability the model assigns to each actual character."""
        dists = self.log_distributions(indices)
        if len(indices) == 0:
            return np.zeros(0)
        return dists[np.arange(len(indices)), indices]
