"""Single chokepoint for model calls: templating, retry, caching, mocking.

Every prompt the package sends is rendered from an editable text file with
named placeholders, so prompt surgery never requires a code change. Requests
are retried with exponential backoff on transient failures, cached by content
hash of the rendered prompt plus decode settings, and fully replayable
offline through a scripted backend that records what it was asked.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import requests

log = logging.getLogger(__name__)

TEMPLATE_IDS = frozenset(
    {
        "generation",
        "generation_revise",
        "edit",
        "coherence",
        "relevance",
        "generation_nonfiction",
        "generation_revise_nonfiction",
        "edit_nonfiction",
        "vanilla",
    }
)

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


class GatewayError(Exception):
    """Base for gateway failures."""


class TemplateNotFoundError(GatewayError):
    pass


class MissingBindingError(GatewayError):
    pass


class UnusedBindingError(GatewayError):
    pass


class PromptTooLargeError(GatewayError):
    pass


class TransientBackendError(GatewayError):
    """Timeout or rate limit; worth retrying."""


class PermanentBackendError(GatewayError):
    """Malformed request or response; retrying cannot help."""


class GatewayUnavailableError(GatewayError):
    """Retries exhausted."""


@dataclass(frozen=True)
class PromptRequest:
    template_id: str
    bindings: Mapping[str, object]
    model_id: str
    decode_params: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class CompletionResult:
    text: str
    usage: Mapping[str, int]
    model_id: str
    attempt_count: int


@dataclass(frozen=True)
class BackendResponse:
    text: str
    usage: Mapping[str, int] = field(default_factory=dict)


class TemplateLibrary:
    """Loads prompt templates from a directory of .txt files."""

    def __init__(self, directory: str | Path | None = None) -> None:
        if directory is None:
            directory = Path(str(resources.files("stitchtext").joinpath("templates")))
        self.directory = Path(directory)

    def path(self, template_id: str) -> Path:
        return self.directory / f"{template_id}.txt"

    def source(self, template_id: str) -> str:
        if template_id not in TEMPLATE_IDS:
            raise TemplateNotFoundError(f"unknown template id {template_id!r}")
        path = self.path(template_id)
        if not path.is_file():
            raise TemplateNotFoundError(f"template file missing: {path}")
        return path.read_text(encoding="utf-8")

    def placeholders(self, template_id: str) -> frozenset[str]:
        return frozenset(_PLACEHOLDER_RE.findall(self.source(template_id)))

    def hashes(self) -> dict[str, str]:
        """Content hash per existing template file, for run manifests."""
        out = {}
        for template_id in sorted(TEMPLATE_IDS):
            path = self.path(template_id)
            if path.is_file():
                out[template_id] = hashlib.sha256(path.read_bytes()).hexdigest()
        return out


def render_binding(value: object) -> str:
    """Render one binding value; sequences become a numbered block."""
    if isinstance(value, str):
        return value
    if isinstance(value, Sequence):
        parts = []
        for position, entry in enumerate(value, start=1):
            text = entry if isinstance(entry, str) else getattr(entry, "text", None)
            if text is None:
                raise MissingBindingError(
                    f"sequence binding entry {position} is not text-like: {entry!r}"
                )
            parts.append(f"{position}. {text}")
        return "\n\n".join(parts)
    return str(value)


def render_prompt(
    templates: TemplateLibrary, template_id: str, bindings: Mapping[str, object]
) -> str:
    """Deterministically substitute bindings into a template.

    Every placeholder must have a binding and every binding must be used;
    both violations name the offending keys.
    """
    source = templates.source(template_id)
    placeholders = frozenset(_PLACEHOLDER_RE.findall(source))
    missing = placeholders - set(bindings)
    if missing:
        raise MissingBindingError(
            f"template {template_id!r} is missing bindings for: {sorted(missing)}"
        )
    unused = set(bindings) - placeholders
    if unused:
        raise UnusedBindingError(
            f"template {template_id!r} got unused bindings: {sorted(unused)}"
        )
    rendered = {name: render_binding(value) for name, value in bindings.items()}
    return _PLACEHOLDER_RE.sub(lambda match: rendered[match.group(1)], source)


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay_ms: int = 250


def cache_key(rendered_prompt: str, model_id: str, decode_params: Mapping[str, object]) -> str:
    payload = json.dumps(
        {"prompt": rendered_prompt, "model": model_id, "params": decode_params},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed completion cache, optionally persisted to a dir."""

    def __init__(self, directory: str | Path | None = None) -> None:
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._memory: dict[str, CompletionResult] = {}
        self._lock = threading.Lock()

    def get(self, key: str) -> CompletionResult | None:
        with self._lock:
            if key in self._memory:
                return self._memory[key]
        if self.directory is not None:
            path = self.directory / f"{key}.json"
            if path.is_file():
                record = json.loads(path.read_text(encoding="utf-8"))
                result = CompletionResult(
                    text=record["text"],
                    usage=record["usage"],
                    model_id=record["model_id"],
                    attempt_count=record["attempt_count"],
                )
                with self._lock:
                    self._memory[key] = result
                return result
        return None

    def put(self, key: str, result: CompletionResult) -> None:
        with self._lock:
            self._memory[key] = result
        if self.directory is not None:
            record = {
                "text": result.text,
                "usage": dict(result.usage),
                "model_id": result.model_id,
                "attempt_count": result.attempt_count,
            }
            path = self.directory / f"{key}.json"
            path.write_text(json.dumps(record, ensure_ascii=False), encoding="utf-8")


@dataclass(frozen=True)
class ScriptedFailure:
    """A scripted backend error: kind is 'timeout', 'rate_limit', or 'malformed'."""

    kind: str


class MockBackend:
    """Replays a scripted transcript and records every prompt it is sent.

    Script entries are completion strings or ScriptedFailure markers. The
    transcript is consumed strictly in call order, so tests can assert both
    what was asked and how failures were handled.
    """

    def __init__(self, script: Sequence[str | ScriptedFailure]) -> None:
        self.script = list(script)
        self.calls: list[dict] = []
        self._position = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        entries: list[str | ScriptedFailure] = []
        with Path(path).open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                if "error" in record:
                    entries.append(ScriptedFailure(record["error"]))
                else:
                    entries.append(record["text"])
        return cls(entries)

    def complete(
        self, prompt: str, model_id: str, decode_params: Mapping[str, object]
    ) -> BackendResponse:
        with self._lock:
            self.calls.append(
                {"prompt": prompt, "model_id": model_id, "decode_params": dict(decode_params)}
            )
            if self._position >= len(self.script):
                raise PermanentBackendError(
                    f"mock transcript exhausted after {len(self.script)} entries"
                )
            entry = self.script[self._position]
            self._position += 1
        if isinstance(entry, ScriptedFailure):
            if entry.kind in ("timeout", "rate_limit"):
                raise TransientBackendError(f"scripted {entry.kind}")
            raise PermanentBackendError(f"scripted {entry.kind}")
        usage = {"input_tokens": len(prompt.split()), "output_tokens": len(entry.split())}
        return BackendResponse(text=entry, usage=usage)


class HttpBackend:
    """Chat-style JSON-over-HTTP backend.

    Sends {model, messages, params} and expects {text, usage?}. The auth
    token is read from the environment variable named in the config, never
    stored in config files.
    """

    def __init__(
        self,
        url: str,
        auth_env: str | None = None,
        auth_header: str = "Authorization",
        timeout_s: float = 120.0,
    ) -> None:
        self.url = url
        self.auth_env = auth_env
        self.auth_header = auth_header
        self.timeout_s = timeout_s

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.auth_env:
            import os

            token = os.environ.get(self.auth_env)
            if not token:
                raise PermanentBackendError(
                    f"auth environment variable {self.auth_env!r} is not set"
                )
            headers[self.auth_header] = f"Bearer {token}"
        return headers

    def complete(
        self, prompt: str, model_id: str, decode_params: Mapping[str, object]
    ) -> BackendResponse:
        body = {
            "model": model_id,
            "messages": [{"role": "user", "content": prompt}],
            "params": dict(decode_params),
        }
        try:
            response = requests.post(
                self.url, json=body, headers=self._headers(), timeout=self.timeout_s
            )
        except requests.Timeout as exc:
            raise TransientBackendError(f"backend timeout: {exc}") from exc
        except requests.RequestException as exc:
            raise TransientBackendError(f"backend connection error: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientBackendError(f"backend returned {response.status_code}")
        if response.status_code >= 400:
            raise PermanentBackendError(
                f"backend rejected request: {response.status_code} {response.text[:200]}"
            )
        try:
            payload = response.json()
            text = payload["text"]
        except (ValueError, KeyError) as exc:
            raise PermanentBackendError(f"malformed backend response: {exc}") from exc
        return BackendResponse(text=text, usage=payload.get("usage", {}))


class Gateway:
    """Renders, caches, retries, and dispatches completion requests."""

    def __init__(
        self,
        backend,
        templates: TemplateLibrary | None = None,
        retry: RetryPolicy = RetryPolicy(),
        cache: ResponseCache | None = None,
        max_in_flight: int | None = None,
        max_prompt_chars: int | None = None,
    ) -> None:
        self.backend = backend
        self.templates = templates or TemplateLibrary()
        self.retry = retry
        self.cache = cache
        self.max_prompt_chars = max_prompt_chars
        self._slots = (
            threading.BoundedSemaphore(max_in_flight) if max_in_flight else None
        )
        self._call_count = 0
        self._count_lock = threading.Lock()

    @property
    def call_count(self) -> int:
        """Number of backend calls actually issued (cache hits excluded)."""
        return self._call_count

    def render(self, template_id: str, bindings: Mapping[str, object]) -> str:
        return render_prompt(self.templates, template_id, bindings)

    def complete(self, request: PromptRequest) -> CompletionResult:
        prompt = self.render(request.template_id, request.bindings)
        if self.max_prompt_chars is not None and len(prompt) > self.max_prompt_chars:
            raise PromptTooLargeError(
                f"rendered prompt is {len(prompt)} chars, limit is {self.max_prompt_chars}"
            )
        key = cache_key(prompt, request.model_id, request.decode_params)
        if self.cache is not None:
            cached = self.cache.get(key)
            if cached is not None:
                return cached
        result = self._call_with_retry(prompt, request)
        if self.cache is not None:
            self.cache.put(key, result)
        return result

    def _call_with_retry(self, prompt: str, request: PromptRequest) -> CompletionResult:
        last_error: Exception | None = None
        for attempt in range(1, self.retry.max_attempts + 1):
            try:
                if self._slots is not None:
                    self._slots.acquire()
                try:
                    with self._count_lock:
                        self._call_count += 1
                    response = self.backend.complete(
                        prompt, request.model_id, request.decode_params
                    )
                finally:
                    if self._slots is not None:
                        self._slots.release()
                if not response.text:
                    raise PermanentBackendError("backend returned an empty completion")
                return CompletionResult(
                    text=response.text,
                    usage=response.usage,
                    model_id=request.model_id,
                    attempt_count=attempt,
                )
            except TransientBackendError as exc:
                last_error = exc
                log.warning("transient backend failure (attempt %d): %s", attempt, exc)
                if attempt < self.retry.max_attempts:
                    time.sleep(self.retry.base_delay_ms / 1000.0 * (2 ** (attempt - 1)))
        raise GatewayUnavailableError(
            f"backend failed after {self.retry.max_attempts} attempts: {last_error}"
        )
