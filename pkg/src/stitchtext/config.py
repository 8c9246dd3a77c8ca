"""Layered run configuration: defaults, then a YAML file, then environment.

Section names and keys are validated against the dataclass fields; an unknown
key fails fast with a closest-match suggestion instead of being silently
dropped. Environment overrides use STITCHTEXT_<SECTION>__<KEY>=value and are
parsed as YAML scalars, so numbers and booleans keep their types. Secrets
never live in config files; the backend names an environment variable that
holds its token.
"""

from __future__ import annotations

import difflib
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

import yaml

from .pipeline import PipelineConfig

ENV_PREFIX = "STITCHTEXT_"


class ConfigError(Exception):
    pass


@dataclass
class BackendConfig:
    url: str | None = None
    auth_env: str | None = None
    auth_header: str = "Authorization"
    model: str = "default"
    max_in_flight: int = 4
    timeout_s: float = 120.0
    max_prompt_chars: int | None = None


@dataclass
class RetryConfig:
    max_attempts: int = 3
    base_delay_ms: int = 250


@dataclass
class CacheConfig:
    dir: str | None = None


@dataclass
class TemplatesConfig:
    dir: str | None = None


@dataclass
class CorpusConfig:
    scope: str = "paragraph"


@dataclass
class DetectorEntry:
    id: str = ""
    kind: str = "http"  # "http" | "transcript"
    url: str | None = None
    transcript: str | None = None
    threshold: float | None = None


@dataclass
class JudgeConfig:
    enabled: bool = False
    model: str | None = None  # falls back to backend.model


@dataclass
class ReportConfig:
    formats: list[str] = field(default_factory=lambda: ["machine", "markdown", "highlighted"])


@dataclass
class SweepConfig:
    copy_targets: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75, 0.9])


@dataclass
class RunConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    retry: RetryConfig = field(default_factory=RetryConfig)
    cache: CacheConfig = field(default_factory=CacheConfig)
    templates: TemplatesConfig = field(default_factory=TemplatesConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    detectors: list[DetectorEntry] = field(default_factory=list)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    report: ReportConfig = field(default_factory=ReportConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def resolved(self) -> dict:
        """Plain-dict echo of the full configuration, for run manifests."""
        out = asdict(self)
        out["pipeline"]["revise_gate"] = self.pipeline.revise_gate.value
        return out


_SECTION_TYPES = {
    "backend": BackendConfig,
    "retry": RetryConfig,
    "cache": CacheConfig,
    "templates": TemplatesConfig,
    "corpus": CorpusConfig,
    "pipeline": PipelineConfig,
    "judge": JudgeConfig,
    "report": ReportConfig,
    "sweep": SweepConfig,
}


def _suggest(key: str, known: list[str]) -> str:
    matches = difflib.get_close_matches(key, known, n=1)
    return f" (did you mean {matches[0]!r}?)" if matches else ""


def _check_keys(section: str, data: Mapping, cls) -> None:
    known = [f.name for f in fields(cls)]
    for key in data:
        if key not in known:
            raise ConfigError(
                f"unknown key {key!r} in section {section!r}{_suggest(key, known)}"
            )


def _apply_section(config_obj, section: str, data: Mapping) -> None:
    cls = type(config_obj)
    _check_keys(section, data, cls)
    for key, value in data.items():
        setattr(config_obj, key, value)


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> RunConfig:
    """Build a RunConfig from defaults, an optional file, then environment.

    Relative paths inside the file (cache dir, detector transcripts) are
    resolved against the file's own directory so fixture configs relocate
    cleanly.
    """
    env = env if env is not None else os.environ
    config = RunConfig()

    if path is not None:
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {path}: {exc}")
        if not isinstance(raw, Mapping):
            raise ConfigError(f"config root must be a mapping: {path}")
        known_sections = list(_SECTION_TYPES) + ["detectors"]
        for section in raw:
            if section not in known_sections:
                raise ConfigError(
                    f"unknown config section {section!r}{_suggest(section, known_sections)}"
                )
        for section, cls in _SECTION_TYPES.items():
            data = raw.get(section)
            if data is None:
                continue
            if not isinstance(data, Mapping):
                raise ConfigError(f"config section {section!r} must be a mapping")
            _apply_section(getattr(config, section), section, data)
        for position, entry in enumerate(raw.get("detectors") or []):
            if not isinstance(entry, Mapping):
                raise ConfigError("each detectors entry must be a mapping")
            _check_keys(f"detectors[{position}]", entry, DetectorEntry)
            detector = DetectorEntry(**entry)
            if not detector.id:
                raise ConfigError(f"detectors[{position}] is missing an id")
            config.detectors.append(detector)
        base = path.parent
        if config.cache.dir:
            config.cache.dir = str((base / config.cache.dir).resolve())
        if config.templates.dir:
            config.templates.dir = str((base / config.templates.dir).resolve())
        for detector in config.detectors:
            if detector.transcript:
                detector.transcript = str((base / detector.transcript).resolve())

    for name, value in env.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section_name, _, key_name = name[len(ENV_PREFIX) :].partition("__")
        section_name = section_name.lower()
        key_name = key_name.lower()
        if section_name not in _SECTION_TYPES:
            raise ConfigError(
                f"environment override {name} names unknown section {section_name!r}"
            )
        section_obj = getattr(config, section_name)
        _check_keys(section_name, {key_name: value}, type(section_obj))
        setattr(section_obj, key_name, yaml.safe_load(value))

    # Re-run pipeline validation: file/env writes bypass __post_init__.
    config.pipeline.__post_init__()
    if config.pipeline.model_id == "default":
        config.pipeline.model_id = config.backend.model
    if config.corpus.scope not in ("paragraph", "sentence"):
        raise ConfigError(
            f"corpus.scope must be paragraph or sentence, got {config.corpus.scope!r}"
        )
    for fmt in config.report.formats:
        if fmt not in ("machine", "markdown", "highlighted"):
            raise ConfigError(f"unknown report format {fmt!r}")
    return config
