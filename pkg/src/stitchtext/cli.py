"""Command-line entry points wiring the library into reproducible runs.

Every run that produces artifacts also writes a manifest (resolved config,
input hashes, template hashes, seeds) so it can be replayed bit-for-bit.
Exit codes: 0 success, 1 runtime failure with a machine-parseable error line
on stderr, 2 usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .attribution import build_index, run_attribution
from .config import ConfigError, DetectorEntry, RunConfig, load_config
from .corpus import (
    CorpusError,
    Scope,
    SnippetStore,
    build_store,
    rank_relevant,
    sample_snippets,
)
from .detectors import (
    DetectorError,
    HttpDetectorClient,
    TranscriptDetectorClient,
    classify,
)
from .gateway import (
    Gateway,
    GatewayError,
    HttpBackend,
    MockBackend,
    ResponseCache,
    RetryPolicy,
    TemplateLibrary,
)
from .judges import JudgeParseError, JudgeVerdict, judge_coherence, judge_relevance
from .pipeline import (
    GenerationRecord,
    PipelineConfigError,
    derive_seed,
    load_records,
    run_batch,
    run_vanilla,
    save_records,
)
from .report import ReportError, build_report, emit_report, sectional_summary

log = logging.getLogger(__name__)

_KNOWN_ERRORS = (
    ConfigError,
    CorpusError,
    GatewayError,
    DetectorError,
    JudgeParseError,
    PipelineConfigError,
    ReportError,
    OSError,
    KeyError,
    ValueError,
)


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _write_jsonl(path: Path, rows) -> None:
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def _load_prompts(path: Path) -> list[tuple[str, str]]:
    prompts = []
    for row in _read_jsonl(path):
        prompts.append((row["prompt_id"], row["prompt"]))
    return prompts


def _load_texts(path: Path) -> list[tuple[str, str]]:
    """Accept {text_id, text} rows or generation records."""
    texts = []
    for row in _read_jsonl(path):
        if "text" in row:
            texts.append((row["text_id"], row["text"]))
        elif "final_text" in row:
            texts.append((row["prompt_id"], row["final_text"]))
    return texts


def _build_gateway(config: RunConfig, mock_transcript: str | None) -> Gateway:
    if mock_transcript:
        backend = MockBackend.from_file(mock_transcript)
    else:
        if not config.backend.url:
            raise ConfigError(
                "no backend configured: set backend.url or pass --mock-transcript"
            )
        backend = HttpBackend(
            url=config.backend.url,
            auth_env=config.backend.auth_env,
            auth_header=config.backend.auth_header,
            timeout_s=config.backend.timeout_s,
        )
    cache = ResponseCache(config.cache.dir) if config.cache.dir else None
    return Gateway(
        backend,
        templates=TemplateLibrary(config.templates.dir),
        retry=RetryPolicy(config.retry.max_attempts, config.retry.base_delay_ms),
        cache=cache,
        max_in_flight=config.backend.max_in_flight,
        max_prompt_chars=config.backend.max_prompt_chars,
    )


def _build_detector(entry: DetectorEntry, config: RunConfig):
    if entry.kind == "transcript":
        if not entry.transcript:
            raise ConfigError(f"detector {entry.id!r} is kind=transcript but has no transcript")
        return TranscriptDetectorClient(entry.id, entry.transcript, threshold=entry.threshold)
    if entry.kind == "http":
        if not entry.url:
            raise ConfigError(f"detector {entry.id!r} is kind=http but has no url")
        return HttpDetectorClient(
            entry.id,
            entry.url,
            threshold=entry.threshold,
            max_attempts=config.retry.max_attempts,
            base_delay_ms=config.retry.base_delay_ms,
        )
    raise ConfigError(f"detector {entry.id!r} has unknown kind {entry.kind!r}")


def _detector_for_pipeline(config: RunConfig):
    """Resolve the detector used by the revise gate, when one is needed."""
    if config.pipeline.revise_gate.value not in ("detector_only", "either"):
        return None
    wanted = config.pipeline.detector_id
    candidates = config.detectors
    if wanted:
        candidates = [entry for entry in candidates if entry.id == wanted]
        if not candidates:
            raise ConfigError(f"pipeline.detector_id {wanted!r} is not configured")
    if not candidates:
        raise ConfigError(
            f"revise_gate {config.pipeline.revise_gate.value!r} needs a configured detector"
        )
    return _build_detector(candidates[0], config)


def _write_manifest(
    out_dir: Path, command: str, argv: list[str], config: RunConfig, inputs: dict[str, Path]
) -> None:
    templates = TemplateLibrary(config.templates.dir)
    manifest = {
        "command": command,
        "argv": argv,
        "package_version": __version__,
        "config": config.resolved(),
        "input_hashes": {name: _sha256_file(path) for name, path in inputs.items()},
        "template_hashes": templates.hashes(),
        "seed": config.pipeline.seed,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _apply_overrides(config: RunConfig, args) -> None:
    if getattr(args, "seed", None) is not None:
        config.pipeline.seed = args.seed
    if getattr(args, "copy_target", None) is not None:
        config.pipeline.copy_target = args.copy_target
        config.pipeline.__post_init__()


# Subcommand bodies. Each returns the process exit code.


def _cmd_ingest(args) -> int:
    config = load_config(args.config)
    scope = Scope(args.scope or config.corpus.scope)
    docs_path = Path(args.docs)
    documents: list[tuple[str, str]] = []
    if docs_path.is_dir():
        for doc_file in sorted(docs_path.glob("*.txt")):
            documents.append((doc_file.stem, doc_file.read_text(encoding="utf-8")))
    elif docs_path.is_file():
        for row in _read_jsonl(docs_path):
            documents.append((row["doc_id"], row["text"]))
    else:
        raise ConfigError(f"docs path does not exist: {docs_path}")
    if not documents:
        log.warning("no input documents found under %s", docs_path)
        print(f"warning: no input documents found under {docs_path}", file=sys.stderr)
    store, reports = build_store(documents, scope=scope)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    store.save(out)
    _write_jsonl(
        out.with_suffix(out.suffix + ".filter_report.jsonl"),
        (report.to_record() for report in reports),
    )
    print(
        f"ingested {len(documents)} documents: {len(store)} snippets accepted, "
        f"{sum(1 for r in reports if not r.accepted)} rejected"
    )
    return 0


def _cmd_sample(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    store = SnippetStore.load(args.store)
    chosen = sample_snippets(store, args.n, config.pipeline.seed)
    picked = SnippetStore(scope=store.scope, snippets=chosen)
    picked.save(args.out)
    print(f"sampled {len(chosen)} of {len(store)} snippets with seed {config.pipeline.seed}")
    return 0


def _cmd_rank(args) -> int:
    store = SnippetStore.load(args.store)
    prompt_path = Path(args.prompt)
    prompt = prompt_path.read_text(encoding="utf-8") if prompt_path.is_file() else args.prompt
    chosen = rank_relevant(store, prompt, args.n)
    picked = SnippetStore(scope=store.scope, snippets=chosen)
    picked.save(args.out)
    print(f"ranked top {len(chosen)} of {len(store)} snippets")
    return 0


def _cmd_generate(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    gateway = _build_gateway(config, args.mock_transcript)
    prompts = _load_prompts(Path(args.prompts))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = {"prompts": Path(args.prompts)}
    if args.vanilla:
        entries = []
        from .pipeline import BatchEntry

        for prompt_id, writing_prompt in prompts:
            record = run_vanilla(writing_prompt, prompt_id, config.pipeline, gateway)
            entries.append(BatchEntry(prompt_id=prompt_id, record=record))
    else:
        store = SnippetStore.load(args.store)
        inputs["store"] = Path(args.store)
        detector = _detector_for_pipeline(config)
        entries = run_batch(
            prompts, store, config.pipeline, gateway, detector=detector, workers=args.workers
        )
    save_records(entries, out_dir / "records.jsonl")
    _write_manifest(out_dir, "generate", sys.argv[1:], config, inputs)
    failures = [entry for entry in entries if entry.failed]
    print(f"generated {len(entries) - len(failures)} texts, {len(failures)} failures")
    for entry in failures:
        print(f"  failed {entry.prompt_id} at {entry.stage}: {entry.error}", file=sys.stderr)
    return 0


def _cmd_attribute(args) -> int:
    store = SnippetStore.load(args.store)
    index = build_index(store)
    texts = _load_texts(Path(args.texts))
    rows = []
    for text_id, text in texts:
        result = run_attribution(index, text, text_id=text_id)
        rows.append(result.to_record())
    _write_jsonl(Path(args.out), rows)
    print(f"attributed {len(rows)} texts against {len(store)} snippets")
    return 0


def _cmd_detect(args) -> int:
    config = load_config(args.config)
    entries = config.detectors
    if args.detector:
        entries = [entry for entry in entries if entry.id == args.detector]
        if not entries:
            raise ConfigError(f"detector {args.detector!r} is not configured")
    if not entries:
        raise ConfigError("no detectors configured: add a detectors section to the config")
    clients = [_build_detector(entry, config) for entry in entries]
    texts = _load_texts(Path(args.texts))
    rows = []
    for text_id, text in texts:
        for client in clients:
            verdict = classify(client, text)
            rows.append({"text_id": text_id, **verdict.to_record()})
    _write_jsonl(Path(args.out), rows)
    print(f"collected {len(rows)} verdicts over {len(texts)} texts")
    return 0


def _judge_all(
    config: RunConfig, gateway: Gateway, records: list[GenerationRecord]
) -> list[dict]:
    model = config.judge.model or config.backend.model
    rows = []
    for record in records:
        coherence = judge_coherence(gateway, record.final_text, model)
        rows.append({"text_id": record.prompt_id, **coherence.to_record()})
        relevance = judge_relevance(gateway, record.final_text, record.writing_prompt, model)
        rows.append({"text_id": record.prompt_id, **relevance.to_record()})
    return rows


def _cmd_judge(args) -> int:
    config = load_config(args.config)
    gateway = _build_gateway(config, args.mock_transcript)
    records = load_records(Path(args.records))
    rows = _judge_all(config, gateway, records)
    _write_jsonl(Path(args.out), rows)
    print(f"judged {len(records)} texts")
    return 0


def _load_judgments(path: Path) -> dict[str, list[JudgeVerdict]]:
    judgments: dict[str, list[JudgeVerdict]] = {}
    for row in _read_jsonl(path):
        judgments.setdefault(row["text_id"], []).append(
            JudgeVerdict(
                dimension=row["dimension"],
                passed=row["passed"],
                rationale=row["rationale"],
                raw_response=row["raw_response"],
            )
        )
    return judgments


def _load_verdicts(path: Path):
    from .detectors import DetectorVerdict

    verdicts: dict[str, list] = {}
    for row in _read_jsonl(path):
        verdicts.setdefault(row["text_id"], []).append(DetectorVerdict.from_record(row))
    return verdicts


def _cmd_report(args) -> int:
    config = load_config(args.config)
    records = load_records(Path(args.records))
    verdicts = _load_verdicts(Path(args.verdicts)) if args.verdicts else {}
    judgments = _load_judgments(Path(args.judgments)) if args.judgments else {}
    report = build_report(records, verdicts, judgments)
    report.sectional = sectional_summary(records)
    formats = args.format.split(",") if args.format else config.report.formats
    written = emit_report(report, args.out, formats)
    print(f"wrote {len(written)} report files under {args.out}")
    return 0


def _run_condition(
    config: RunConfig, gateway: Gateway, prompts, store, workers: int
) -> tuple[list, list[GenerationRecord]]:
    detector = _detector_for_pipeline(config)
    entries = run_batch(
        prompts, store, config.pipeline, gateway, detector=detector, workers=workers
    )
    records = [entry.record for entry in entries if entry.record is not None]
    return entries, records


def _collect_verdicts(config: RunConfig, records: list[GenerationRecord]):
    verdicts: dict[str, list] = {}
    rows = []
    if not config.detectors:
        return verdicts, rows
    clients = [_build_detector(entry, config) for entry in config.detectors]
    for record in records:
        for client in clients:
            verdict = classify(client, record.final_text)
            verdicts.setdefault(record.prompt_id, []).append(verdict)
            rows.append({"text_id": record.prompt_id, **verdict.to_record()})
    return verdicts, rows


def _cmd_run_all(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    gateway = _build_gateway(config, args.mock_transcript)
    prompts = _load_prompts(Path(args.prompts))
    store = SnippetStore.load(args.store)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries, records = _run_condition(config, gateway, prompts, store, args.workers)
    save_records(entries, out_dir / "records.jsonl")

    verdicts, verdict_rows = _collect_verdicts(config, records)
    if verdict_rows:
        _write_jsonl(out_dir / "verdicts.jsonl", verdict_rows)

    judgments: dict[str, list[JudgeVerdict]] = {}
    if config.judge.enabled:
        judgment_rows = _judge_all(config, gateway, records)
        _write_jsonl(out_dir / "judgments.jsonl", judgment_rows)
        for row in judgment_rows:
            judgments.setdefault(row["text_id"], []).append(
                JudgeVerdict(row["dimension"], row["passed"], row["rationale"], row["raw_response"])
            )

    report = build_report(records, verdicts, judgments)
    report.sectional = sectional_summary(records)
    emit_report(report, out_dir / "report", config.report.formats)
    _write_manifest(
        out_dir,
        "run-all",
        sys.argv[1:],
        config,
        {"prompts": Path(args.prompts), "store": Path(args.store)},
    )
    failures = [entry for entry in entries if entry.failed]
    print(
        f"run complete: {len(records)} texts, {len(failures)} failures, "
        f"report under {out_dir / 'report'}"
    )
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    gateway = _build_gateway(config, args.mock_transcript)
    prompts = _load_prompts(Path(args.prompts))
    store = SnippetStore.load(args.store)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    sweep: dict[float, object] = {}
    base_report = None
    for target in config.sweep.copy_targets:
        config.pipeline.copy_target = target
        if config.pipeline.copy_rate_threshold > target:
            config.pipeline.copy_rate_threshold = target
        config.pipeline.__post_init__()
        entries, records = _run_condition(config, gateway, prompts, store, args.workers)
        save_records(entries, out_dir / f"records_{target:g}.jsonl")
        verdicts, verdict_rows = _collect_verdicts(config, records)
        if verdict_rows:
            _write_jsonl(out_dir / f"verdicts_{target:g}.jsonl", verdict_rows)
        judgments: dict[str, list[JudgeVerdict]] = {}
        if config.judge.enabled:
            judgment_rows = _judge_all(config, gateway, records)
            _write_jsonl(out_dir / f"judgments_{target:g}.jsonl", judgment_rows)
            for row in judgment_rows:
                judgments.setdefault(row["text_id"], []).append(
                    JudgeVerdict(
                        row["dimension"], row["passed"], row["rationale"], row["raw_response"]
                    )
                )
        condition_report = build_report(records, verdicts, judgments)
        sweep[target] = condition_report.aggregates
        base_report = condition_report

    if base_report is None:
        raise ConfigError("sweep.copy_targets is empty")
    base_report.sweep = sweep
    emit_report(base_report, out_dir / "report", config.report.formats)
    _write_manifest(
        out_dir,
        "sweep",
        sys.argv[1:],
        config,
        {"prompts": Path(args.prompts), "store": Path(args.store)},
    )
    print(f"swept {len(sweep)} copy targets, report under {out_dir / 'report'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stitchtext",
        description="Stitch human snippets into generated texts and audit the result.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, seed=False):
        if config:
            p.add_argument("--config", default=None, help="YAML config file")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override pipeline seed")

    p = sub.add_parser("ingest", help="extract and filter documents into a snippet store")
    common(p)
    p.add_argument("--docs", required=True, help="directory of .txt files or a JSONL file")
    p.add_argument("--out", required=True, help="output store JSONL")
    p.add_argument("--scope", choices=["paragraph", "sentence"], default=None)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("sample", help="sample snippets uniformly without replacement")
    common(p, seed=True)
    p.add_argument("--store", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("rank", help="rank snippets by lexical overlap with a prompt")
    common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--prompt", required=True, help="prompt text or a file containing it")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("generate", help="run the draft/revise/polish pipeline")
    common(p, seed=True)
    p.add_argument("--prompts", required=True, help="JSONL of {prompt_id, prompt}")
    p.add_argument("--store", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--copy-target", type=float, default=None)
    p.add_argument("--mock-transcript", default=None, help="offline scripted backend JSONL")
    p.add_argument("--vanilla", action="store_true", help="unconstrained baseline, no snippets")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("attribute", help="measure copy rates for standalone texts")
    common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--texts", required=True, help="JSONL of {text_id, text} or records")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_attribute)

    p = sub.add_parser("detect", help="query configured detectors over texts")
    common(p)
    p.add_argument("--texts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--detector", default=None, help="restrict to one configured detector id")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("judge", help="run coherence and relevance judges over records")
    common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mock-transcript", default=None)
    p.set_defaults(func=_cmd_judge)

    p = sub.add_parser("report", help="build evaluation reports from run outputs")
    common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--verdicts", default=None)
    p.add_argument("--judgments", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", default=None, help="comma-separated subset of machine,markdown,highlighted")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("sweep", help="run the pipeline across configured copy targets")
    common(p, seed=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mock-transcript", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("run-all", help="generate, detect, judge, and report in one run")
    common(p, seed=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--copy-target", type=float, default=None)
    p.add_argument("--mock-transcript", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_run_all)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _KNOWN_ERRORS as exc:
        error_line = json.dumps(
            {"error": type(exc).__name__, "command": args.command, "message": str(exc)},
            ensure_ascii=False,
        )
        print(error_line, file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        sys.exit(dispatch(sys.argv[1:]))
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        sys.exit(130)
