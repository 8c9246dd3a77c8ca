"""Acceptance suite: one test per shipping criterion, one PASS/FAIL line each.

Every test accumulates failure messages instead of asserting mid-way, prints
its verdict through acceptance_line, then fails with the collected details.
Tolerances are pinned here, not derived: calibration ±0.05, sectional 1e-9,
everything else exact. Runtime budgets are asserted where the criterion
carries one (oracle equivalence < 60 s, calibration < 30 s).
"""

from __future__ import annotations

import json
import random
import socket
import time
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stitchtext.attribution import (
    MIN_SHARED_TRIGRAMS,
    build_index,
    match_candidates,
    run_attribution,
    sectional_rates,
    token_trigrams,
)
from stitchtext.cli import dispatch
from stitchtext.corpus import FilterReason, build_store
from stitchtext.detectors import (
    CROSS_PERPLEXITY_THRESHOLD,
    CURVATURE_THRESHOLD,
    RESPONSE_SCHEMA,
    GroupedLabel,
    Label,
    TranscriptDetectorClient,
    binarize_score,
    classify,
    group_label,
    parse_label,
)
from stitchtext.gateway import Gateway, MockBackend, RetryPolicy, TemplateLibrary
from stitchtext.pipeline import PipelineConfig, ReviseGate, run_pipeline
from stitchtext.report import build_report, highlight, strip_markers
from stitchtext.textnorm import normalize

from conftest import acceptance_line, build_synthetic_corpus, plant_chunks
from oracle import lcs_length_oracle

FIXTURES = Path(__file__).parent / "fixtures"


def _check(failures: list[str], ok: bool, message: str) -> None:
    if not ok:
        failures.append(message)


def _finish(name: str, failures: list[str]) -> None:
    acceptance_line(name, not failures)
    assert not failures, f"{name}: " + "; ".join(failures)


# --- attribution oracle equivalence -----------------------------------------


def _random_text(rng: random.Random, snippets, max_tokens: int) -> str:
    parts: list[str] = []
    filler = 0
    while len(parts) < max_tokens:
        if snippets and rng.random() < 0.55:
            snippet = rng.choice(snippets)
            words = snippet.text.split()
            length = rng.randint(3, min(15, len(words)))
            start = rng.randrange(0, len(words) - length + 1)
            parts.extend(words[start : start + length])
        else:
            for _ in range(rng.randint(1, 8)):
                parts.append(f"f{filler}z")
                filler += 1
    return " ".join(parts[:max_tokens])


def test_attribution_matches_lcs_oracle():
    failures: list[str] = []
    rng = random.Random(20260822)
    started = time.monotonic()
    fixtures = 0
    for i in range(200):
        if i < 185:
            n_snips = rng.randint(3, 15)
            snip_len = rng.randint(10, 60)
            text_len = rng.randint(5, 150)
        elif i < 198:
            n_snips = rng.randint(20, 50)
            snip_len = rng.randint(60, 120)
            text_len = rng.randint(150, 400)
        else:
            n_snips = 50
            snip_len = 200
            text_len = 400
        snippets = build_synthetic_corpus(rng, n_snips, snip_len)
        index = build_index(snippets)
        text = _random_text(rng, snippets, text_len)
        result = run_attribution(index, text, text_id=f"fx{i}")

        text_norms = [token.norm for token in normalize(text)]
        reference: list[str] = []
        for snippet_id in result.selected_snippets:
            reference.extend(index.snippet_norms[snippet_id])
        expected_lcs = lcs_length_oracle(reference, text_norms)
        expected_rate = expected_lcs / len(text_norms) if text_norms else 0.0
        _check(
            failures,
            result.lcs_length == expected_lcs,
            f"fixture {i}: lcs {result.lcs_length} != oracle {expected_lcs}",
        )
        _check(
            failures,
            result.copy_rate == expected_rate,
            f"fixture {i}: copy_rate {result.copy_rate} != oracle {expected_rate}",
        )
        fixtures += 1
        if failures and len(failures) > 6:
            break
    elapsed = time.monotonic() - started
    _check(failures, fixtures >= 200, f"only {fixtures} fixtures ran")
    _check(failures, elapsed < 60.0, f"oracle sweep took {elapsed:.1f}s (budget 60s)")
    _finish("oracle_equivalence", failures)


def test_copy_rate_boundary_cases():
    failures: list[str] = []
    rng = random.Random(11)
    snippets = build_synthetic_corpus(rng, 6, 30)
    index = build_index(snippets)

    identical = run_attribution(index, snippets[0].text)
    _check(failures, identical.copy_rate == 1.0, f"identical text rate {identical.copy_rate}")
    _check(
        failures,
        identical.lcs_length == identical.text_token_count == 30,
        "identical text should align every token",
    )

    disjoint = run_attribution(index, " ".join(f"d{i}v" for i in range(40)))
    _check(failures, disjoint.copy_rate == 0.0, f"disjoint text rate {disjoint.copy_rate}")
    _check(failures, disjoint.selected_snippets == (), "disjoint text selected snippets")

    from stitchtext.attribution import attribute

    empty_kept = attribute(index, snippets[0].text, kept=[])
    _check(failures, empty_kept.copy_rate == 0.0, f"empty kept rate {empty_kept.copy_rate}")
    _check(
        failures,
        len(empty_kept.spans) == 1
        and empty_kept.spans[0].label == "generated"
        and empty_kept.spans[0].start == 0
        and empty_kept.spans[0].end == len(snippets[0].text),
        f"empty kept spans {empty_kept.spans}",
    )
    _finish("boundary_copy_rates", failures)


def test_planted_fraction_calibration():
    failures: list[str] = []
    started = time.monotonic()
    targets = [0.25, 0.5, 0.75, 0.9]
    measured: list[float] = []
    for p in targets:
        rng = random.Random(int(p * 1000))
        snippets = build_synthetic_corpus(rng, 40, 40)
        index = build_index(snippets)
        text, planted = plant_chunks(rng, snippets, 400, p, chunk_len=12)
        result = run_attribution(index, text)
        measured.append(result.copy_rate)
        _check(
            failures,
            abs(result.copy_rate - p) <= 0.05,
            f"target {p}: measured {result.copy_rate:.4f} off by more than 0.05",
        )
        _check(
            failures,
            result.lcs_length == planted,
            f"target {p}: lcs {result.lcs_length} != planted {planted}",
        )
    for earlier, later in zip(measured, measured[1:]):
        _check(
            failures,
            later >= earlier,
            f"measured rates not monotone: {measured}",
        )
    elapsed = time.monotonic() - started
    _check(failures, elapsed < 30.0, f"calibration took {elapsed:.1f}s (budget 30s)")
    _finish("calibration_planted_rates", failures)


def test_candidate_threshold_is_exactly_four():
    failures: list[str] = []

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=10_000),
        prefix_len=st.integers(min_value=0, max_value=20),
        shared_trigrams=st.sampled_from([3, 4]),
    )
    def prop(seed: int, prefix_len: int, shared_trigrams: int) -> None:
        rng = random.Random(seed)
        snippets = build_synthetic_corpus(rng, 1, 30)
        index = build_index(snippets)
        words = snippets[0].text.split()
        run_len = shared_trigrams + 2  # k contiguous shared trigrams need k+2 tokens
        start = rng.randrange(0, len(words) - run_len + 1)
        text_words = (
            [f"pre{j}u" for j in range(prefix_len)]
            + words[start : start + run_len]
            + [f"post{j}u" for j in range(6)]
        )
        candidates = match_candidates(index, " ".join(text_words))
        ids = [c.snippet_id for c in candidates]
        if shared_trigrams >= MIN_SHARED_TRIGRAMS:
            assert ids == [snippets[0].id], f"4 shared trigrams must match, got {ids}"
            assert candidates[0].shared_count == 4
        else:
            assert ids == [], f"3 shared trigrams must not match, got {ids}"

    error: BaseException | None = None
    try:
        prop()
    except BaseException as exc:  # report the criterion verdict before re-raising
        error = exc
    acceptance_line("candidate_threshold_property", error is None)
    if error is not None:
        raise error


# --- pipeline state machine --------------------------------------------------


def test_pipeline_call_count_matrix():
    failures: list[str] = []
    rng = random.Random(5)
    snippets = build_synthetic_corpus(rng, 4, 30)
    high = " ".join(snippets[i].text for i in (0, 1))
    low = " ".join(f"z{i}q" for i in range(40))

    for revise_fires in (False, True):
        for stop_round in (1, 2, 3, None):
            script: list[str] = []
            script.append(low if revise_fires else high)
            if revise_fires:
                script.append(high)
            rounds = stop_round if stop_round is not None else 3
            current = high
            for r in range(rounds):
                if stop_round is not None and r == rounds - 1:
                    script.append("no edits")
                else:
                    current = current + f" extra{r}pad{r}"
                    script.append(current)
            backend = MockBackend(script)
            gateway = Gateway(backend, TemplateLibrary(), retry=RetryPolicy(3, 0))
            config = PipelineConfig(
                copy_rate_threshold=0.6,
                revise_gate=ReviseGate.COPY_RATE_ONLY,
                max_polish_rounds=3,
                snippets_per_prompt=4,
            )
            record = run_pipeline("a prompt", "px", snippets, config, gateway)
            case = f"revise={revise_fires} stop={stop_round}"
            expected_calls = 1 + int(revise_fires) + rounds
            _check(
                failures,
                record.revise_triggered is revise_fires,
                f"{case}: revise_triggered {record.revise_triggered}",
            )
            _check(
                failures,
                record.polish_rounds_used == rounds,
                f"{case}: polish_rounds_used {record.polish_rounds_used} != {rounds}",
            )
            _check(
                failures,
                record.stopped_on_no_edits is (stop_round is not None),
                f"{case}: stopped_on_no_edits {record.stopped_on_no_edits}",
            )
            _check(
                failures,
                gateway.call_count == expected_calls,
                f"{case}: {gateway.call_count} calls != {expected_calls}",
            )
    _finish("pipeline_call_matrix", failures)


# --- filter fixtures ---------------------------------------------------------


def _fixture_quality_stub(text: str) -> float:
    # Fixture contract shared with scripts/make_filter_fixture.py: the marker
    # word "grayline" scores 2.0, everything else 9.0.
    return 2.0 if "grayline" in text else 9.0


def test_filter_fixtures_match_golden():
    failures: list[str] = []
    docs_path = FIXTURES / "filter_docs.jsonl"
    golden_path = FIXTURES / "filter_report_golden.jsonl"
    docs = [
        (row["doc_id"], row["text"])
        for row in map(json.loads, docs_path.read_text(encoding="utf-8").splitlines())
    ]
    _check(failures, len(docs) == 40, f"fixture corpus has {len(docs)} docs, wanted 40")

    def render() -> tuple[bytes, list]:
        _, reports = build_store(docs, quality_scorer=_fixture_quality_stub)
        lines = [json.dumps(r.to_record(), ensure_ascii=False) for r in reports]
        return ("\n".join(lines) + "\n").encode("utf-8"), reports

    first_bytes, reports = render()
    second_bytes, _ = render()
    _check(failures, first_bytes == second_bytes, "filter report not deterministic across runs")
    _check(
        failures,
        first_bytes == golden_path.read_bytes(),
        "filter report differs from golden bytes",
    )

    counts = {reason: 0 for reason in FilterReason}
    for report in reports:
        for reason in report.rejection_reasons:
            counts[reason] += 1
    for reason, count in counts.items():
        _check(failures, count >= 3, f"rejection reason {reason.value} exercised {count} < 3 times")
    _finish("filter_golden_report", failures)


# --- detector tables ---------------------------------------------------------


def test_detector_grouping_and_thresholds():
    failures: list[str] = []
    expected_grouping = {
        Label.AI: GroupedLabel.AI_INVOLVEMENT,
        Label.HIGHLY_LIKELY_AI: GroupedLabel.AI_INVOLVEMENT,
        Label.LIKELY_AI: GroupedLabel.AI_INVOLVEMENT,
        Label.MIXED: GroupedLabel.MIXED,
        Label.POSSIBLY_AI: GroupedLabel.MIXED,
        Label.UNLIKELY_AI: GroupedLabel.HUMAN,
        Label.HUMAN: GroupedLabel.HUMAN,
    }
    for label in Label:
        got = group_label(label)
        _check(
            failures,
            got is expected_grouping[label],
            f"{label.value} grouped to {got.value}",
        )
    _check(failures, len(expected_grouping) == len(Label), "grouping table incomplete")

    _check(
        failures,
        CROSS_PERPLEXITY_THRESHOLD == 0.9015310749276843,
        f"cross-perplexity threshold drifted: {CROSS_PERPLEXITY_THRESHOLD!r}",
    )
    _check(
        failures,
        CURVATURE_THRESHOLD == 0.7890873125379173,
        f"curvature threshold drifted: {CURVATURE_THRESHOLD!r}",
    )
    for threshold in (CROSS_PERPLEXITY_THRESHOLD, CURVATURE_THRESHOLD):
        _check(
            failures,
            binarize_score(threshold, threshold) is False,
            f"score == threshold {threshold} must not flag",
        )
        _check(
            failures,
            binarize_score(threshold + 1e-12, threshold) is True,
            f"score just above threshold {threshold} must flag",
        )
        _check(
            failures,
            binarize_score(threshold - 1e-12, threshold) is False,
            f"score just below threshold {threshold} must not flag",
        )
    _finish("detector_tables", failures)


# --- sectional consistency ---------------------------------------------------


def test_sectional_weighted_mean_matches_copy_rate():
    failures: list[str] = []
    rng = random.Random(404)
    trials = 0
    while trials < 24:
        snippets = build_synthetic_corpus(rng, rng.randint(3, 10), rng.randint(12, 40))
        index = build_index(snippets)
        text = _random_text(rng, snippets, rng.randint(12, 200))
        result = run_attribution(index, text)
        n = result.text_token_count
        for k in (2, 3, 4, 7):
            if n < k:
                continue
            rates = sectional_rates(result, text, k=k)
            sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
            _check(failures, sum(sizes) == n, f"trial {trials}: block sizes {sizes} != {n}")
            weighted = sum(rate * size for rate, size in zip(rates, sizes)) / n
            _check(
                failures,
                abs(weighted - result.copy_rate) <= 1e-9,
                f"trial {trials} k={k}: weighted {weighted} vs copy_rate {result.copy_rate}",
            )
        trials += 1
    _finish("sectional_weighted_mean", failures)


# --- report integrity --------------------------------------------------------


def test_report_integrity(tmp_path):
    failures: list[str] = []

    # Aggregates recompute exactly from per-text rows of the shipped golden run.
    from stitchtext.cli import _load_judgments, _load_verdicts
    from stitchtext.pipeline import load_records

    golden = FIXTURES / "e2e" / "golden"
    records = load_records(golden / "records.jsonl")
    verdicts = _load_verdicts(golden / "verdicts.jsonl")
    judgments = _load_judgments(golden / "judgments.jsonl")
    report = build_report(records, verdicts, judgments)
    rows = report.rows
    n = len(rows)
    agg = report.aggregates
    _check(failures, n == 3, f"golden run rows {n}")
    _check(
        failures,
        agg.mean_word_count == sum(r.word_count for r in rows) / n,
        "mean_word_count does not recompute",
    )
    _check(
        failures,
        agg.mean_copy_rate == sum(r.copy_rate for r in rows) / n,
        "mean_copy_rate does not recompute",
    )
    _check(
        failures,
        agg.copy_pct_display == round(agg.mean_copy_rate * 100),
        "copy_pct_display does not recompute",
    )
    judged = [r for r in rows if r.coherence_passed is not None]
    _check(
        failures,
        agg.pct_coherent == 100.0 * sum(r.coherence_passed for r in judged) / len(judged),
        "pct_coherent does not recompute",
    )

    # Stripping highlight markers reconstructs the original text byte-for-byte.
    for record in records:
        result = record.drafts[-1].attribution
        marked = highlight(record.final_text, result.spans)
        _check(
            failures,
            strip_markers(marked).encode("utf-8") == record.final_text.encode("utf-8"),
            f"{record.prompt_id}: strip(highlight(text)) != text",
        )
    literal = "already ⟦copied:x⟧ marked ⟦/copied⟧ text"
    _check(
        failures,
        strip_markers(highlight(literal, ())) == literal,
        "literal marker characters do not round-trip",
    )

    # The sweep table contains exactly the configured copy targets.
    targets = [0.25, 0.5, 0.75, 0.9]
    store_path = tmp_path / "store.jsonl"
    rowsj = [
        {
            "id": f"s{i}",
            "doc_id": f"d{i}",
            "text": " ".join(f"s{i}w{j}x" for j in range(24)),
            "token_count": 24,
            "scope": "paragraph",
            "quality_score": None,
        }
        for i in range(3)
    ]
    store_path.write_text(
        "".join(json.dumps(r) + "\n" for r in rowsj), encoding="utf-8"
    )
    (tmp_path / "prompts.jsonl").write_text(
        json.dumps({"prompt_id": "p1", "prompt": "write about a storm"}) + "\n",
        encoding="utf-8",
    )
    transcript = tmp_path / "backend.jsonl"
    with transcript.open("w", encoding="utf-8") as handle:
        for _ in targets:
            handle.write(json.dumps({"text": "a fresh draft about weather and luck"}) + "\n")
            handle.write(json.dumps({"text": "no edits"}) + "\n")
    (tmp_path / "config.yaml").write_text(
        "pipeline:\n"
        "  snippets_per_prompt: 2\n"
        "  copy_rate_threshold: 0.0\n"
        "  revise_gate: copy_rate_only\n"
        f"sweep:\n  copy_targets: {targets}\n",
        encoding="utf-8",
    )
    code = dispatch(
        [
            "sweep",
            "--config", str(tmp_path / "config.yaml"),
            "--prompts", str(tmp_path / "prompts.jsonl"),
            "--store", str(store_path),
            "--mock-transcript", str(transcript),
            "--out", str(tmp_path / "out"),
        ]
    )
    _check(failures, code == 0, f"sweep exited {code}")
    sweep_rows = [
        json.loads(line)
        for line in (tmp_path / "out" / "report" / "sweep.jsonl")
        .read_text(encoding="utf-8")
        .splitlines()
    ]
    _check(
        failures,
        [row["copy_target"] for row in sweep_rows] == targets,
        f"sweep rows {[row['copy_target'] for row in sweep_rows]} != {targets}",
    )
    summary = (tmp_path / "out" / "report" / "summary.md").read_text(encoding="utf-8")
    for target in targets:
        _check(failures, f"\n| {target:g} |" in summary, f"target {target:g} missing from sweep table")
    _finish("report_integrity", failures)


# --- end-to-end offline replay ----------------------------------------------


GOLDEN_FILES = [
    "records.jsonl",
    "verdicts.jsonl",
    "judgments.jsonl",
    "report/per_text.jsonl",
    "report/aggregate.json",
    "report/summary.md",
    "report/highlighted/p1.txt",
    "report/highlighted/p2.txt",
    "report/highlighted/p3.txt",
]


def test_offline_replay_equals_golden(tmp_path, monkeypatch):
    failures: list[str] = []
    e2e = FIXTURES / "e2e"

    def _no_network(*args, **kwargs):
        raise AssertionError("offline replay attempted a network connection")

    monkeypatch.setattr(socket.socket, "connect", _no_network)
    monkeypatch.setattr(socket, "create_connection", _no_network)

    out = tmp_path / "out"
    code = dispatch(
        [
            "run-all",
            "--config", str(e2e / "config.yaml"),
            "--prompts", str(e2e / "prompts.jsonl"),
            "--store", str(e2e / "store.jsonl"),
            "--mock-transcript", str(e2e / "backend_transcript.jsonl"),
            "--out", str(out),
        ]
    )
    _check(failures, code == 0, f"run-all exited {code}")
    if code == 0:
        for rel in GOLDEN_FILES:
            produced = out / rel
            golden = e2e / "golden" / rel
            if not produced.is_file():
                _check(failures, False, f"missing output file {rel}")
                continue
            _check(
                failures,
                produced.read_bytes() == golden.read_bytes(),
                f"{rel} differs from golden",
            )
        _check(failures, (out / "manifest.json").is_file(), "manifest.json not written")
    _finish("offline_replay_equals_golden", failures)


# --- secondary component wire contract ---------------------------------------


def test_sidecar_transcript_conforms_to_wire_contract():
    failures: list[str] = []
    transcript = FIXTURES / "sidecar_transcript.jsonl"
    if not transcript.is_file():
        _check(failures, False, "recorded sidecar transcript is missing")
        _finish("sidecar_wire_contract", failures)

    import jsonschema

    rows = [
        json.loads(line)
        for line in transcript.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    _check(failures, len(rows) >= 4, f"transcript has only {len(rows)} rows")
    for i, row in enumerate(rows):
        response = row["response"]
        try:
            jsonschema.validate(response, RESPONSE_SCHEMA)
        except jsonschema.ValidationError as exc:
            _check(failures, False, f"row {i} fails schema: {exc.message}")
            continue
        _check(failures, bool(response.get("version")), f"row {i} has no version")
        if "label" in response:
            label = parse_label(response["label"])
            group_label(label)
        if "score" in response:
            score = response["score"]
            _check(
                failures,
                isinstance(score, (int, float)) and 0.0 <= float(score) <= 1.0,
                f"row {i} score {score!r} outside [0, 1]",
            )

    # Primary-side contract tests replay the transcript with no sidecar running.
    detectors = {row["response"]["detector"] for row in rows}
    for detector_id in sorted(detectors):
        client = TranscriptDetectorClient(
            detector_id, transcript, threshold=CROSS_PERPLEXITY_THRESHOLD
        )
        for row in rows:
            if row["response"]["detector"] != detector_id:
                continue
            verdict = classify(client, row["request"]["text"])
            _check(
                failures,
                verdict.label in set(Label),
                f"verdict label {verdict.label!r} outside the enum",
            )
            if "label" not in row["response"] and "score" in row["response"]:
                flagged = binarize_score(row["response"]["score"], client.threshold)
                expected = Label.AI if flagged else Label.HUMAN
                _check(
                    failures,
                    verdict.label is expected,
                    f"score-only row derived {verdict.label} != {expected}",
                )
    _finish("sidecar_wire_contract", failures)
