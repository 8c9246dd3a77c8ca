#!/usr/bin/env python3
"""Regenerate the offline end-to-end fixture and its golden outputs.

Builds a small snippet store, three writing prompts, a scripted backend
transcript, and a recorded detector transcript, then runs the real
`run-all` command over them and freezes the outputs as goldens. The
acceptance suite replays the same command into a scratch directory and
compares files byte for byte.

The three prompts walk distinct paths through the generation loop:
  p1: high-copy draft, detector says human  -> no revision, edit then stop.
  p2: low-copy draft                        -> revision, stop at first polish.
  p3: high-copy draft, detector flags AI    -> revision, polish to the cap.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

from stitchtext.cli import dispatch
from stitchtext.corpus import Scope, Snippet, SnippetStore, sample_snippets
from stitchtext.pipeline import derive_seed

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "e2e"

SEED = 7
SNIPPETS_PER_PROMPT = 4

PROMPTS = [
    ("p1", "Write a story about a lighthouse keeper who distrusts the new lamp."),
    ("p2", "Write a story about a market trader caught out by an early storm."),
    ("p3", "Write a story about a surveyor mapping a river that keeps moving."),
]

JUDGE_REPLIES = {
    "p1": ["False. Reads cleanly from start to finish.", "True. Follows the prompt closely."],
    "p2": ["True. The middle section wanders badly.", "True. Stays on the given topic."],
    "p3": ["False. Holds together well.", "False. Drifts away from the prompt."],
}


def build_store() -> SnippetStore:
    store = SnippetStore(scope=Scope.PARAGRAPH)
    for i in range(6):
        words = [f"s{i}w{j}x" for j in range(30)]
        text = " ".join(words)
        store.add(
            Snippet(
                id=f"src{i}",
                doc_id=f"doc{i}",
                text=text,
                token_count=30,
                scope=Scope.PARAGRAPH,
            )
        )
    return store


def fresh_text(tag: str, n: int = 40) -> str:
    return " ".join(f"{tag}{j}q" for j in range(n))


def main() -> None:
    if FIXTURE_DIR.exists():
        shutil.rmtree(FIXTURE_DIR)
    FIXTURE_DIR.mkdir(parents=True)

    store = build_store()
    store.save(FIXTURE_DIR / "store.jsonl")
    with (FIXTURE_DIR / "prompts.jsonl").open("w", encoding="utf-8") as handle:
        for prompt_id, text in PROMPTS:
            handle.write(json.dumps({"prompt_id": prompt_id, "prompt": text}) + "\n")

    # Mirror the per-prompt sampling the batch runner performs so the scripted
    # drafts are built from the snippets the model would actually be shown.
    sampled = {
        pid: sample_snippets(store, SNIPPETS_PER_PROMPT, derive_seed(SEED, pid))
        for pid, _ in PROMPTS
    }

    def high(pid: str, first: int = 0) -> str:
        picks = sampled[pid][first : first + 2]
        return " ".join(snippet.text for snippet in picks)

    d1 = high("p1")
    e1 = d1 + " " + fresh_text("p1tail", 6)
    d2 = fresh_text("p2fresh")
    r2 = high("p2")
    d3 = high("p3")
    r3 = high("p3", first=2)
    e3a = r3 + " " + fresh_text("p3one", 5)
    e3b = e3a + " " + fresh_text("p3two", 5)
    e3c = e3b + " " + fresh_text("p3three", 5)

    backend_script = [
        d1, e1, "no edits",
        d2, r2, "no edits",
        d3, r3, e3a, e3b, e3c,
    ]
    for pid, _ in PROMPTS:
        backend_script.extend(JUDGE_REPLIES[pid])
    with (FIXTURE_DIR / "backend_transcript.jsonl").open("w", encoding="utf-8") as handle:
        for text in backend_script:
            handle.write(json.dumps({"text": text}) + "\n")

    detector_rows = [
        (d1, {"label": "human", "score": 0.12, "detector": "det_a", "version": "fx1"}),
        (
            e1,
            {
                "label": "unlikely_ai",
                "score": 0.2,
                "ai_fraction": 0.1,
                "detector": "det_a",
                "version": "fx1",
            },
        ),
        (d2, {"label": "human", "score": 0.05, "detector": "det_a", "version": "fx1"}),
        (
            r2,
            {
                "label": "human",
                "score": 0.08,
                "ai_fraction": 0.0,
                "keywords": [{"phrase": "delve", "count": 2}],
                "detector": "det_a",
                "version": "fx1",
            },
        ),
        (d3, {"label": "likely_ai", "score": 0.97, "detector": "det_a", "version": "fx1"}),
        (r3, {"label": "human", "score": 0.2, "detector": "det_a", "version": "fx1"}),
        (
            e3c,
            {
                "label": "possibly_ai",
                "score": 0.55,
                "ai_fraction": 0.4,
                "keywords": [{"phrase": "tapestry", "count": 1}],
                "detector": "det_a",
                "version": "fx1",
            },
        ),
    ]
    with (FIXTURE_DIR / "detector_transcript.jsonl").open("w", encoding="utf-8") as handle:
        for text, response in detector_rows:
            handle.write(
                json.dumps({"request": {"text": text}, "response": response}) + "\n"
            )

    config = """\
pipeline:
  seed: 7
  snippets_per_prompt: 4
  copy_target: 0.9
  copy_rate_threshold: 0.6
  revise_gate: either
  max_polish_rounds: 3
  detector_id: det_a
judge:
  enabled: true
detectors:
  - id: det_a
    kind: transcript
    transcript: detector_transcript.jsonl
    threshold: 0.9
"""
    (FIXTURE_DIR / "config.yaml").write_text(config, encoding="utf-8")

    golden = FIXTURE_DIR / "golden"
    code = dispatch(
        [
            "run-all",
            "--config", str(FIXTURE_DIR / "config.yaml"),
            "--prompts", str(FIXTURE_DIR / "prompts.jsonl"),
            "--store", str(FIXTURE_DIR / "store.jsonl"),
            "--mock-transcript", str(FIXTURE_DIR / "backend_transcript.jsonl"),
            "--out", str(golden),
        ]
    )
    if code != 0:
        print(f"run-all failed with exit code {code}", file=sys.stderr)
        raise SystemExit(code)
    # The manifest embeds this machine's argv paths; it is not part of the golden.
    (golden / "manifest.json").unlink()

    records = (golden / "records.jsonl").read_text(encoding="utf-8").splitlines()
    rows = [json.loads(line) for line in records]
    expect = {
        "p1": (False, 2, True),
        "p2": (True, 1, True),
        "p3": (True, 3, False),
    }
    for row in rows:
        got = (row["revise_triggered"], row["polish_rounds_used"], row["stopped_on_no_edits"])
        want = expect[row["prompt_id"]]
        assert got == want, f"{row['prompt_id']}: expected {want}, got {got}"
    print(f"wrote fixture and goldens under {FIXTURE_DIR}")


if __name__ == "__main__":
    main()
