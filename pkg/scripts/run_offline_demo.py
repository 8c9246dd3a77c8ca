#!/usr/bin/env python3
"""Replay the shipped offline fixture end to end and print the summary.

Runs the full command-line flow (generate, attribute, detect, judge, report)
against the recorded backend and detector transcripts, so it needs no
network, no API keys, and no running services.

Usage: python3 scripts/run_offline_demo.py [out_dir]
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

from stitchtext.cli import dispatch

FIXTURE = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "e2e"


def main() -> int:
    if len(sys.argv) > 1:
        out_dir = Path(sys.argv[1])
    else:
        out_dir = Path(tempfile.mkdtemp(prefix="stitchtext-demo-"))
    code = dispatch(
        [
            "run-all",
            "--config", str(FIXTURE / "config.yaml"),
            "--prompts", str(FIXTURE / "prompts.jsonl"),
            "--store", str(FIXTURE / "store.jsonl"),
            "--mock-transcript", str(FIXTURE / "backend_transcript.jsonl"),
            "--out", str(out_dir),
        ]
    )
    if code != 0:
        return code
    print()
    print((out_dir / "report" / "summary.md").read_text(encoding="utf-8"))
    print(f"full outputs under {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
