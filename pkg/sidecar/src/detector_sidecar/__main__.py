"""Run the scoring service: python -m detector_sidecar [options]."""

from __future__ import annotations

import argparse

from .app import create_app
from .config import DEFAULT_MAX_TEXT_CHARS, DetectorKind, SidecarConfig


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="detector-sidecar")
    parser.add_argument(
        "--kind",
        choices=[kind.value for kind in DetectorKind],
        default=DetectorKind.CROSS_PERPLEXITY.value,
    )
    parser.add_argument("--scorer-model", default="builtin:prose-a")
    parser.add_argument("--reference-model", default="builtin:prose-b")
    parser.add_argument("--threshold", type=float, default=None)
    parser.add_argument("--port", type=int, default=8799)
    parser.add_argument("--max-text-chars", type=int, default=DEFAULT_MAX_TEXT_CHARS)
    args = parser.parse_args(argv)

    config = SidecarConfig(
        detector_kind=DetectorKind(args.kind),
        scorer_model=args.scorer_model,
        reference_model=args.reference_model,
        threshold=args.threshold,
        port=args.port,
        max_text_chars=args.max_text_chars,
    )
    import uvicorn

    uvicorn.run(create_app(config), host="127.0.0.1", port=config.port)


if __name__ == "__main__":
    main()
