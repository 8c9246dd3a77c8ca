"""Stitch verbatim human snippets into generated texts, then audit the result.

The package covers the full loop: corpus ingestion and filtering, seeded
snippet selection, a draft/revise/polish generation pipeline behind a mockable
model gateway, trigram-plus-LCS copy attribution with span provenance,
detector and judge clients, and report emission. See README.md for usage.
"""

__version__ = "0.1.0"

from .attribution import (
    AttributionResult,
    Span,
    TrigramIndex,
    attribute,
    build_index,
    match_candidates,
    run_attribution,
    sectional_rates,
    select_cover,
)
from .corpus import (
    FilterReason,
    FilterReport,
    Scope,
    Snippet,
    SnippetStore,
    apply_filters,
    build_store,
    extract_snippets,
    rank_relevant,
    sample_snippets,
)
from .detectors import (
    DetectorVerdict,
    GroupedLabel,
    Label,
    binarize_score,
    classify,
    detection_rates,
    group_label,
)
from .gateway import Gateway, MockBackend, PromptRequest, TemplateLibrary
from .judges import JudgeVerdict, judge_coherence, judge_relevance, parse_verdict
from .pipeline import (
    GenerationRecord,
    PipelineConfig,
    ReviseGate,
    needs_revision,
    run_batch,
    run_pipeline,
)
from .report import EvalReport, build_report, emit_report, highlight, strip_markers
from .textnorm import PRONOUN_PLACEHOLDER, NormalizedToken, normalize, stem
