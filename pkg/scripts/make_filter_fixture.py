#!/usr/bin/env python3
"""Regenerate the 40-document filter fixture corpus and its golden report.

The corpus exercises every rejection reason at least three times. The golden
report is the exact JSONL that build_store produces over the corpus with the
stub quality scorer below; the acceptance suite recomputes it and compares
bytes. Fixture contract shared with the tests: a paragraph containing the
marker word "grayline" scores 2.0, everything else 9.0.
"""

from __future__ import annotations

import json
from pathlib import Path

from stitchtext.corpus import build_store

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

CLEAN_PARAGRAPHS = [
    "The keeper crossed the yard before first light and checked the lamp "
    "wicks one by one while the wind pushed at the shutters of the tower.",
    "A trader from the valley set out his stall beside the well and counted "
    "the jars of honey that had survived the long road over the pass.",
    "Rain moved across the harbor in slow gray sheets and the boats knocked "
    "against the pilings until the tide turned at last toward evening.",
    "She kept the ledger in a tin box under the counter and wrote each sale "
    "in a small careful hand that no one else in the shop could read.",
    "The orchard ran down to the river in uneven rows and in autumn the "
    "children carried the windfall apples up the hill in borrowed baskets.",
    "He mended the net on the seawall with cold fingers and watched the "
    "ferry cross the channel twice before the fog closed over the water.",
    "The old mill had lost its sails years ago but the stones inside still "
    "turned when the miller fed the belt from the rattling oil engine.",
    "At the edge of the town the road gave out into sand and the telegraph "
    "poles marched on alone toward the white shimmer of the salt flats.",
    "The landlady left a lamp burning in the hall for the late coach and "
    "set two covered plates by the hearth for whoever came in hungry.",
    "Snow settled on the pit roofs in the night and by morning the winding "
    "gear stood out black and still against a sky the color of ash.",
    "The surveyor drove his stakes along the dry creek bed and noted in his "
    "book that the bridge would need deeper footings than the plans allowed.",
    "Gulls followed the plough all morning and the farmer turned the last "
    "furrow as the church bell carried thin and clear across the fields.",
    "In the reading room the clock ticked against the quiet and a student "
    "copied figures from a borrowed atlas until the lamps were put out.",
    "The blacksmith banked his fire at noon and walked down to the quay to "
    "watch the new steamer warp in against the groaning fenders.",
    "Her letters came every month with pressed flowers in the folds and the "
    "postmarks traced a slow line of towns moving always further north.",
    "The shepherd counted the flock twice at the gate and still came up one "
    "short so he went back over the moor with the dog in the failing light.",
    "They raised the roof beam on the second day and nailed a green branch "
    "to the ridge while the carpenters stood below with their hats off.",
    "The tide pools held small darting lives that the boy studied for hours "
    "while his sisters gathered driftwood farther down the shore.",
]

MORE_CLEAN = [
    "The canal froze early that year and the barges sat locked in the ice "
    "while their crews played cards in the lee of the warehouse wall.",
    "A printer set type by the window to save lamp oil and the smell of ink "
    "hung in the stairwell all the way down to the street door.",
    "The doctor kept his horse saddled through the epidemic and slept in "
    "his boots beside the surgery stove for most of that winter.",
    "On market days the square filled before eight and the constable moved "
    "the barrows back from the fountain with weary patience.",
]

SHORT_PARAGRAPHS = [
    "He left at dawn.",
    "The door was not locked after all.",
    "She never wrote back to them.",
]

SYMBOL_PARAGRAPHS = [
    "== ++ @@ ## the $$ %% ^^ && map ** (( )) -- __ ~~ :: ;; !! ?? ||",
    "## ## == == the ++ ++ $$ $$ %% %% key && && ** ** (( (( )) )) !! !!",
    ":: :: ~~ ~~ || || the ## ## == == net ++ ++ $$ $$ %% %% ^^ ^^ && &&",
]

PSEUDOLATIN_PARAGRAPHS = [
    "velmor trassik onduleth parvine skeltor muandi fellgrim ostave drenmik "
    "yalvor crestin plomaud severn kaldrith bromley tascorn welfin ardmun "
    "solvet brinmar coldeth fanwick",
    "ormund velkin sastrel dunmore pelvrit ankhor seldwin travost meldric "
    "harnox bellstir quenmar vostrel andmik craveth yulbrin ostmere faldor "
    "wrenkil dasmuth olvane tersk",
    "quilmar denvrost albeth sarnwick toldmere uvrane weskith brandol "
    "femmore galstir hondreth ilvane jorwick kelmot lunvrise morbeth "
    "nalwick ostrive pelmund ruthvane",
]

METADATA_DOCS = [
    "Chapter 1 The Harbor ..... 3\nChapter 2 The Crossing ..... 19\n"
    "Chapter 3 The Storm ..... 41\nChapter 4 The Return ..... 67\n"
    "Chapter 5 The Ledger ..... 88\nChapter 6 The Lamp ..... 104\n"
    "Chapter 7 The Road ..... 131",
    "Contents\nPart 1 The Valley ..... 1\nPart 2 The River ..... 55\n"
    "Part 3 The Sea ..... 140\nPart 4 The Mountain ..... 201\n"
    "Part 5 The City ..... 260\nPart 6 The Plain ..... 311",
    "Section 1 Tools of the Trade ..... 2\nSection 2 Keeping Accounts ..... 27\n"
    "Section 3 Weights and Measures ..... 58\nSection 4 Letters of Credit ..... 83\n"
    "Section 5 The Coastal Routes ..... 119\nSection 6 Harbor Dues ..... 150",
]

GRAYLINE_PARAGRAPHS = [
    "The grayline report sat on the desk for a week before anyone in the "
    "office would admit to having ordered it or to knowing what it cost.",
    "Under the grayline clause the tenants owed a day of labor at harvest "
    "and the steward kept a careful list of who had sent a substitute.",
    "The grayline fence ran crooked over the hill because two surveyors had "
    "started from different churches and never once compared their notes.",
]


def long_paragraph(seed_word: str) -> str:
    sentence = (
        f"The {seed_word} convoy moved along the coast road all that week "
        "and the drivers slept in the cabs while the loaders worked the "
        "winches and the clerks argued over the lading bills by lamplight."
    )
    return " ".join([sentence] * 16)


def score_stub(text: str) -> float:
    return 2.0 if "grayline" in text else 9.0


def build_documents() -> list[tuple[str, str]]:
    docs: list[tuple[str, str]] = []
    for i, text in enumerate(CLEAN_PARAGRAPHS):
        docs.append((f"d{i:02d}", text))
    offset = len(docs)
    for i, text in enumerate(SHORT_PARAGRAPHS):
        docs.append((f"d{offset + i:02d}", text))
    offset = len(docs)
    for i, word in enumerate(["timber", "grain", "copper"]):
        docs.append((f"d{offset + i:02d}", long_paragraph(word)))
    offset = len(docs)
    for i, text in enumerate(SYMBOL_PARAGRAPHS):
        docs.append((f"d{offset + i:02d}", text))
    offset = len(docs)
    for i, text in enumerate(PSEUDOLATIN_PARAGRAPHS):
        docs.append((f"d{offset + i:02d}", text))
    offset = len(docs)
    for i, text in enumerate(METADATA_DOCS):
        docs.append((f"d{offset + i:02d}", text))
    offset = len(docs)
    for i, text in enumerate(GRAYLINE_PARAGRAPHS):
        docs.append((f"d{offset + i:02d}", text))
    offset = len(docs)
    for i, text in enumerate(MORE_CLEAN):
        docs.append((f"d{offset + i:02d}", text))
    assert len(docs) == 40, f"expected 40 documents, built {len(docs)}"
    return docs


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    docs = build_documents()
    docs_path = FIXTURE_DIR / "filter_docs.jsonl"
    with docs_path.open("w", encoding="utf-8") as handle:
        for doc_id, text in docs:
            handle.write(json.dumps({"doc_id": doc_id, "text": text}, ensure_ascii=False) + "\n")

    store, reports = build_store(docs, quality_scorer=score_stub)
    golden_path = FIXTURE_DIR / "filter_report_golden.jsonl"
    with golden_path.open("w", encoding="utf-8") as handle:
        for report in reports:
            handle.write(json.dumps(report.to_record(), ensure_ascii=False) + "\n")

    by_reason: dict[str, int] = {}
    for report in reports:
        for reason in report.rejection_reasons:
            by_reason[reason.value] = by_reason.get(reason.value, 0) + 1
    print(f"wrote {docs_path} ({len(docs)} docs)")
    print(f"wrote {golden_path} ({len(reports)} reports, {len(store)} accepted)")
    print(f"rejection reasons: {by_reason}")


if __name__ == "__main__":
    main()
