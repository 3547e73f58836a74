"""Synthetic corpora for tests, demos and determinism checks.

Everything is driven by an explicit ``random.Random`` so a seed fully
determines the output.
"""

from __future__ import annotations

import random
from typing import Optional

from .cct import CueRecord, Modality, Subtype, render_trace
from .corpus import PredictionRecord
from .model import AnalysisReport, BoundingBox, GroundTruthRecord, Verdict
from .parser import serialize_report

_VISUAL = [
    "edge aliasing around the altered digits",
    "font weight differs from neighbouring text",
    "chromatic fringe along the glyph outline",
    "background texture breaks behind the amount",
    "inconsistent JPEG blocking in the date field",
]
_LOGICAL = [
    "line items do not sum to the printed total",
    "issue date falls after the due date",
    "stated average contradicts hits over at bats",
    "QR code predates the printing technology of the card",
    "tax rate does not match the jurisdiction",
]
_AUTHENTIC = [
    "printing, layout and arithmetic are mutually consistent",
    "no visual or logical anomaly survives cross validation",
    "totals reconcile and fonts match throughout",
]


def random_box(rng: random.Random, width: int, height: int, max_side: int = 80) -> BoundingBox:
    w = rng.randint(4, min(max_side, width - 1))
    h = rng.randint(4, min(max_side, height - 1))
    x0 = rng.randint(0, width - w)
    y0 = rng.randint(0, height - h)
    return BoundingBox(x0, y0, x0 + w, y0 + h)


def ground_truth(rng: random.Random, sample_id: str, forged: Optional[bool] = None, width: int = 320, height: int = 240,
                 bertscore: bool = False) -> GroundTruthRecord:
    if forged is None:
        forged = rng.random() < 0.6
    if forged:
        regions = tuple(random_box(rng, width, height) for _ in range(rng.randint(1, 3)))
        rationale = "; ".join(rng.sample(_VISUAL, 1) + rng.sample(_LOGICAL, 1))
    else:
        regions = ()
        rationale = rng.choice(_AUTHENTIC)
    return GroundTruthRecord(
        sample_id=sample_id,
        image_width=width,
        image_height=height,
        label=Verdict.FORGED if forged else Verdict.AUTHENTIC,
        gt_regions=regions,
        gt_rationale=rationale,
        external_bertscore_f1=round(rng.uniform(0.4, 0.95), 4) if bertscore else None,
    )


def consistent_output(report: AnalysisReport, rng: Optional[random.Random] = None) -> str:
    """Tagged output whose trace validates cleanly against ``report``.

    One high-value visual cue is grounded on each report region; logical
    cues are added but scored below the filter threshold so they need no
    region of their own.
    """
    rng = rng or random.Random(0)
    cues, grounded = [], []
    for i, box in enumerate(report.regions, start=1):
        cue = CueRecord(f"V{i}", Modality.VISUAL, rng.choice((Subtype.LOCAL, Subtype.GLOBAL)), rng.choice(_VISUAL),
                        round(rng.uniform(0.6, 1.0), 3))
        cues.append(cue)
        grounded.append((cue.id, box))
    cues.append(CueRecord("L1", Modality.LOGICAL, rng.choice((Subtype.INTERNAL, Subtype.SCENARIO)), rng.choice(_LOGICAL),
                          round(rng.uniform(0.0, 0.45), 3)))
    think = render_trace(
        cues,
        grounded,
        ocr=[(f"line {i}", box) for i, (_, box) in enumerate(grounded, start=1)],
        caption="A printed document with a text-dense layout.",
        synthesis=report.rationale,
    )
    return serialize_report(report, think)


def _jitter(rng: random.Random, v: float) -> float:
    return max(0.0, v + rng.randint(-3, 3))


def noisy_prediction(rng: random.Random, gt: GroundTruthRecord, quality: float) -> AnalysisReport:
    """A prediction that matches ``gt`` more often and more closely as ``quality`` -> 1."""
    correct = rng.random() < quality
    forged = (gt.label is Verdict.FORGED) == correct
    regions = []
    if forged:
        source = gt.gt_regions or (random_box(rng, int(gt.image_width), int(gt.image_height)),)
        for box in source:
            if rng.random() > quality:
                regions.append(random_box(rng, int(gt.image_width), int(gt.image_height)))
                continue
            x0, y0 = _jitter(rng, box.x0), _jitter(rng, box.y0)
            x1 = max(x0 + 1, _jitter(rng, box.x1))
            y1 = max(y0 + 1, _jitter(rng, box.y1))
            regions.append(BoundingBox(x0, y0, x1, y1))
    rationale = gt.gt_rationale if rng.random() < quality else rng.choice(_VISUAL + _LOGICAL + _AUTHENTIC)
    return AnalysisReport(Verdict.FORGED if forged else Verdict.AUTHENTIC, tuple(regions), rationale)


def corpus(n: int, seed: int = 0, quality: float = 0.8, bertscore: bool = True,
           garbage_rate: float = 0.05) -> tuple[list[GroundTruthRecord], list[PredictionRecord]]:
    """``n`` ground-truth records and matching predictions, some deliberately broken."""
    rng = random.Random(seed)
    gts, preds = [], []
    for i in range(n):
        sid = f"synth-{i:05d}"
        gt = ground_truth(rng, sid, bertscore=bertscore)
        gts.append(gt)
        roll = rng.random()
        if roll < garbage_rate:
            raw = rng.choice(["", "<think>unfinished", "<think>x</think><report>{not json</report>"])
        else:
            raw = consistent_output(noisy_prediction(rng, gt, quality), rng)
        preds.append(PredictionRecord(sid, raw, group_id=f"g{i // 4}"))
    return gts, preds
