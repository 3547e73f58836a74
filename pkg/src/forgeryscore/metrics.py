"""Corpus-level benchmark metrics.

Detection: accuracy and binary F1 (forged = positive).
Grounding: per forged image, IoU and F1 between the rasterised union of
predicted boxes and of ground-truth boxes; averaged over forged images.
Explanation: mean clamped cosine (CSS) and, when supplied, BERTScore F1.
M-F1: mean of detection F1, grounding mF1 and BERTScore F1.

All reductions use ``math.fsum`` so results do not depend on record order.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .embedder import Embedder, text_similarity
from .errors import EmptyCorpus
from .model import BoundingBox, GroundTruthRecord, Verdict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pairs: Iterable[tuple[Optional[Verdict], Verdict]]) -> DetectionCounts:
    """Count outcomes. A ``None`` prediction (unparseable output) is always wrong."""
    tp = fp = fn = tn = 0
    for pred, gt in pairs:
        if pred is None:
            pred = Verdict.AUTHENTIC if gt is Verdict.FORGED else Verdict.FORGED
        if gt is Verdict.FORGED:
            if pred is Verdict.FORGED:
                tp += 1
            else:
                fn += 1
        elif pred is Verdict.FORGED:
            fp += 1
        else:
            tn += 1
    return DetectionCounts(tp, fp, fn, tn)


def detection_metrics(
    pairs: Sequence[tuple[Optional[Verdict], Verdict]], diagnostics: Optional[list[str]] = None
) -> tuple[float, float]:
    """Accuracy and forged-positive F1 over (prediction, ground truth) pairs."""
    if not pairs:
        raise EmptyCorpus("detection metrics need at least one sample")
    c = confusion(pairs)
    acc = (c.tp + c.tn) / c.total
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        msg = "detection F1 undefined (no forged samples predicted or present); reported as 0"
        logger.warning(msg)
        if diagnostics is not None:
            diagnostics.append(msg)
        return acc, 0.0
    return acc, 2 * c.tp / denom


def rasterize(boxes: Iterable[BoundingBox], w: int, h: int) -> np.ndarray:
    """Boolean (h, w) mask; pixel (i, j) is set iff x0 <= i < x1 and y0 <= j < y1 for some box."""
    if w < 1 or h < 1:
        raise ValueError("mask dimensions must be >= 1")
    mask = np.zeros((h, w), dtype=bool)
    for b in boxes:
        i0 = max(0, math.ceil(b.x0))
        i1 = min(w, math.ceil(b.x1))
        j0 = max(0, math.ceil(b.y0))
        j1 = min(h, math.ceil(b.y1))
        if i0 < i1 and j0 < j1:
            mask[j0:j1, i0:i1] = True
    return mask


@dataclass(frozen=True)
class PixelScores:
    iou: float
    f1: float
    tp: int
    fp: int
    fn: int


def pixel_scores(pred: Sequence[BoundingBox], gt: Sequence[BoundingBox], w: int, h: int) -> PixelScores:
    pm = rasterize(pred, w, h)
    gm = rasterize(gt, w, h)
    tp = int(np.count_nonzero(pm & gm))
    fp = int(np.count_nonzero(pm & ~gm))
    fn = int(np.count_nonzero(~pm & gm))
    if tp + fp + fn == 0:
        # Both masks empty: nothing to localise and nothing claimed.
        return PixelScores(1.0, 1.0, 0, 0, 0)
    return PixelScores(tp / (tp + fp + fn), 2 * tp / (2 * tp + fp + fn), tp, fp, fn)


def _frame(gt: GroundTruthRecord) -> tuple[int, int]:
    return max(1, math.ceil(gt.image_width)), max(1, math.ceil(gt.image_height))


def localization_metrics(corpus: Sequence[tuple[Sequence[BoundingBox], GroundTruthRecord]]) -> tuple[float, float]:
    """Mean pixel IoU and F1 over forged images; authentic images are skipped."""
    ious, f1s = [], []
    for pred, gt in corpus:
        if gt.label is not Verdict.FORGED:
            continue
        w, h = _frame(gt)
        s = pixel_scores(pred, gt.gt_regions, w, h)
        ious.append(s.iou)
        f1s.append(s.f1)
    if not ious:
        raise EmptyCorpus("grounding metrics need at least one forged image")
    return math.fsum(ious) / len(ious), math.fsum(f1s) / len(f1s)


def explanation_css(corpus: Sequence[tuple[str, str]], embedder: Embedder) -> float:
    """Mean clamped cosine between (predicted, reference) rationales."""
    if not corpus:
        raise EmptyCorpus("CSS needs at least one sample")
    return math.fsum(text_similarity(p, g, embedder) for p, g in corpus) / len(corpus)


def macro_f1(det_f1: float, grd_mf1: float, expl_f1: float) -> float:
    return math.fsum((det_f1, grd_mf1, expl_f1)) / 3


@dataclass
class MetricsSummary:
    n_samples: int
    n_forged: int
    n_authentic: int
    detection_acc: float
    detection_f1: float
    grounding_miou: Optional[float]
    grounding_mf1: Optional[float]
    css: float
    bertscore_f1: Optional[float] = None
    m_f1: Optional[float] = None
    m_f1_label: str = "M-F1"
    n_unparseable: int = 0
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **extra) -> str:
        return json.dumps({**extra, "metrics": self.to_dict()}, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def to_table(self, name: str = "model") -> str:
        """Plain-text table in the usual benchmark column order, percentages with one decimal."""
        cols = [
            ("Acc", self.detection_acc),
            ("F1", self.detection_f1),
            ("mIoU", self.grounding_miou),
            ("mF1", self.grounding_mf1),
            ("CSS", self.css),
            ("BS(F1)", self.bertscore_f1),
            (self.m_f1_label, self.m_f1),
        ]
        cells = [("-" if v is None else f"{100 * v:.1f}") for _, v in cols]
        widths = [max(len(h), len(c)) for (h, _), c in zip(cols, cells)]
        label_w = max(len("Method"), len(name))
        header = "Method".ljust(label_w) + " | " + " | ".join(h.rjust(wd) for (h, _), wd in zip(cols, widths))
        row = name.ljust(label_w) + " | " + " | ".join(c.rjust(wd) for c, wd in zip(cells, widths))
        return "\n".join([header, "-" * len(header), row]) + "\n"


@dataclass(frozen=True)
class EvalSample:
    """One joined sample as the metrics see it."""

    gt: GroundTruthRecord
    verdict: Optional[Verdict]
    regions: tuple[BoundingBox, ...]
    rationale: str


def summarize(
    samples: Sequence[EvalSample],
    embedder: Embedder,
    bertscore: Optional[dict[str, float]] = None,
    css_substitute: bool = False,
    css_values: Optional[Sequence[float]] = None,
) -> MetricsSummary:
    """Compute every corpus metric.

    ``bertscore`` maps sample_id -> BERTScore F1 (e.g. from a sidecar file);
    otherwise the per-record ``external_bertscore_f1`` values are used. A
    BERTScore mean is reported only when every sample has one.
    ``css_values`` lets a caller pass precomputed per-sample similarities.
    """
    if not samples:
        raise EmptyCorpus("no samples to evaluate")
    diagnostics: list[str] = []
    n_forged = sum(1 for s in samples if s.gt.label is Verdict.FORGED)
    acc, f1 = detection_metrics([(s.verdict, s.gt.label) for s in samples], diagnostics)
    if n_forged:
        miou, mf1 = localization_metrics([(s.regions, s.gt) for s in samples])
    else:
        miou = mf1 = None
        diagnostics.append("no forged images: grounding metrics not reported")

    n_clipped = sum(1 for s in samples for b in s.regions if not b.within(s.gt.image_width, s.gt.image_height))
    if n_clipped:
        diagnostics.append(f"{n_clipped} predicted region(s) extend past the image frame and were clipped")

    if css_values is None:
        css = explanation_css([(s.rationale, s.gt.gt_rationale) for s in samples], embedder)
    else:
        css = math.fsum(css_values) / len(css_values)

    values = []
    for s in samples:
        v = bertscore.get(s.gt.sample_id) if bertscore is not None else None
        if v is None:
            v = s.gt.external_bertscore_f1
        values.append(v)
    have = [v for v in values if v is not None]
    bs = None
    if have and len(have) == len(values):
        bs = math.fsum(have) / len(have)
    elif have:
        diagnostics.append(f"BERTScore F1 present for {len(have)}/{len(values)} samples; not reported")

    m_f1, label = None, "M-F1"
    if mf1 is not None and bs is not None:
        m_f1 = macro_f1(f1, mf1, bs)
    elif mf1 is not None and css_substitute:
        m_f1, label = macro_f1(f1, mf1, css), "M-F1(CSS)"
        diagnostics.append("M-F1 computed with CSS in place of BERTScore F1")
    elif mf1 is not None:
        msg = "BERTScore F1 unavailable: M-F1 not reported (pass --mf1-css-substitute to use CSS)"
        logger.warning(msg)
        diagnostics.append(msg)

    return MetricsSummary(
        n_samples=len(samples),
        n_forged=n_forged,
        n_authentic=len(samples) - n_forged,
        detection_acc=acc,
        detection_f1=f1,
        grounding_miou=miou,
        grounding_mf1=mf1,
        css=css,
        bertscore_f1=bs,
        m_f1=m_f1,
        m_f1_label=label,
        n_unparseable=sum(1 for s in samples if s.verdict is None),
        diagnostics=diagnostics,
    )
