"""Weighted multi-task reward for one model output against one annotation.

    total       = lf * format + lg * grounding + le * explanation
    format      = share of the structural tags present in the output
    grounding   = wc * cls + wn * num + wiou * tiered(mIoU)   [optionally / its max]
    explanation = clamp(cos(embed(rationale), embed(gt_rationale)), 0, 1)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

from .embedder import Embedder, HashingEmbedder, text_similarity
from .errors import ConfigError, DegenerateRegion, EmptyGroundTruth, ReportSyntax, UnknownVerdict
from .model import AnalysisReport, BoundingBox, GroundTruthRecord, Verdict, clip_regions, iou
from .parser import DEFAULT_KEYWORDS, TAGS, TagPresence, VerdictKeywords, parse_output


@dataclass(frozen=True)
class RewardConfig:
    lambda_format: float = 0.15
    lambda_grounding: float = 0.75
    lambda_explanation: float = 0.1
    w_cls: float = 1.0
    w_num: float = 1.0
    w_iou: float = 1.0
    normalize_grounding: bool = True
    iou_tier_hi: float = 0.8
    iou_tier_lo: float = 0.5
    iou_reward_hi: float = 0.6
    iou_reward_mid: float = 0.4
    num_reward: float = 0.5
    tag_set: tuple[str, ...] = TAGS

    def __post_init__(self):
        object.__setattr__(self, "tag_set", tuple(self.tag_set))
        weights = (self.lambda_format, self.lambda_grounding, self.lambda_explanation, self.w_cls, self.w_num, self.w_iou)
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise ConfigError("reward weights must be finite and non-negative")
        if not 0.0 <= self.iou_tier_lo < self.iou_tier_hi <= 1.0:
            raise ConfigError("need 0 <= iou_tier_lo < iou_tier_hi <= 1")
        for name in ("iou_reward_hi", "iou_reward_mid", "num_reward"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not self.tag_set:
            raise ConfigError("tag_set cannot be empty")

    @classmethod
    def from_mapping(cls, data: dict) -> "RewardConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown reward config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tag_set"] = list(self.tag_set)
        return d

    @property
    def grounding_max(self) -> float:
        return self.w_cls * 1.0 + self.w_num * self.num_reward + self.w_iou * self.iou_reward_hi


DEFAULT_CONFIG = RewardConfig()


@dataclass(frozen=True)
class RewardBreakdown:
    r_format: float
    r_cls: float
    r_num: float
    r_iou: float
    miou: float
    r_grounding: float
    r_explanation: float
    r_total: float
    n_pred: int = 0
    n_gt: int = 0
    n_clipped: int = 0
    parse_error: Optional[str] = None
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


def format_reward(tp: TagPresence | str, cfg: RewardConfig = DEFAULT_CONFIG) -> float:
    """Fraction of ``cfg.tag_set`` present. Accepts a TagPresence or the raw output."""
    if isinstance(tp, TagPresence):
        present = tp.as_set()
        return sum(1 for t in cfg.tag_set if t in present) / len(cfg.tag_set)
    return sum(1 for t in cfg.tag_set if t in tp) / len(cfg.tag_set)


def detection_reward(c: Verdict, c_hat: Verdict) -> float:
    return 1.0 if c is c_hat else 0.0


def count_reward(n_pred: int, c_hat: Verdict, n_gt: int, cfg: RewardConfig = DEFAULT_CONFIG) -> float:
    if n_pred < 0 or n_gt < 0:
        raise ValueError("box counts cannot be negative")
    target = n_gt if c_hat is Verdict.FORGED else 0
    return cfg.num_reward if n_pred == target else 0.0


def localization_miou(pred: Sequence[BoundingBox], gt: Sequence[BoundingBox]) -> float:
    """Mean over ground-truth boxes of the best IoU against any predicted box (0 if none)."""
    if not gt:
        raise EmptyGroundTruth("mIoU is undefined without ground-truth boxes")
    best = [max((iou(g, p) for p in pred), default=0.0) for g in gt]
    return math.fsum(best) / len(best)


def tiered_iou_reward(miou: float, c_hat: Verdict, cfg: RewardConfig = DEFAULT_CONFIG) -> float:
    if c_hat is Verdict.AUTHENTIC:
        return 0.0
    if miou > cfg.iou_tier_hi:
        return cfg.iou_reward_hi
    if miou >= cfg.iou_tier_lo:
        return cfg.iou_reward_mid
    return 0.0


@dataclass(frozen=True)
class GroundingComponents:
    r_cls: float
    r_num: float
    r_iou: float
    miou: float
    n_pred: int
    n_gt: int
    n_clipped: int


def grounding_reward(
    pred: AnalysisReport, gt: GroundTruthRecord, cfg: RewardConfig = DEFAULT_CONFIG
) -> tuple[float, GroundingComponents]:
    r_cls = detection_reward(pred.verdict, gt.label)
    r_num = count_reward(len(pred.regions), gt.label, len(gt.gt_regions), cfg)
    clipped, n_clipped = clip_regions(pred.regions, gt.image_width, gt.image_height)
    if gt.label is Verdict.FORGED:
        miou = localization_miou(clipped, gt.gt_regions)
    else:
        miou = 0.0
    r_iou = tiered_iou_reward(miou, gt.label, cfg)
    raw = cfg.w_cls * r_cls + cfg.w_num * r_num + cfg.w_iou * r_iou
    if cfg.normalize_grounding:
        denom = cfg.grounding_max
        raw = raw / denom if denom > 0 else 0.0
    comps = GroundingComponents(r_cls, r_num, r_iou, miou, len(pred.regions), len(gt.gt_regions), n_clipped)
    return raw, comps


def explanation_reward(pred_rationale: str, gt_rationale: str, embedder: Embedder) -> float:
    """Clamped cosine of the two rationales' embeddings. Embedder errors propagate."""
    return text_similarity(pred_rationale, gt_rationale, embedder)


def combine(r_format: float, r_grounding: float, r_explanation: float, cfg: RewardConfig = DEFAULT_CONFIG) -> float:
    return cfg.lambda_format * r_format + cfg.lambda_grounding * r_grounding + cfg.lambda_explanation * r_explanation


def total_reward(
    pred_raw: str,
    gt: GroundTruthRecord,
    cfg: RewardConfig = DEFAULT_CONFIG,
    embedder: Optional[Embedder] = None,
    keywords: VerdictKeywords = DEFAULT_KEYWORDS,
) -> RewardBreakdown:
    """Score one raw output. Only embedding failures raise.

    An output whose report cannot be parsed keeps its format credit and
    scores zero on every content component.
    """
    if embedder is None:
        embedder = HashingEmbedder()
    r_format = format_reward(pred_raw, cfg)
    try:
        sections, report = parse_output(pred_raw, keywords)
    except (ReportSyntax, UnknownVerdict, DegenerateRegion) as e:
        return RewardBreakdown(
            r_format=r_format, r_cls=0.0, r_num=0.0, r_iou=0.0, miou=0.0, r_grounding=0.0,
            r_explanation=0.0, r_total=combine(r_format, 0.0, 0.0, cfg),
            n_gt=len(gt.gt_regions), parse_error=f"{type(e).__name__}: {e}",
        )
    r_grounding, comps = grounding_reward(report, gt, cfg)
    r_explanation = explanation_reward(report.rationale, gt.gt_rationale, embedder)
    notes = list(sections.notes)
    if comps.n_clipped:
        notes.append(f"{comps.n_clipped} predicted region(s) clipped to the image frame")
    return RewardBreakdown(
        r_format=r_format,
        r_cls=comps.r_cls,
        r_num=comps.r_num,
        r_iou=comps.r_iou,
        miou=comps.miou,
        r_grounding=r_grounding,
        r_explanation=r_explanation,
        r_total=combine(r_format, r_grounding, r_explanation, cfg),
        n_pred=comps.n_pred,
        n_gt=comps.n_gt,
        n_clipped=comps.n_clipped,
        notes=tuple(notes),
    )
