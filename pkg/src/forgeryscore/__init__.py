"""Reward scoring, reasoning-trace validation and benchmark metrics for
text-centric document forgery analysis reports."""

from .cct import CctTrace, CueRecord, ValidationDiagnostics, filter_cues, parse_trace, validate
from .embedder import EmbeddingVector, HashingEmbedder, RemoteEmbedder, cosine, embed_fallback, embed_remote
from .grpo import batch_advantages, group_advantages
from .metrics import MetricsSummary, detection_metrics, localization_metrics, macro_f1, rasterize
from .model import AnalysisReport, BoundingBox, GroundTruthRecord, Quad, Verdict, iou, normalize_quad
from .parser import classify_verdict_text, extract_sections, parse_report, serialize_report
from .reward import RewardBreakdown, RewardConfig, total_reward

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "BoundingBox",
    "CctTrace",
    "CueRecord",
    "EmbeddingVector",
    "GroundTruthRecord",
    "HashingEmbedder",
    "MetricsSummary",
    "Quad",
    "RemoteEmbedder",
    "RewardBreakdown",
    "RewardConfig",
    "ValidationDiagnostics",
    "Verdict",
    "batch_advantages",
    "classify_verdict_text",
    "cosine",
    "detection_metrics",
    "embed_fallback",
    "embed_remote",
    "extract_sections",
    "filter_cues",
    "group_advantages",
    "iou",
    "localization_metrics",
    "macro_f1",
    "normalize_quad",
    "parse_report",
    "parse_trace",
    "rasterize",
    "serialize_report",
    "total_reward",
    "validate",
]
