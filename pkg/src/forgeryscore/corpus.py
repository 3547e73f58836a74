"""JSONL corpora: ground truth, predictions, reward logs, sidecars.

Ground truth, one object per line::

    {"sample_id": "rt-0001", "image_width": 1344, "image_height": 896,
     "label": "forged", "gt_regions": [[x0, y0, x1, y1], ...],
     "gt_rationale": "...", "external_bertscore_f1": 0.81,
     "cct_annotation": {...}, "schema_version": 1}

Predictions::

    {"sample_id": "rt-0001", "raw_output": "<think>...</think><report>...</report>",
     "group_id": "prompt-17"}

``external_bertscore_f1``, ``cct_annotation``, ``group_id`` and
``schema_version`` are optional. Every error carries the 1-based line number.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Optional, Sequence

import jsonschema

from .errors import DegenerateRegion, JoinMismatch, SchemaViolation
from .model import BoundingBox, GroundTruthRecord, Verdict

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

_BOX = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}

GROUND_TRUTH_SCHEMA = {
    "type": "object",
    "required": ["sample_id", "image_width", "image_height", "label", "gt_regions", "gt_rationale"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "sample_id": {"type": "string", "minLength": 1},
        "image_width": {"type": "number", "exclusiveMinimum": 0},
        "image_height": {"type": "number", "exclusiveMinimum": 0},
        "label": {"enum": ["authentic", "forged"]},
        "gt_regions": {"type": "array", "items": _BOX},
        "gt_rationale": {"type": "string"},
        "external_bertscore_f1": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "cct_annotation": {"type": ["object", "null"]},
    },
}

PREDICTION_SCHEMA = {
    "type": "object",
    "required": ["sample_id", "raw_output"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "sample_id": {"type": "string", "minLength": 1},
        "raw_output": {"type": "string"},
        "group_id": {"type": ["string", "integer", "null"]},
    },
}

_GT_VALIDATOR = jsonschema.Draft202012Validator(GROUND_TRUTH_SCHEMA)
_PRED_VALIDATOR = jsonschema.Draft202012Validator(PREDICTION_SCHEMA)


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    raw_output: str
    group_id: Optional[str | int] = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"sample_id": self.sample_id, "raw_output": self.raw_output}
        if self.group_id is not None:
            d["group_id"] = self.group_id
        return d


def _iter_json_lines(path: str) -> Iterator[tuple[int, Any]]:
    if not os.path.isfile(path):
        raise SchemaViolation("file not found", path=path)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                logger.warning("%s:%d: blank line skipped", path, lineno)
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaViolation(f"invalid JSON: {e.msg} (column {e.colno})", lineno, path) from None


def _schema_check(validator: jsonschema.Draft202012Validator, obj: Any, lineno: int, path: str) -> None:
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path)
        raise SchemaViolation(f"{where + ': ' if where else ''}{e.message}", lineno, path)


def ground_truth_from_dict(obj: dict) -> GroundTruthRecord:
    regions = tuple(BoundingBox.from_list(r) for r in obj["gt_regions"])
    return GroundTruthRecord(
        sample_id=obj["sample_id"],
        image_width=obj["image_width"],
        image_height=obj["image_height"],
        label=Verdict(obj["label"]),
        gt_regions=regions,
        gt_rationale=obj["gt_rationale"],
        external_bertscore_f1=obj.get("external_bertscore_f1"),
        cct_annotation=obj.get("cct_annotation"),
    )


def ground_truth_to_dict(r: GroundTruthRecord) -> dict:
    d: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "sample_id": r.sample_id,
        "image_width": r.image_width,
        "image_height": r.image_height,
        "label": r.label.value,
        "gt_regions": [b.to_list() for b in r.gt_regions],
        "gt_rationale": r.gt_rationale,
    }
    if r.external_bertscore_f1 is not None:
        d["external_bertscore_f1"] = r.external_bertscore_f1
    if r.cct_annotation is not None:
        d["cct_annotation"] = r.cct_annotation
    return d


def load_ground_truth(path: str) -> list[GroundTruthRecord]:
    records: list[GroundTruthRecord] = []
    seen: dict[str, int] = {}
    for lineno, obj in _iter_json_lines(path):
        _schema_check(_GT_VALIDATOR, obj, lineno, path)
        sid = obj["sample_id"]
        if sid in seen:
            raise SchemaViolation(f"duplicate sample_id {sid!r} (first on line {seen[sid]})", lineno, path)
        seen[sid] = lineno
        try:
            records.append(ground_truth_from_dict(obj))
        except (DegenerateRegion, ValueError) as e:
            raise SchemaViolation(str(e), lineno, path) from None
    return records


def load_predictions(path: str) -> list[PredictionRecord]:
    records: list[PredictionRecord] = []
    seen: dict[str, int] = {}
    for lineno, obj in _iter_json_lines(path):
        _schema_check(_PRED_VALIDATOR, obj, lineno, path)
        sid = obj["sample_id"]
        if sid in seen:
            raise SchemaViolation(f"duplicate sample_id {sid!r} (first on line {seen[sid]})", lineno, path)
        seen[sid] = lineno
        records.append(PredictionRecord(sid, obj["raw_output"], obj.get("group_id")))
    return records


def load_bertscore_sidecar(path: str) -> dict[str, float]:
    """JSONL of ``{"sample_id": ..., "bertscore_f1": ...}``."""
    out: dict[str, float] = {}
    for lineno, obj in _iter_json_lines(path):
        if not isinstance(obj, dict) or not isinstance(obj.get("sample_id"), str):
            raise SchemaViolation("sidecar line needs a string sample_id", lineno, path)
        v = obj.get("bertscore_f1")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
            raise SchemaViolation("bertscore_f1 must be a number in [0, 1]", lineno, path)
        out[obj["sample_id"]] = float(v)
    return out


def join_corpora(
    preds: Sequence[PredictionRecord],
    gts: Sequence[GroundTruthRecord],
    allow_partial: bool = False,
) -> list[tuple[PredictionRecord, GroundTruthRecord]]:
    """Inner join on sample_id, in prediction order."""
    by_id = {g.sample_id: g for g in gts}
    pred_ids = {p.sample_id for p in preds}
    missing_gt = [p.sample_id for p in preds if p.sample_id not in by_id]
    missing_pred = [g.sample_id for g in gts if g.sample_id not in pred_ids]
    if missing_gt or missing_pred:
        if not allow_partial:
            raise JoinMismatch(missing_pred, missing_gt)
        logger.warning(
            "partial join: %d prediction(s) without ground truth, %d ground-truth record(s) without prediction",
            len(missing_gt),
            len(missing_pred),
        )
    return [(p, by_id[p.sample_id]) for p in preds if p.sample_id in by_id]


def dumps_line(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, allow_nan=False) + "\n"


def write_jsonl(path: str, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(dumps_line(row))


def write_ground_truth(path: str, records: Iterable[GroundTruthRecord]) -> None:
    write_jsonl(path, (ground_truth_to_dict(r) for r in records))


def write_predictions(path: str, records: Iterable[PredictionRecord]) -> None:
    write_jsonl(path, ({"schema_version": SCHEMA_VERSION, **r.to_dict()} for r in records))


def reward_log_row(sample_id: str, breakdown: dict, config_hash: str, group_id=None) -> dict:
    row = {"schema_version": SCHEMA_VERSION, "sample_id": sample_id, "config_hash": config_hash, **breakdown}
    if group_id is not None:
        row["group_id"] = group_id
    return row


def load_reward_log(path: str) -> list[dict]:
    """Reward log JSONL, or a JSON file holding a bare array of numbers."""
    if not os.path.isfile(path):
        raise SchemaViolation("file not found", path=path)
    with open(path, encoding="utf-8") as f:
        text = f.read()
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            arr = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaViolation(f"invalid JSON: {e.msg}", e.lineno, path) from None
        rows = []
        for i, v in enumerate(arr):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise SchemaViolation(f"element {i} is not a finite number", path=path)
            rows.append({"r_total": float(v)})
        return rows
    rows = []
    for lineno, obj in _iter_json_lines(path):
        if not isinstance(obj, dict):
            raise SchemaViolation("reward log line must be an object", lineno, path)
        v = obj.get("r_total")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SchemaViolation("r_total must be a finite number", lineno, path)
        rows.append(obj)
    return rows
