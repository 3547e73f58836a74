"""Cross-cues reasoning traces: parse the think section, check its consistency.

Trace grammar (one item per line, stage headers case-insensitive)::

    Stage 1: Knowledge Preparation
    OCR: [12, 40, 180, 62] "AL MATTIN"
    Stage 2: Visual Cues Extraction
    - [V1] (Visual/Local, score=0.92) edge aliasing around the player name
    Stage 3: Logical Cues Extraction
    - [L1] (Logical/Internal, score=0.88) .381 average contradicts 135/480
    Stage 4: Cross-Cues Validation & Filtering
    High-value cues: V1, L1
    Stage 5: Grounding
    - V1 -> [12, 40, 180, 62]
    Stage 6: Report Synthesis
    free text

Anything that does not match a recognised line form stays in the owning
stage's free text. Parsing never fails; problems surface in
:func:`validate`.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .errors import DegenerateRegion
from .model import AnalysisReport, BoundingBox, Verdict, iou, region_from_values

DEFAULT_SCORE_THRESHOLD = 0.5
LINK_IOU = 0.5


class StageKind(enum.Enum):
    KNOWLEDGE_PREPARATION = 1
    VISUAL_CUES = 2
    LOGICAL_CUES = 3
    CROSS_VALIDATION = 4
    GROUNDING = 5
    REPORT_SYNTHESIS = 6


CANONICAL_STAGE_NAMES = {
    StageKind.KNOWLEDGE_PREPARATION: "Knowledge Preparation",
    StageKind.VISUAL_CUES: "Visual Cues Extraction",
    StageKind.LOGICAL_CUES: "Logical Cues Extraction",
    StageKind.CROSS_VALIDATION: "Cross-Cues Validation & Filtering",
    StageKind.GROUNDING: "Grounding",
    StageKind.REPORT_SYNTHESIS: "Report Synthesis",
}

# Short forms accepted in headers, besides the canonical names.
_STAGE_ALIASES = {
    StageKind.KNOWLEDGE_PREPARATION: ("knowledge preparation",),
    StageKind.VISUAL_CUES: ("visual cues extraction", "visual cues"),
    StageKind.LOGICAL_CUES: ("logical cues extraction", "logical cues"),
    StageKind.CROSS_VALIDATION: (
        "cross-cues validation & filtering",
        "cross-cues validation and filtering",
        "cross-cues validation",
        "cross validation",
    ),
    StageKind.GROUNDING: ("grounding",),
    StageKind.REPORT_SYNTHESIS: ("report synthesis",),
}

_HEADER_RE = re.compile(r"^\s*[#*]*\s*stage\s+(\d+)\s*[:.)\-]\s*(.+?)\s*[*#]*\s*$", re.IGNORECASE)
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_CUE_RE = re.compile(
    r"^\s*[-*]\s*\[(?P<id>[^\]\s]+)\]\s*\(\s*(?P<modality>\w+)\s*/\s*(?P<subtype>\w+)\s*,\s*score\s*=\s*(?P<score>"
    + _NUM
    + r")\s*\)\s*(?P<desc>.*)$",
    re.IGNORECASE,
)
_HIGH_VALUE_RE = re.compile(r"^\s*high[- ]value(?: cues)?\s*:\s*(?P<ids>.*)$", re.IGNORECASE)
_COORDS = r"\[\s*(?P<coords>" + _NUM + r"(?:\s*,\s*" + _NUM + r")*)\s*\]"
_GROUND_RE = re.compile(r"^\s*[-*]\s*(?P<id>[^\s\[\]]+)\s*(?:->|=>|:)\s*" + _COORDS + r"\s*$")
_OCR_RE = re.compile(r"^\s*ocr\s*:\s*" + _COORDS + r"\s*(?P<text>\".*\")\s*$", re.IGNORECASE)


class Modality(enum.Enum):
    VISUAL = "Visual"
    LOGICAL = "Logical"


class Subtype(enum.Enum):
    GLOBAL = "Global"
    LOCAL = "Local"
    INTERNAL = "Internal"
    SCENARIO = "Scenario"


_ALLOWED_SUBTYPES = {
    Modality.VISUAL: (Subtype.GLOBAL, Subtype.LOCAL),
    Modality.LOGICAL: (Subtype.INTERNAL, Subtype.SCENARIO),
}


@dataclass(frozen=True)
class CueRecord:
    id: str
    modality: Modality
    subtype: Subtype
    description: str
    score: float
    validated: bool = False

    def __post_init__(self):
        if self.subtype not in _ALLOWED_SUBTYPES[self.modality]:
            raise ValueError(f"{self.modality.value} cue cannot have subtype {self.subtype.value}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"cue score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class StageRecord:
    kind: StageKind
    number: int
    header: str
    text: str = ""
    line: int = 0


@dataclass(frozen=True)
class TraceNote:
    """Something the parser could not fit into the trace model."""

    code: str
    message: str
    line: int


@dataclass(frozen=True)
class CctTrace:
    stages: tuple[StageRecord, ...] = ()
    cues: tuple[CueRecord, ...] = ()
    high_value_cues: tuple[str, ...] = ()
    grounded_regions: tuple[tuple[str, BoundingBox], ...] = ()
    ocr_lines: Optional[tuple[tuple[str, BoundingBox], ...]] = None
    preamble: str = ""
    high_value_explicit: bool = False
    notes: tuple[TraceNote, ...] = ()

    @property
    def stage_kinds(self) -> list[StageKind]:
        return [s.kind for s in self.stages]

    def cue(self, cue_id: str) -> Optional[CueRecord]:
        return next((c for c in self.cues if c.id == cue_id), None)


def _stage_kind(name: str) -> Optional[StageKind]:
    norm = re.sub(r"\s+", " ", name.strip().lower().rstrip(":."))
    norm = re.sub(r"\s*\(implicit\)$", "", norm)
    for kind, aliases in _STAGE_ALIASES.items():
        if norm in aliases:
            return kind
    return None


def _parse_coords(s: str) -> list[float]:
    return [float(v) for v in s.split(",")]


def filter_cues(cues: Sequence[CueRecord], threshold: float = DEFAULT_SCORE_THRESHOLD) -> list[CueRecord]:
    """Cues scoring at least ``threshold`` (inclusive), in their original order."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return [c for c in cues if c.score >= threshold]


def parse_trace(think_text: Optional[str], threshold: float = DEFAULT_SCORE_THRESHOLD) -> CctTrace:
    """Read a think section into a :class:`CctTrace`.

    If stage 4 does not list high-value cues explicitly they are derived
    with :func:`filter_cues` at ``threshold``.
    """
    if not think_text:
        return CctTrace()
    stages: list[dict] = []
    preamble: list[str] = []
    cues: list[CueRecord] = []
    high_value: list[str] = []
    explicit = False
    grounded: list[tuple[str, BoundingBox]] = []
    ocr: list[tuple[str, BoundingBox]] = []
    notes: list[TraceNote] = []

    for lineno, line in enumerate(think_text.splitlines(), start=1):
        m = _HEADER_RE.match(line)
        kind = _stage_kind(m.group(2)) if m else None
        if m and kind is not None:
            stages.append({"kind": kind, "number": int(m.group(1)), "header": line.strip(), "lines": [], "line": lineno})
            continue
        current = stages[-1]["kind"] if stages else None
        consumed = False

        cm = _CUE_RE.match(line)
        if cm:
            try:
                cues.append(
                    CueRecord(
                        id=cm.group("id"),
                        modality=Modality(cm.group("modality").capitalize()),
                        subtype=Subtype(cm.group("subtype").capitalize()),
                        description=cm.group("desc").strip(),
                        score=float(cm.group("score")),
                    )
                )
                consumed = True
            except ValueError as e:
                notes.append(TraceNote("CUE_MALFORMED", f"cue [{cm.group('id')}]: {e}", lineno))
        elif current is StageKind.CROSS_VALIDATION and (hm := _HIGH_VALUE_RE.match(line)):
            ids = [t for t in re.split(r"[,\s]+", hm.group("ids").strip()) if t]
            high_value.extend(i for i in ids if i.lower() != "none")
            explicit = True
            consumed = True
        elif current is StageKind.GROUNDING and (gm := _GROUND_RE.match(line)):
            try:
                grounded.append((gm.group("id"), region_from_values(_parse_coords(gm.group("coords")))))
                consumed = True
            except DegenerateRegion as e:
                notes.append(TraceNote("REGION_MALFORMED", f"grounding for {gm.group('id')}: {e}", lineno))
        elif om := _OCR_RE.match(line):
            try:
                text = json.loads(om.group("text"))
                ocr.append((str(text), region_from_values(_parse_coords(om.group("coords")))))
                consumed = True
            except (ValueError, DegenerateRegion) as e:
                notes.append(TraceNote("OCR_MALFORMED", str(e), lineno))

        if not consumed:
            (stages[-1]["lines"] if stages else preamble).append(line)

    seen: set[str] = set()
    for c in cues:
        if c.id in seen:
            notes.append(TraceNote("CUE_DUPLICATE", f"cue id {c.id} defined more than once", 0))
        seen.add(c.id)
    if not explicit:
        high_value = [c.id for c in filter_cues(cues, threshold)]
    hv = set(high_value)
    cues = [CueRecord(c.id, c.modality, c.subtype, c.description, c.score, c.id in hv) for c in cues]

    return CctTrace(
        stages=tuple(
            StageRecord(s["kind"], s["number"], s["header"], "\n".join(s["lines"]).strip(), s["line"]) for s in stages
        ),
        cues=tuple(cues),
        high_value_cues=tuple(high_value),
        grounded_regions=tuple(grounded),
        ocr_lines=tuple(ocr) if ocr else None,
        preamble="\n".join(preamble).strip(),
        high_value_explicit=explicit,
        notes=tuple(notes),
    )


class Severity(str, enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    message: str
    location: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["severity"] = self.severity.value
        return d


@dataclass(frozen=True)
class ValidationDiagnostics:
    findings: tuple[Finding, ...] = ()

    @property
    def structurally_valid(self) -> bool:
        return not any(f.severity is Severity.ERROR for f in self.findings)

    @property
    def error_codes(self) -> list[str]:
        return [f.code for f in self.findings if f.severity is Severity.ERROR]

    @property
    def warning_codes(self) -> list[str]:
        return [f.code for f in self.findings if f.severity is Severity.WARNING]

    def to_dict(self) -> dict:
        return {
            "structurally_valid": self.structurally_valid,
            "error_codes": self.error_codes,
            "warning_codes": self.warning_codes,
            "findings": [f.to_dict() for f in self.findings],
        }


def _err(code: str, message: str, location: str = "") -> Finding:
    return Finding(Severity.ERROR, code, message, location)


def _warn(code: str, message: str, location: str = "") -> Finding:
    return Finding(Severity.WARNING, code, message, location)


def _check_stages(trace: CctTrace) -> list[Finding]:
    out = []
    kinds = trace.stage_kinds
    for kind in StageKind:
        if kind not in kinds:
            out.append(_err("STAGE_MISSING", f"Stage {kind.value}: {CANONICAL_STAGE_NAMES[kind]} is missing"))
    dupes = sorted({k for k in kinds if kinds.count(k) > 1}, key=lambda k: k.value)
    for kind in dupes:
        out.append(_err("STAGE_DUPLICATE", f"Stage {kind.value}: {CANONICAL_STAGE_NAMES[kind]} appears more than once"))
    order = [k.value for k in kinds]
    if any(a >= b for a, b in zip(order, order[1:])) and not (dupes and order == sorted(order)):
        out.append(_err("STAGE_ORDER", f"stages appear in order {order}; expected ascending 1..6"))
    for s in trace.stages:
        if s.number != s.kind.value:
            out.append(
                _warn("STAGE_NUMBER", f"header {s.header!r} numbers stage {s.number}, name implies {s.kind.value}", f"line {s.line}")
            )
    return out


def validate(trace: CctTrace, report: AnalysisReport) -> ValidationDiagnostics:
    """Structural and evidential consistency between a trace and its report.

    Findings are ordered deterministically: stage checks, cue references,
    verdict/region coupling, then region linkage warnings.
    """
    findings: list[Finding] = _check_stages(trace)

    for note in trace.notes:
        findings.append(_warn(note.code, note.message, f"line {note.line}" if note.line else ""))

    cue_ids = {c.id for c in trace.cues}
    for cid in trace.high_value_cues:
        if cid not in cue_ids:
            findings.append(_err("DANGLING_CUE_REF", f"high-value cue {cid} is not defined in stages 2-3", "stage 4"))
    high_value = set(trace.high_value_cues)
    for cid, box in trace.grounded_regions:
        if cid not in high_value:
            findings.append(
                _err("DANGLING_CUE_REF", f"grounded region {box.to_list()} cites {cid}, which is not a high-value cue", "stage 5")
            )

    if report.verdict is Verdict.FORGED and (not report.regions or not trace.grounded_regions):
        missing = "report" if not report.regions else "trace"
        findings.append(_err("VERDICT_REGION_MISMATCH", f"forged verdict but the {missing} grounds no region"))
    elif report.verdict is Verdict.AUTHENTIC and (report.regions or trace.grounded_regions):
        findings.append(
            _err(
                "VERDICT_REGION_MISMATCH",
                f"authentic verdict but {len(report.regions)} report and {len(trace.grounded_regions)} grounded region(s)",
            )
        )

    grounded_boxes = [box for _, box in trace.grounded_regions]
    for i, box in enumerate(report.regions):
        if not any(iou(box, g) >= LINK_IOU for g in grounded_boxes):
            findings.append(
                _warn("REGION_UNGROUNDED", f"report region {i} {box.to_list()} matches no grounded region at IoU >= {LINK_IOU}", "report")
            )
    grounded_ids = {cid for cid, _ in trace.grounded_regions}
    for cid in trace.high_value_cues:
        if cid in cue_ids and cid not in grounded_ids:
            findings.append(_warn("CUE_UNGROUNDED", f"high-value cue {cid} has no grounded region", "stage 5"))

    return ValidationDiagnostics(tuple(findings))


def render_trace(
    cues: Sequence[CueRecord],
    grounded: Sequence[tuple[str, BoundingBox]],
    high_value: Optional[Sequence[str]] = None,
    ocr: Sequence[tuple[str, BoundingBox]] = (),
    caption: str = "",
    synthesis: str = "",
    stage_order: Sequence[StageKind] = tuple(StageKind),
) -> str:
    """Write a trace in the grammar :func:`parse_trace` reads.

    ``stage_order`` lets test fixtures drop or reorder stages.
    """

    def coords(box: BoundingBox) -> str:
        return "[" + ", ".join(repr(v) for v in box.to_list()) + "]"

    def cue_line(c: CueRecord) -> str:
        return f"- [{c.id}] ({c.modality.value}/{c.subtype.value}, score={c.score!r}) {c.description}"

    if high_value is None:
        high_value = [c.id for c in filter_cues(cues)]
    body = {
        StageKind.KNOWLEDGE_PREPARATION: ([caption] if caption else [])
        + [f"OCR: {coords(b)} {json.dumps(t, ensure_ascii=False)}" for t, b in ocr],
        StageKind.VISUAL_CUES: [cue_line(c) for c in cues if c.modality is Modality.VISUAL],
        StageKind.LOGICAL_CUES: [cue_line(c) for c in cues if c.modality is Modality.LOGICAL],
        StageKind.CROSS_VALIDATION: ["High-value cues: " + (", ".join(high_value) if high_value else "none")],
        StageKind.GROUNDING: [f"- {cid} -> {coords(b)}" for cid, b in grounded],
        StageKind.REPORT_SYNTHESIS: [synthesis] if synthesis else [],
    }
    lines = []
    for kind in stage_order:
        lines.append(f"Stage {kind.value}: {CANONICAL_STAGE_NAMES[kind]}")
        lines.extend(body[kind])
    return "\n".join(lines) + "\n"
