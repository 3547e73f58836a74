"""Raw model output -> tagged sections -> :class:`AnalysisReport`, and back.

The output grammar is ``<think> ... </think><report> {json} </report>``.
Tag detection is plain substring membership, so a malformed output still
gets partial format credit. The report payload is a JSON object::

    {"verdict": "HIGH INDICATION OF FORGERY",
     "regions": [[x0, y0, x1, y1], [x1, y1, x2, y2, x3, y3, x4, y4]],
     "rationale": "..."}
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import DegenerateRegion, ReportSyntax, UnknownVerdict
from .model import AnalysisReport, Verdict, region_from_values

logger = logging.getLogger(__name__)

THINK_OPEN, THINK_CLOSE = "<think>", "</think>"
REPORT_OPEN, REPORT_CLOSE = "<report>", "</report>"
TAGS: tuple[str, ...] = (THINK_OPEN, THINK_CLOSE, REPORT_OPEN, REPORT_CLOSE)


@dataclass(frozen=True)
class TagPresence:
    think_open: bool = False
    think_close: bool = False
    report_open: bool = False
    report_close: bool = False

    @classmethod
    def of(cls, raw: str) -> "TagPresence":
        return cls(*(tag in raw for tag in TAGS))

    def as_set(self) -> frozenset[str]:
        return frozenset(tag for tag, on in zip(TAGS, self.flags()) if on)

    def flags(self) -> tuple[bool, bool, bool, bool]:
        return (self.think_open, self.think_close, self.report_open, self.report_close)

    @property
    def count(self) -> int:
        return sum(self.flags())


@dataclass(frozen=True)
class RawSections:
    think_text: Optional[str]
    report_text: Optional[str]
    tag_presence: TagPresence
    notes: tuple[str, ...] = field(default=())


def _first_span(raw: str, open_tag: str, close_tag: str) -> Optional[str]:
    start = raw.find(open_tag)
    if start < 0:
        return None
    start += len(open_tag)
    end = raw.find(close_tag, start)
    if end < 0:
        return None
    return raw[start:end]


def extract_sections(raw: str) -> RawSections:
    """Split a raw output into think/report spans. Never raises."""
    notes = []
    if raw.count(REPORT_OPEN) > 1:
        notes.append("multiple <report> blocks; the first complete one is used")
        logger.debug("multiple report blocks in output")
    return RawSections(
        think_text=_first_span(raw, THINK_OPEN, THINK_CLOSE),
        report_text=_first_span(raw, REPORT_OPEN, REPORT_CLOSE),
        tag_presence=TagPresence.of(raw),
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class VerdictKeywords:
    """Keyword table for mapping free-text classifications to a verdict."""

    forged: tuple[str, ...] = ("forgery", "forged", "tampered", "manipulated")
    authentic: tuple[str, ...] = ("authentic", "genuine", "pristine", "no indication")


DEFAULT_KEYWORDS = VerdictKeywords()


def _keyword_hits(text: str, keywords: tuple[str, ...]) -> list[str]:
    return [k for k in keywords if re.search(r"(?<!\w)" + re.escape(k.lower()) + r"(?!\w)", text)]


def classify_verdict_text(s: str, keywords: VerdictKeywords = DEFAULT_KEYWORDS) -> Verdict:
    """Case-insensitive keyword match; the longest matching keyword decides.

    "NO INDICATION OF FORGERY" matches both tables, and the longer
    "no indication" wins over "forgery".
    """
    text = s.lower()
    forged = _keyword_hits(text, keywords.forged)
    authentic = _keyword_hits(text, keywords.authentic)
    if not forged and not authentic:
        raise UnknownVerdict(f"no verdict keyword in {s!r}")
    best_forged = max(map(len, forged), default=0)
    best_authentic = max(map(len, authentic), default=0)
    if best_forged == best_authentic:
        raise UnknownVerdict(f"ambiguous verdict text {s!r}")
    return Verdict.FORGED if best_forged > best_authentic else Verdict.AUTHENTIC


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _key_offset(text: str, key: str) -> int:
    pos = text.find(f'"{key}"')
    return _byte_offset(text, max(pos, 0))


def parse_report(report_text: str, keywords: VerdictKeywords = DEFAULT_KEYWORDS) -> AnalysisReport:
    """Parse the JSON payload of a report section.

    Accepts either the bare JSON span between the report tags or a full
    tagged output (as produced by :func:`serialize_report`). Raises
    ReportSyntax, UnknownVerdict or DegenerateRegion, each carrying a byte
    offset into ``report_text``.
    """
    text = report_text
    base = 0
    if not report_text.lstrip().startswith("{"):
        start = report_text.find(REPORT_OPEN)
        inner = _first_span(report_text, REPORT_OPEN, REPORT_CLOSE)
        if inner is not None:
            base = _byte_offset(report_text, start + len(REPORT_OPEN))
            text = inner
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ReportSyntax(f"report is not valid JSON: {e.msg}", base + _byte_offset(text, e.pos)) from None
    if not isinstance(payload, dict):
        raise ReportSyntax("report JSON must be an object", base)

    verdict_text = payload.get("verdict")
    if not isinstance(verdict_text, str) or not verdict_text.strip():
        raise ReportSyntax("report needs a non-empty string 'verdict'", base + _key_offset(text, "verdict"))
    try:
        verdict = classify_verdict_text(verdict_text, keywords)
    except UnknownVerdict as e:
        raise UnknownVerdict(str(e), base + _key_offset(text, "verdict")) from None

    raw_regions = payload.get("regions", [])
    if not isinstance(raw_regions, list):
        raise ReportSyntax("'regions' must be an array", base + _key_offset(text, "regions"))
    regions = []
    for i, values in enumerate(raw_regions):
        if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
        ):
            raise ReportSyntax(f"region {i} must be an array of numbers", base + _key_offset(text, "regions"))
        try:
            regions.append(region_from_values(values))
        except DegenerateRegion as e:
            raise DegenerateRegion(f"region {i}: {e}", base + _key_offset(text, "regions")) from None

    rationale = payload.get("rationale", "")
    if not isinstance(rationale, str):
        raise ReportSyntax("'rationale' must be a string", base + _key_offset(text, "rationale"))
    return AnalysisReport(verdict=verdict, regions=tuple(regions), rationale=rationale, verdict_text=verdict_text)


def serialize_report(r: AnalysisReport, think_text: str = "") -> str:
    """Canonical tagged output for ``r``: a think block followed by the report block.

    Keys are emitted in a fixed order and ``<`` is escaped inside the JSON so
    rationale text can never close a tag early. ``think_text`` must not
    itself contain structural tags. ``parse_report`` inverts this.
    """
    payload = {
        "verdict": r.verdict_text,
        "regions": [box.to_list() for box in r.regions],
        "rationale": r.rationale,
    }
    body = json.dumps(payload, ensure_ascii=False).replace("<", "\\u003c")
    return f"{THINK_OPEN}{think_text}{THINK_CLOSE}{REPORT_OPEN}{body}{REPORT_CLOSE}"


def parse_output(raw: str, keywords: VerdictKeywords = DEFAULT_KEYWORDS) -> tuple[RawSections, AnalysisReport]:
    """Sections plus the parsed report, with ``tag_presence`` filled in.

    Propagates the parse errors of :func:`parse_report`; a missing report
    section raises ReportSyntax.
    """
    sections = extract_sections(raw)
    if sections.report_text is None:
        raise ReportSyntax("no complete <report> section")
    report = parse_report(sections.report_text, keywords)
    return sections, AnalysisReport(
        verdict=report.verdict,
        regions=report.regions,
        rationale=report.rationale,
        verdict_text=report.verdict_text,
        tag_presence=sections.tag_presence.as_set(),
    )
