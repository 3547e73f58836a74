"""Domain types shared by the parser, validator, reward engine and metrics.

All geometry is continuous pixel coordinates with the origin at the top-left.
Invalid boxes are rejected at construction and never auto-corrected.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import DegenerateRegion


class Verdict(str, enum.Enum):
    AUTHENTIC = "authentic"
    FORGED = "forged"

    @classmethod
    def from_label(cls, label: str) -> "Verdict":
        try:
            return cls(label.strip().lower())
        except ValueError:
            raise ValueError(f"label must be 'authentic' or 'forged', got {label!r}") from None


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box ``[x0, y0, x1, y1]`` with strictly positive area."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        coords = (self.x0, self.y0, self.x1, self.y1)
        try:
            coords = tuple(float(c) for c in coords)
        except (TypeError, ValueError):
            raise DegenerateRegion(f"non-numeric box coordinates {list((self.x0, self.y0, self.x1, self.y1))}") from None
        if not all(math.isfinite(c) for c in coords):
            raise DegenerateRegion(f"non-finite box coordinates {list(coords)}")
        if min(coords) < 0:
            raise DegenerateRegion(f"negative box coordinates {list(coords)}")
        x0, y0, x1, y1 = coords
        if not (x0 < x1 and y0 < y1):
            raise DegenerateRegion(f"box {list(coords)} has no positive area")
        for name, value in zip(("x0", "y0", "x1", "y1"), coords):
            object.__setattr__(self, name, value)

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "BoundingBox":
        if len(values) != 4:
            raise DegenerateRegion(f"expected 4 box coordinates, got {len(values)}")
        return cls(*values)

    def to_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> "Quad":
        """Clockwise corner expansion starting top-left."""
        return Quad((self.x0, self.y0, self.x1, self.y0, self.x1, self.y1, self.x0, self.y1))

    def clip(self, width: float, height: float) -> Optional["BoundingBox"]:
        """Intersect with the image frame; ``None`` when nothing of the box remains."""
        x0, y0 = min(self.x0, width), min(self.y0, height)
        x1, y1 = min(self.x1, width), min(self.y1, height)
        if x0 >= x1 or y0 >= y1:
            return None
        if (x0, y0, x1, y1) == (self.x0, self.y0, self.x1, self.y1):
            return self
        return BoundingBox(x0, y0, x1, y1)

    def within(self, width: float, height: float) -> bool:
        return self.x1 <= width and self.y1 <= height


@dataclass(frozen=True)
class Quad:
    """Four corner points, interleaved as ``(x1, y1, x2, y2, x3, y3, x4, y4)``."""

    coords: tuple[float, ...]

    def __post_init__(self):
        if len(self.coords) != 8:
            raise DegenerateRegion(f"expected 8 quad coordinates, got {len(self.coords)}")
        try:
            coords = tuple(float(c) for c in self.coords)
        except (TypeError, ValueError):
            raise DegenerateRegion(f"non-numeric quad coordinates {list(self.coords)}") from None
        object.__setattr__(self, "coords", coords)

    @property
    def xs(self) -> tuple[float, ...]:
        return self.coords[0::2]

    @property
    def ys(self) -> tuple[float, ...]:
        return self.coords[1::2]


def normalize_quad(q: Quad | Sequence[float]) -> BoundingBox:
    """Axis-aligned hull of a quad. Rotation is discarded."""
    if not isinstance(q, Quad):
        q = Quad(tuple(q))
    return BoundingBox(min(q.xs), min(q.ys), max(q.xs), max(q.ys))


def region_from_values(values: Sequence[float]) -> BoundingBox:
    """4 values are read as an AABB, 8 as a quad; anything else is rejected."""
    if len(values) == 4:
        return BoundingBox.from_list(values)
    if len(values) == 8:
        return normalize_quad(values)
    raise DegenerateRegion(f"region needs 4 (box) or 8 (quad) coordinates, got {len(values)}")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = min(a.x1, b.x1) - max(a.x0, b.x0)
    iy = min(a.y1, b.y1) - max(a.y0, b.y0)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    if a == b:
        return 1.0
    union = a.area + b.area - inter
    return min(1.0, inter / union)


AUTHENTIC_TEXT = "AUTHENTIC"
FORGED_TEXT = "HIGH INDICATION OF FORGERY"


@dataclass(frozen=True)
class AnalysisReport:
    """A parsed model report.

    ``tag_presence`` records which structural tags the surrounding output
    carried; it is provenance, not content, so it does not take part in
    equality. Authentic reports with regions are representable on purpose:
    the validator flags them instead of the constructor hiding them.
    """

    verdict: Verdict
    regions: tuple[BoundingBox, ...] = ()
    rationale: str = ""
    verdict_text: str = ""
    tag_presence: frozenset[str] = field(default=frozenset(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not self.verdict_text:
            default = FORGED_TEXT if self.verdict is Verdict.FORGED else AUTHENTIC_TEXT
            object.__setattr__(self, "verdict_text", default)


@dataclass(frozen=True)
class GroundTruthRecord:
    sample_id: str
    image_width: float
    image_height: float
    label: Verdict
    gt_regions: tuple[BoundingBox, ...] = ()
    gt_rationale: str = ""
    external_bertscore_f1: Optional[float] = None
    cct_annotation: Optional[dict] = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "gt_regions", tuple(self.gt_regions))
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.label is Verdict.AUTHENTIC and self.gt_regions:
            raise ValueError("authentic records cannot carry ground-truth regions")
        if self.label is Verdict.FORGED and not self.gt_regions:
            raise ValueError("forged records need at least one ground-truth region")
        for box in self.gt_regions:
            if not box.within(self.image_width, self.image_height):
                raise ValueError(f"region {box.to_list()} leaves the {self.image_width}x{self.image_height} frame")
        if self.external_bertscore_f1 is not None and not 0.0 <= self.external_bertscore_f1 <= 1.0:
            raise ValueError("external_bertscore_f1 must lie in [0, 1]")


def clip_regions(boxes: Iterable[BoundingBox], width: float, height: float) -> tuple[list[BoundingBox], int]:
    """Clip predicted boxes to the frame. Returns the surviving boxes and how many were altered or dropped."""
    kept, touched = [], 0
    for box in boxes:
        clipped = box.clip(width, height)
        if clipped is not box:
            touched += 1
        if clipped is not None:
            kept.append(clipped)
    return kept, touched
