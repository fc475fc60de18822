"""Mutable state of one streaming run between projections"""
from dataclasses import dataclass, field
from typing import Optional

from app.services.ecs.slicing import CutRecord
from app.services.pipeline.hulls import TrackedHull
from app.services.streams.points import HighDimPoint
from app.services.tsne.partial import AnchorSet


@dataclass(frozen=True)
class RejectedPoint:
    point_id: int
    reason: str


@dataclass
class EmbeddingState:
    anchors: Optional[AnchorSet] = None
    hulls: list[TrackedHull] = field(default_factory=list)
    t: int = 0
    storage: list[HighDimPoint] = field(default_factory=list)
    dim: Optional[int] = None
    radius: Optional[float] = None
    cut_log: list[CutRecord] = field(default_factory=list)
    rejected: list[RejectedPoint] = field(default_factory=list)
    next_polygon_id: int = 0
    fit_steps: int = 0
    partial_steps: int = 0
    points_seen: int = 0

    @property
    def anchor_count(self) -> int:
        return 0 if self.anchors is None else len(self.anchors)

    @property
    def hull_vertex_count(self) -> int:
        return sum(len(h.polygon) for h in self.hulls)

    def cuts_at(self, t: int) -> list[CutRecord]:
        return [c for c in self.cut_log if c.t == t]
