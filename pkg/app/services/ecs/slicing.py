"""
Exponential Cobweb Slicing: record which cobweb sections receive embedded
points, and cut the sections that have gone without hits for longer than the
decay threshold.
"""
import logging
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from app.services.ecs.decay import DecayParams, decay_threshold
from app.services.geometry.cobweb import OUTSIDE, CobwebPartition, cut_ring, cut_wedge
from app.services.geometry.polygon import ConvexPolygon
from app.services.streams.points import as_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CutRecord:
    polygon_id: int
    section_id: int
    t: int
    kind: Literal["wedge", "ring"] = "wedge"


@dataclass
class EcsOutcome:
    surviving: dict[int, ConvexPolygon] = field(default_factory=dict)
    retired: list[int] = field(default_factory=list)
    cuts: list[CutRecord] = field(default_factory=list)


def record_hits(partitions: list[CobwebPartition], embedded, t: int) -> list[CobwebPartition]:
    """Stamp ``t`` on every section that contains at least one embedded point"""
    if embedded is None or len(embedded) == 0:
        return partitions
    pts = as_matrix(embedded).reshape(-1, 2)
    for part in partitions:
        sids = part.locator.locate_many(pts)
        sids = np.unique(sids[sids != OUTSIDE])
        part.last_hit.reshape(-1)[sids] = t
    return partitions


def _slice_partition(part: CobwebPartition, t: int, threshold: float) -> tuple[Optional[ConvexPolygon], list[CutRecord]]:
    starved = (t - part.last_hit) > threshold
    if not starved.any():
        return part.polygon, []

    polygon: Optional[ConvexPolygon] = part.polygon
    cuts: list[CutRecord] = []
    outer = part.rings
    # whole rings go first, from the outside in
    while outer >= 1 and starved[:, outer - 1].all():
        for w in range(part.n_wedges):
            cuts.append(CutRecord(part.polygon_id, part.section_id(w, outer), t, "ring"))
        polygon = cut_ring(polygon, outer, outer)
        outer -= 1
        if polygon is None:
            return None, cuts

    for w in np.flatnonzero(starved[:, outer - 1]):
        polygon = cut_wedge(polygon, part.wedge(int(w), ring=outer))
        cuts.append(CutRecord(part.polygon_id, part.section_id(int(w), outer), t, "wedge"))
        if polygon is None:
            return None, cuts
    return polygon, cuts


def apply_ecs(partitions: list[CobwebPartition], t: int, params: DecayParams = DecayParams()) -> EcsOutcome:
    """
    Cut every section with t - last_hit > N(t). A ring is removed only when all
    its cells starve; otherwise starved cells of the current outermost ring are
    truncated wedge by wedge. Cuts are logged ordered by (polygon id, section id).
    """
    threshold = decay_threshold(t, params)
    outcome = EcsOutcome()
    for part in sorted(partitions, key=lambda p: p.polygon_id):
        polygon, cuts = _slice_partition(part, t, threshold)
        outcome.cuts.extend(sorted(cuts, key=lambda c: c.section_id))
        if polygon is None:
            outcome.retired.append(part.polygon_id)
            logger.info(f"ECS retired polygon {part.polygon_id} at t={t}")
        else:
            outcome.surviving[part.polygon_id] = polygon
    if outcome.cuts:
        logger.info(f"ECS at t={t} (N={threshold:.4f}): {len(outcome.cuts)} cuts, {len(outcome.retired)} retired")
    return outcome
