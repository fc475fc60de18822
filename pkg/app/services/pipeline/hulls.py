"""
Cluster hulls tracked across projections. Each projection re-clusters the
anchors; new hulls are matched to the previous ones by shared anchor ids so
their cobweb sections can keep their hit history.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from app.internal.errors import DegenerateClusterError
from app.services.clustering.dbscan import ClusterLabels
from app.services.geometry.cobweb import OUTSIDE, CobwebPartition, build_cobweb
from app.services.geometry.hull import convex_hull
from app.services.geometry.polygon import ConvexPolygon

logger = logging.getLogger(__name__)


@dataclass
class TrackedHull:
    polygon_id: int
    cluster_id: int
    partition: CobwebPartition
    member_ids: frozenset[int] = field(default_factory=frozenset)
    polygon: Optional[ConvexPolygon] = None

    def __post_init__(self):
        if self.polygon is None:
            self.polygon = self.partition.polygon


def _match(new_members: dict[int, frozenset[int]], previous: list[TrackedHull]) -> dict[int, TrackedHull]:
    """Greedy maximal-overlap pairing of new clusters to previous hulls"""
    pairs = []
    for c, members in new_members.items():
        for old in previous:
            overlap = len(members & old.member_ids)
            if overlap > 0:
                pairs.append((-overlap, old.polygon_id, c, old))
    pairs.sort(key=lambda p: p[:3])
    matched: dict[int, TrackedHull] = {}
    taken: set[int] = set()
    for _, pid, c, old in pairs:
        if c in matched or pid in taken:
            continue
        matched[c] = old
        taken.add(pid)
    return matched


def carry_last_hit(partition: CobwebPartition, previous: TrackedHull, t: int) -> None:
    """
    Each section takes the last hit of the old section holding its centroid;
    sections whose centroid fell outside what survived of the old hull start at t.
    """
    centroids = partition.section_centroids()
    inside = previous.polygon.contains_many(centroids)
    old_ids = previous.partition.locator.locate_many(centroids)
    flat = partition.last_hit.reshape(-1)
    old_flat = previous.partition.last_hit.reshape(-1)
    for s in range(flat.shape[0]):
        flat[s] = old_flat[old_ids[s]] if inside[s] and old_ids[s] != OUTSIDE else t


def build_hulls(
    anchor_ids: np.ndarray,
    low: np.ndarray,
    labels: ClusterLabels,
    rings: int,
    t: int,
    previous: list[TrackedHull],
    next_polygon_id: int,
) -> tuple[list[TrackedHull], int]:
    """One hull per non-degenerate cluster, ordered by polygon id"""
    polygons: dict[int, ConvexPolygon] = {}
    members: dict[int, frozenset[int]] = {}
    for c, rows in labels.groups().items():
        try:
            polygons[c] = convex_hull(low[rows])
        except DegenerateClusterError as e:
            logger.debug(f"cluster {c} has no hull: {e.detail}")
            continue
        members[c] = frozenset(int(i) for i in anchor_ids[rows])

    matched = _match(members, previous)
    hulls: list[TrackedHull] = []
    for c in sorted(polygons):
        old = matched.get(c)
        if old is None:
            pid = next_polygon_id
            next_polygon_id += 1
        else:
            pid = old.polygon_id
        partition = build_cobweb(polygons[c], m=rings, t=t, polygon_id=pid)
        if old is not None:
            carry_last_hit(partition, old, t)
        hulls.append(TrackedHull(polygon_id=pid, cluster_id=c, partition=partition, member_ids=members[c]))

    hulls.sort(key=lambda h: h.polygon_id)
    logger.debug(f"{len(hulls)} hulls ({len(matched)} carried over) from {labels.n_clusters} clusters")
    return hulls, next_polygon_id
