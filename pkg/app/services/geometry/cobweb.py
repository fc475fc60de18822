"""
Cobweb partition of a convex hull: a fan of wedges from the centroid to each
pair of consecutive vertices, crossed by ``m`` concentric rings scaled about
the centroid at k/m. Sections are numbered wedge-major, innermost ring first:
section_id = wedge * m + (ring - 1), rings counted from 1.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from app.internal.errors import ConfigurationError, ContractViolationError
from app.services.geometry.polygon import EPS, ConvexPolygon, clip_halfplane, cross2, scale_about

logger = logging.getLogger(__name__)

OUTSIDE = -1
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Wedge:
    """Angular sector apex -> start -> end; cuts happen along its chord at ``inner_scale``"""

    index: int
    apex: np.ndarray
    start: np.ndarray
    end: np.ndarray
    inner_scale: float = 0.0

    @property
    def chord(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            self.apex + self.inner_scale * (self.start - self.apex),
            self.apex + self.inner_scale * (self.end - self.apex),
        )

    @property
    def outward_normal(self) -> np.ndarray:
        e = self.end - self.start
        return np.array([e[1], -e[0]])


class PointLocator:
    """
    O(log n) section lookup: binary search on the spoke angles, then a radial
    test against the wedge's hull edge.
    """

    def __init__(self, centroid: np.ndarray, vertices: np.ndarray, rings: int):
        self.centroid = centroid
        self.vertices = vertices
        self.rings = rings
        spokes = vertices - centroid
        angles = np.arctan2(spokes[:, 1], spokes[:, 0])
        self._theta0 = angles[0]
        self._phi = np.mod(angles - angles[0], TWO_PI)
        self._phi[0] = 0.0
        self._edges = np.roll(vertices, -1, axis=0) - vertices
        self._heights = cross2(self._edges, centroid - vertices)

    def locate_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if pts.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        d = pts - self.centroid
        phi = np.mod(np.arctan2(d[:, 1], d[:, 0]) - self._theta0, TWO_PI)
        wedge = np.searchsorted(self._phi, phi, side="left") - 1
        wedge = np.maximum(wedge, 0)
        wedge[np.all(d == 0.0, axis=1)] = 0

        f = cross2(self._edges[wedge], pts - self.vertices[wedge])
        s = 1.0 - f / self._heights[wedge]
        ring = np.clip(np.ceil(s * self.rings).astype(np.int64) - 1, 0, self.rings - 1)
        ids = wedge * self.rings + ring
        ids[s > 1.0 + EPS] = OUTSIDE
        return ids.astype(np.int64)

    def locate(self, point) -> Optional[int]:
        sid = int(self.locate_many(np.asarray(point, dtype=float))[0])
        return None if sid == OUTSIDE else sid


@dataclass
class CobwebPartition:
    polygon: ConvexPolygon
    rings: int
    last_hit: np.ndarray
    polygon_id: int = 0
    centroid: np.ndarray = field(init=False)
    locator: PointLocator = field(init=False, repr=False)

    def __post_init__(self):
        if self.rings < 1:
            raise ConfigurationError(f"ring count must be >= 1, got {self.rings}")
        self.centroid = self.polygon.centroid
        self.last_hit = np.asarray(self.last_hit, dtype=np.int64).reshape(len(self.polygon), self.rings)
        self.locator = PointLocator(self.centroid, self.polygon.vertices, self.rings)

    @property
    def n_wedges(self) -> int:
        return len(self.polygon)

    @property
    def n_sections(self) -> int:
        return self.n_wedges * self.rings

    def section_id(self, wedge: int, ring: int) -> int:
        return wedge * self.rings + (ring - 1)

    def section_of(self, section_id: int) -> tuple[int, int]:
        return section_id // self.rings, section_id % self.rings + 1

    def wedge(self, index: int, ring: Optional[int] = None) -> Wedge:
        """Wedge whose chord is the inner boundary of ``ring`` (outermost by default)"""
        ring = self.rings if ring is None else ring
        v = self.polygon.vertices
        return Wedge(
            index=index,
            apex=self.centroid,
            start=v[index],
            end=v[(index + 1) % len(v)],
            inner_scale=(ring - 1) / self.rings,
        )

    @property
    def wedges(self) -> list[Wedge]:
        return [self.wedge(i) for i in range(self.n_wedges)]

    def section_vertices(self, section_id: int) -> np.ndarray:
        w, ring = self.section_of(section_id)
        c = self.centroid
        v = self.polygon.vertices
        a, b = v[w] - c, v[(w + 1) % len(v)] - c
        outer = ring / self.rings
        inner = (ring - 1) / self.rings
        if ring == 1:
            return np.array([c, c + outer * a, c + outer * b])
        return np.array([c + inner * a, c + outer * a, c + outer * b, c + inner * b])

    def section_area(self, section_id: int) -> float:
        w, ring = self.section_of(section_id)
        v = self.polygon.vertices
        tri = 0.5 * float(cross2(v[w] - self.centroid, v[(w + 1) % len(v)] - self.centroid))
        return tri * (ring * ring - (ring - 1) * (ring - 1)) / (self.rings * self.rings)

    def section_centroids(self) -> np.ndarray:
        return np.array([self.section_vertices(s).mean(axis=0) for s in range(self.n_sections)])


def build_cobweb(polygon: ConvexPolygon, m: int = 3, t: int = 0, polygon_id: int = 0) -> CobwebPartition:
    last_hit = np.full((len(polygon), max(m, 1)), t, dtype=np.int64)
    return CobwebPartition(polygon=polygon, rings=m, last_hit=last_hit, polygon_id=polygon_id)


def locate(partition: CobwebPartition, point) -> Optional[int]:
    return partition.locator.locate(point)


def cut_wedge(polygon: ConvexPolygon, wedge: Wedge) -> Optional[ConvexPolygon]:
    """
    Truncate the polygon along the wedge's chord line: vertices strictly beyond
    it are deleted and the two boundary crossings inserted. None when retired.
    """
    origin, _ = wedge.chord
    return clip_halfplane(polygon, origin, wedge.outward_normal)


def cut_ring(polygon: ConvexPolygon, ring_index: int, m: int) -> Optional[ConvexPolygon]:
    """Remove the outermost ring (index m of m): scale by (m - 1)/m about the centroid"""
    if ring_index != m:
        raise ContractViolationError(f"only the outermost ring ({m}) can be cut, got ring {ring_index}")
    if m <= 1:
        return None
    return scale_about(polygon, polygon.centroid, (m - 1) / m)
