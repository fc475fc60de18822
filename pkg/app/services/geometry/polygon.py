"""
Strictly convex polygons in the plane and the convexity-preserving operations
on them (half-plane clipping, scaling about a point).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.internal.errors import ContractViolationError

EPS = 1e-9


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def shoelace_area(vertices: np.ndarray) -> float:
    """Signed area, positive for counter-clockwise order"""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clean_vertices(vertices: np.ndarray, eps: float = EPS) -> Optional[np.ndarray]:
    """Drop repeated and collinear vertices; None when fewer than 3 survive"""
    v = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if v.shape[0] < 3:
        return None
    scale = max(float(np.ptp(v, axis=0).max()), 1.0)
    changed = True
    while changed and v.shape[0] >= 3:
        changed = False
        prev = np.roll(v, 1, axis=0)
        nxt = np.roll(v, -1, axis=0)
        turn = cross2(v - prev, nxt - v)
        same = np.linalg.norm(v - prev, axis=1) <= eps * scale
        drop = same | (turn <= eps * scale * scale)
        if drop.any():
            # one vertex per pass keeps neighbouring tests valid
            v = np.delete(v, int(np.argmax(drop)), axis=0)
            changed = True
    if v.shape[0] < 3:
        return None
    return v


@dataclass(frozen=True)
class ConvexPolygon:
    """Counter-clockwise vertices, every turn strictly left"""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if v.shape[0] < 3:
            raise ContractViolationError(f"polygon needs at least 3 vertices, got {v.shape[0]}")
        turn = cross2(v - np.roll(v, 1, axis=0), np.roll(v, -1, axis=0) - v)
        if np.any(turn <= 0.0):
            raise ContractViolationError("polygon is not strictly convex and counter-clockwise")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def from_vertices(cls, vertices: np.ndarray) -> Optional["ConvexPolygon"]:
        cleaned = clean_vertices(vertices)
        if cleaned is None:
            return None
        if shoelace_area(cleaned) < 0:
            cleaned = cleaned[::-1]
        return cls(cleaned)

    def __len__(self) -> int:
        return self.vertices.shape[0]

    @property
    def area(self) -> float:
        return shoelace_area(self.vertices)

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        w = cross2(v, nxt)
        a = w.sum() / 2.0
        return ((v + nxt) * w[:, None]).sum(axis=0) / (6.0 * a)

    def contains_many(self, points: np.ndarray, tol: float = EPS) -> np.ndarray:
        """True for points inside or within ``tol`` (relative) of the boundary"""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        v = self.vertices
        edges = np.roll(v, -1, axis=0) - v
        scale = max(float(np.ptp(v, axis=0).max()), 1.0)
        side = cross2(edges[None, :, :], pts[:, None, :] - v[None, :, :])
        return np.all(side >= -tol * scale * np.linalg.norm(edges, axis=1)[None, :], axis=1)

    def contains(self, point, tol: float = EPS) -> bool:
        return bool(self.contains_many(np.asarray(point, dtype=float), tol=tol)[0])


def clip_halfplane(polygon: ConvexPolygon, origin: np.ndarray, normal: np.ndarray) -> Optional[ConvexPolygon]:
    """Keep the part with (x - origin) . normal <= 0; None if nothing of area remains"""
    v = polygon.vertices
    s = (v - origin) @ normal
    out: list[np.ndarray] = []
    k = v.shape[0]
    for i in range(k):
        a, b = v[i], v[(i + 1) % k]
        sa, sb = s[i], s[(i + 1) % k]
        if sa <= 0.0:
            out.append(a)
        if (sa < 0.0 < sb) or (sb < 0.0 < sa):
            out.append(a + (b - a) * (sa / (sa - sb)))
    if len(out) < 3:
        return None
    return ConvexPolygon.from_vertices(np.array(out))


def scale_about(polygon: ConvexPolygon, center: np.ndarray, factor: float) -> Optional[ConvexPolygon]:
    if factor <= 0.0:
        return None
    return ConvexPolygon.from_vertices(center + factor * (polygon.vertices - center))
