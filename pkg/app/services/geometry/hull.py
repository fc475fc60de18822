"""Andrew's monotone chain convex hull"""
import numpy as np

from app.internal.errors import DegenerateClusterError
from app.services.geometry.polygon import ConvexPolygon, cross2


def _half_chain(points: np.ndarray) -> list[np.ndarray]:
    chain: list[np.ndarray] = []
    for p in points:
        while len(chain) >= 2 and cross2(chain[-1] - chain[-2], p - chain[-2]) <= 0.0:
            chain.pop()
        chain.append(p)
    return chain


def convex_hull(points) -> ConvexPolygon:
    """
    Counter-clockwise hull starting at the lexicographically smallest point.
    Collinear points on edges are dropped.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if pts.shape[0] < 3:
        raise DegenerateClusterError(f"hull needs 3 distinct points, got {pts.shape[0]}")
    lower = _half_chain(pts)
    upper = _half_chain(pts[::-1])
    ring = np.array(lower[:-1] + upper[:-1])
    if ring.shape[0] < 3:
        raise DegenerateClusterError("all points are collinear")
    hull = ConvexPolygon.from_vertices(ring)
    if hull is None:
        raise DegenerateClusterError("points are collinear within tolerance")
    return hull
