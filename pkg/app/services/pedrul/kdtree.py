"""
Balanced k-d tree for exact radius queries in the original space.

Nodes split at the median of the widest-spread axis; leaves hold up to
``leaf_size`` rows. Every node keeps its bounding box for pruning.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from app.internal.errors import ConfigurationError
from app.services.streams.points import HighDimPoint, PointBatch

logger = logging.getLogger(__name__)

DEFAULT_LEAF_SIZE = 16


@dataclass
class KdNode:
    lo: np.ndarray
    hi: np.ndarray
    rows: Optional[np.ndarray] = None
    left: Optional["KdNode"] = None
    right: Optional["KdNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.rows is not None


class KdTree:
    def __init__(self, ids: np.ndarray, coords: np.ndarray, leaf_size: int = DEFAULT_LEAF_SIZE):
        if coords.shape[0] == 0:
            raise ConfigurationError("cannot build a k-d tree from zero points")
        if leaf_size < 1:
            raise ConfigurationError(f"leaf size must be >= 1, got {leaf_size}")
        self.ids = np.asarray(ids, dtype=np.int64)
        self.coords = np.asarray(coords, dtype=float)
        self.leaf_size = leaf_size
        self._row_of = {int(i): r for r, i in enumerate(self.ids)}
        self.root = self._build(np.arange(self.coords.shape[0]))

    def __len__(self) -> int:
        return self.ids.shape[0]

    def _build(self, rows: np.ndarray) -> KdNode:
        pts = self.coords[rows]
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if rows.shape[0] <= self.leaf_size:
            return KdNode(lo=lo, hi=hi, rows=rows)
        axis = int(np.argmax(hi - lo))
        order = np.argsort(pts[:, axis], kind="stable")
        mid = rows.shape[0] // 2
        return KdNode(
            lo=lo,
            hi=hi,
            left=self._build(rows[order[:mid]]),
            right=self._build(rows[order[mid:]]),
        )

    @property
    def height(self) -> int:
        def depth(node: KdNode) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(depth(node.left), depth(node.right))

        return depth(self.root)

    def query_radius(self, point: np.ndarray, radius: float) -> np.ndarray:
        """Rows whose squared distance to ``point`` is <= radius^2"""
        r2 = radius * radius
        found: list[np.ndarray] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            gap = np.maximum(node.lo - point, 0.0) + np.maximum(point - node.hi, 0.0)
            if np.dot(gap, gap) > r2:
                continue
            if node.is_leaf:
                diff = self.coords[node.rows] - point
                found.append(node.rows[np.einsum("ij,ij->i", diff, diff) <= r2])
            else:
                stack.append(node.right)
                stack.append(node.left)
        if not found:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(found))


def build_kdtree(points: Union[PointBatch, list], leaf_size: int = DEFAULT_LEAF_SIZE) -> KdTree:
    if not isinstance(points, PointBatch):
        if not points:
            raise ConfigurationError("cannot build a k-d tree from zero points")
        points = PointBatch.from_points(points)
    tree = KdTree(points.ids, points.coords, leaf_size=leaf_size)
    logger.debug(f"Built k-d tree over {len(tree)} points, height {tree.height}")
    return tree


def radius_neighbors(tree: KdTree, query: Union[HighDimPoint, np.ndarray], radius: float) -> set[int]:
    """Exact ids within ``radius``; a tree member never reports itself"""
    if radius <= 0:
        raise ConfigurationError(f"radius must be positive, got {radius}")
    own_id = None
    if isinstance(query, HighDimPoint):
        own_id = query.id if query.id in tree._row_of else None
        coords = query.coords
    else:
        coords = np.asarray(query, dtype=float).ravel()
    if coords.shape[0] != tree.coords.shape[1]:
        raise ConfigurationError(f"query dimension {coords.shape[0]} does not match tree {tree.coords.shape[1]}")
    hits = {int(i) for i in tree.ids[tree.query_radius(coords, radius)]}
    hits.discard(own_id)
    return hits
