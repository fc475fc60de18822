"""
PEDRUL selection: dense representatives in the original space that do not
fall inside each other's search radius.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from app.internal.errors import ConfigurationError
from app.services.pedrul.kdtree import build_kdtree
from app.services.streams.points import PointBatch

logger = logging.getLogger(__name__)

RADIUS_SAMPLE_SIZE = 1000
RADIUS_MEDIAN_FRACTION = 0.25


@dataclass
class PedrulSelection:
    chosen: list[int]
    neighbor_counts: dict[int, int] = field(default_factory=dict)
    radius: float = 0.0

    def __len__(self) -> int:
        return len(self.chosen)


def estimate_radius(coords: np.ndarray, seed: int = 0, sample_size: int = RADIUS_SAMPLE_SIZE) -> float:
    """A quarter of the median pairwise distance, estimated on a sample"""
    coords = np.atleast_2d(coords)
    if coords.shape[0] < 2:
        raise ConfigurationError("radius estimation needs at least 2 points")
    if coords.shape[0] > sample_size:
        rows = np.random.default_rng(seed).choice(coords.shape[0], size=sample_size, replace=False)
        coords = coords[np.sort(rows)]
    median = float(np.median(pdist(coords)))
    if median <= 0.0:
        raise ConfigurationError("all sampled points coincide; set the radius explicitly")
    radius = RADIUS_MEDIAN_FRACTION * median
    logger.info(f"Estimated PEDRUL radius {radius:.6g} from {coords.shape[0]} points")
    return radius


def select_pedrul(points: PointBatch, radius: float, budget: int) -> PedrulSelection:
    """
    Greedy pass over points sorted by neighbour count (descending, ties by id).
    A candidate is accepted unless it is a radius-neighbour of an accepted point.
    """
    if budget < 1:
        raise ConfigurationError(f"budget must be >= 1, got {budget}")
    if radius <= 0:
        raise ConfigurationError(f"radius must be positive, got {radius}")
    if len(points) == 0:
        return PedrulSelection(chosen=[], radius=radius)

    tree = build_kdtree(points)
    neighborhoods: list[np.ndarray] = []
    counts = np.empty(len(points), dtype=np.int64)
    for r in range(len(points)):
        rows = tree.query_radius(points.coords[r], radius)
        rows = rows[rows != r]
        neighborhoods.append(rows)
        counts[r] = rows.shape[0]

    order = np.lexsort((points.ids, -counts))
    blocked: set[int] = set()
    chosen: list[int] = []
    for r in order:
        if len(chosen) >= budget:
            break
        if int(r) in blocked:
            continue
        chosen.append(int(points.ids[r]))
        blocked.update(int(x) for x in neighborhoods[r])

    neighbor_counts = {int(i): int(c) for i, c in zip(points.ids, counts)}
    logger.debug(f"Selected {len(chosen)} of {len(points)} points as PEDRUL (budget {budget})")
    return PedrulSelection(chosen=chosen, neighbor_counts=neighbor_counts, radius=radius)
