"""Density-based grouping of embedded points, one group per future hull"""
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import DBSCAN

from app.internal.errors import ConfigurationError
from app.services.streams.points import as_matrix

logger = logging.getLogger(__name__)

NOISE = -1


@dataclass(frozen=True)
class ClusterLabels:
    """labels[i] is a cluster id (contiguous from 0) or NOISE"""

    labels: np.ndarray

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size and self.labels.max() >= 0 else 0

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster_id)

    def groups(self) -> dict[int, np.ndarray]:
        return {c: self.members(c) for c in range(self.n_clusters)}


def cluster_embedding(Y, eps: float = 2.0, min_pts: int = 8) -> ClusterLabels:
    """
    DBSCAN with the point itself counted towards ``min_pts``. Cluster ids are
    assigned in order of the first core point found scanning the input.
    """
    if eps <= 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ConfigurationError(f"min_pts must be >= 1, got {min_pts}")
    Y = as_matrix(Y)
    if Y.shape[0] == 0 or Y.size == 0:
        return ClusterLabels(labels=np.empty(0, dtype=np.int64))

    db = DBSCAN(eps=eps, min_samples=min_pts, metric="euclidean", algorithm="brute").fit(Y)
    raw = db.labels_.astype(np.int64)

    # relabel by first appearance so ids follow scan order
    labels = np.full_like(raw, NOISE)
    mapping: dict[int, int] = {}
    for i, c in enumerate(raw):
        if c == NOISE:
            continue
        if c not in mapping:
            mapping[c] = len(mapping)
        labels[i] = mapping[c]

    result = ClusterLabels(labels=labels)
    logger.debug(f"DBSCAN eps={eps} min_pts={min_pts}: {result.n_clusters} clusters, "
                 f"{int(np.sum(labels == NOISE))} noise of {len(labels)}")
    return result
