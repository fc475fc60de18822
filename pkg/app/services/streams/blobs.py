"""Isotropic Gaussian blobs with known labels, optionally starving one cluster"""
import logging
from itertools import combinations
from typing import Iterator, Optional

import numpy as np

from app.internal.errors import ConfigurationError
from app.services.streams.points import HighDimPoint

logger = logging.getLogger(__name__)

MAX_PLACEMENT_TRIES = 10000


def blob_means(k: int, separation: float, dim: int, rng: np.random.Generator) -> np.ndarray:
    """k centres with pairwise distance >= separation"""
    if k <= dim:
        # scaled basis vectors are exactly ``separation`` apart
        return np.eye(k, dim) * (separation / np.sqrt(2.0))
    side = separation * k
    means: list[np.ndarray] = []
    for _ in range(MAX_PLACEMENT_TRIES):
        c = rng.uniform(-side, side, size=dim)
        if all(np.linalg.norm(c - m) >= separation for m in means):
            means.append(c)
            if len(means) == k:
                return np.array(means)
    raise ConfigurationError(f"could not place {k} centres {separation} apart in {dim} dimensions")


def blob_stream(
    k: int,
    n_per_cluster: int,
    separation: float,
    dim: int,
    seed: int = 0,
    sigma: float = 1.0,
    starve_cluster: Optional[int] = None,
    starve_after: Optional[int] = None,
) -> Iterator[HighDimPoint]:
    """
    Shuffled points from k Gaussians. With ``starve_cluster`` set, that cluster
    emits nothing from stream position ``starve_after`` on.
    """
    if k < 1:
        raise ConfigurationError(f"cluster count must be >= 1, got {k}")
    if separation <= 0:
        raise ConfigurationError(f"separation must be positive, got {separation}")
    if dim < 1 or n_per_cluster < 0:
        raise ConfigurationError("dim must be >= 1 and n_per_cluster >= 0")
    if starve_cluster is not None and not 0 <= starve_cluster < k:
        raise ConfigurationError(f"starve_cluster {starve_cluster} out of range for {k} clusters")

    rng = np.random.default_rng(seed)
    means = blob_means(k, separation, dim, rng)
    labels = np.repeat(np.arange(k), n_per_cluster)
    rng.shuffle(labels)
    noise = rng.standard_normal((labels.shape[0], dim)) * sigma
    logger.debug(f"blob stream: k={k} n={labels.shape[0]} dim={dim} min centre gap "
                 f"{min((np.linalg.norm(a - b) for a, b in combinations(means, 2)), default=0.0):.3f}")

    next_id = 0
    for pos, (label, z) in enumerate(zip(labels, noise)):
        if starve_cluster is not None and starve_after is not None and pos >= starve_after and label == starve_cluster:
            continue
        yield HighDimPoint(id=next_id, coords=means[label] + z, label=int(label))
        next_id += 1
