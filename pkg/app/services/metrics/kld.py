"""KL divergence of the current projection over a bounded evaluation set"""
import logging
from typing import Optional

import numpy as np

from app.services.tsne.core import effective_perplexity, joint_affinities, kl_divergence, low_dim_affinities
from app.services.tsne.partial import AnchorSet

logger = logging.getLogger(__name__)

MIN_EVAL_POINTS = 4


def streaming_kld(
    anchors: AnchorSet,
    batch_high: Optional[np.ndarray] = None,
    batch_low: Optional[np.ndarray] = None,
    perplexity: float = 30.0,
) -> Optional[float]:
    """
    KL(P || Q) over anchors plus the current batch. None (not 0) when fewer
    than four points are available.
    """
    high, low = anchors.high, anchors.low
    if batch_high is not None and len(batch_high):
        high = np.vstack([high, batch_high]) if len(anchors) else np.asarray(batch_high, dtype=float)
        low = np.vstack([low, batch_low]) if len(anchors) else np.asarray(batch_low, dtype=float)
    n = high.shape[0]
    if n < MIN_EVAL_POINTS:
        logger.debug(f"KLD skipped: {n} evaluation points")
        return None
    P = joint_affinities(high, effective_perplexity(perplexity, n))
    return kl_divergence(P, low_dim_affinities(low))
