"""
Batch t-SNE baseline: every time B new points have arrived, refit the whole
history from scratch. Retained state grows with the stream, which is what the
streaming pipeline is compared against.
"""
import logging
import time
from typing import Iterable, Optional

import numpy as np

from app.internal.errors import BaselineCapExceededError
from app.services.metrics.collector import IterationMetrics, MetricsCollector
from app.services.pipeline.config import RunSettings
from app.services.streams.points import HighDimPoint
from app.services.tsne.core import effective_perplexity, fit

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4


class BaselineTsne:
    def __init__(self, settings: RunSettings):
        self.settings = settings
        if settings.total is not None and settings.total > settings.baseline_cap:
            raise BaselineCapExceededError(
                f"baseline refits the full history; {settings.total} points exceeds the cap of {settings.baseline_cap}"
            )
        self.seen: list[np.ndarray] = []
        self.pending = 0
        self.t = 0
        self.fit_steps = 0
        self.dim: Optional[int] = None
        self.metrics = MetricsCollector()
        self.coords: Optional[np.ndarray] = None

    def ingest(self, point: HighDimPoint) -> Optional[IterationMetrics]:
        if self.dim is None:
            self.dim = point.dim
        elif point.dim != self.dim:
            logger.warning(f"Rejected point {point.id}: dimension {point.dim} != {self.dim}")
            return None
        if len(self.seen) >= self.settings.baseline_cap:
            raise BaselineCapExceededError(f"stream passed the baseline cap of {self.settings.baseline_cap} points")
        self.seen.append(point.coords)
        self.pending += 1
        if self.pending >= self.settings.batch_size:
            return self.reproject()
        return None

    def reproject(self) -> Optional[IterationMetrics]:
        self.pending = 0
        n = len(self.seen)
        if n < MIN_FIT_POINTS:
            logger.warning(f"Baseline cannot fit {n} points")
            return None
        s = self.settings
        start = time.perf_counter()
        embedding = fit(np.vstack(self.seen), s.tsne_params(perplexity=effective_perplexity(s.perplexity, n)))
        elapsed = (time.perf_counter() - start) * 1000.0 if s.record_timings else 0.0
        self.coords = embedding.coords
        self.fit_steps += embedding.steps
        self.t += 1
        metrics = IterationMetrics(t=self.t, kld=embedding.final_kl, embed_ms=elapsed, anchors=n)
        self.metrics.record(metrics)
        logger.info(f"Baseline reprojection {self.t}: {n} points, KLD {embedding.final_kl:.6f}")
        return metrics

    def run(self, stream: Iterable[HighDimPoint]) -> MetricsCollector:
        for point in stream:
            self.ingest(point)
        if self.pending:
            self.reproject()
        logger.info(f"Baseline finished: {self.t} reprojections, {self.fit_steps} optimisation steps")
        return self.metrics
