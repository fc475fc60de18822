"""
Streaming projection loop: buffer incoming points, and whenever the buffer
reaches its trigger size embed it (full t-SNE the first time, partial embedding
against the anchors afterwards), refresh the PEDRUL anchors, rebuild the
cluster hulls, slice starved cobweb sections and prune anchors left outside.
"""
import logging
import time
from typing import Callable, Iterable, Optional

import numpy as np

from app.internal.errors import ConfigurationError
from app.services.clustering.dbscan import NOISE, cluster_embedding
from app.services.ecs.slicing import apply_ecs, record_hits
from app.services.metrics.collector import IterationMetrics, MetricsCollector
from app.services.metrics.kld import streaming_kld
from app.services.pedrul.selection import estimate_radius, select_pedrul
from app.services.pipeline.config import RunSettings
from app.services.pipeline.hulls import build_hulls
from app.services.pipeline.snapshot import AnchorRecord, CutEntry, HullRecord, ProjectionSnapshot
from app.services.pipeline.state import EmbeddingState, RejectedPoint
from app.services.streams.points import HighDimPoint, PointBatch
from app.services.tsne.core import effective_perplexity, fit
from app.services.tsne.partial import AnchorSet, cross_affinities, init_positions, optimize_partial

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4

ProjectionHook = Callable[["StreamTsne", IterationMetrics], None]


def _closed_loop(vertices: np.ndarray) -> tuple[tuple[float, float], ...]:
    return tuple((float(x), float(y)) for x, y in np.vstack([vertices, vertices[:1]]))


class _PhaseTimer:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self._start = 0.0

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self._start) * 1000.0 if self.enabled else 0.0
        return False


class StreamTsne:
    def __init__(self, settings: RunSettings, on_projection: Optional[ProjectionHook] = None):
        self.settings = settings
        self.state = EmbeddingState(radius=settings.fixed_radius)
        self.metrics = MetricsCollector()
        self.on_projection = on_projection
        self._config_hash = settings.config_hash()

    @property
    def trigger_size(self) -> int:
        return self.settings.opening_size if self.state.t == 0 else self.settings.batch_size

    def ingest(self, point: HighDimPoint) -> Optional[IterationMetrics]:
        """Buffer one point; returns the iteration metrics when a projection fired"""
        state = self.state
        state.points_seen += 1
        if state.dim is None:
            state.dim = point.dim
        elif point.dim != state.dim:
            reason = f"dimension {point.dim} does not match stream dimension {state.dim}"
            logger.warning(f"Rejected point {point.id}: {reason}")
            state.rejected.append(RejectedPoint(point_id=point.id, reason=reason))
            return None
        state.storage.append(point)
        if len(state.storage) >= self.trigger_size:
            return self.project_batch()
        return None

    def flush(self) -> Optional[IterationMetrics]:
        """Project whatever is left in storage at the end of a finite stream"""
        if not self.state.storage:
            return None
        logger.info(f"Flushing final partial batch of {len(self.state.storage)} points")
        return self.project_batch()

    def run(self, stream: Iterable[HighDimPoint]) -> MetricsCollector:
        for point in stream:
            self.ingest(point)
        self.flush()
        logger.info(
            f"Run finished: {self.state.t} projections, {self.state.points_seen} points, "
            f"{len(self.state.rejected)} rejected, steps fit={self.state.fit_steps} partial={self.state.partial_steps}"
        )
        return self.metrics

    def _embed(self, batch: PointBatch) -> tuple[Optional[np.ndarray], Optional[float]]:
        state, s = self.state, self.settings
        anchors = state.anchors
        if anchors is None or len(anchors) == 0:
            if len(batch) < MIN_FIT_POINTS:
                return None, None
            params = s.tsne_params(perplexity=effective_perplexity(s.perplexity, len(batch)))
            embedding = fit(batch.coords, params)
            state.fit_steps += embedding.steps
            return embedding.coords, embedding.final_kl

        cross = cross_affinities(batch.coords, anchors, s.partial_perplexity)
        partial = optimize_partial(init_positions(cross, anchors), anchors, cross, s.partial_params())
        state.partial_steps += partial.steps
        kld = streaming_kld(anchors, batch.coords, partial.coords, s.perplexity)
        return partial.coords, kld

    def _refresh_anchors(self, batch: PointBatch, low: np.ndarray) -> tuple[AnchorSet, np.ndarray]:
        """
        Returns the full projection (old anchors plus the batch) and the rows
        of it that PEDRUL keeps as anchors.
        """
        state, s = self.state, self.settings
        old = state.anchors if state.anchors is not None else AnchorSet.empty(batch.dim)
        projection = AnchorSet(
            ids=np.concatenate([old.ids, batch.ids]),
            high=np.vstack([old.high, batch.coords]) if len(old) else batch.coords,
            low=np.vstack([old.low, low]),
        )
        if s.retain_all:
            return projection, np.arange(len(projection))
        if state.radius is None:
            state.radius = estimate_radius(projection.high, seed=s.seed)
        selection = select_pedrul(PointBatch(ids=projection.ids, coords=projection.high), state.radius, s.pedrul_budget)
        chosen = set(selection.chosen)
        rows = np.array([r for r, i in enumerate(projection.ids) if int(i) in chosen], dtype=np.int64)
        return projection, rows

    def project_batch(self) -> Optional[IterationMetrics]:
        state, s = self.state, self.settings
        if not state.storage:
            raise ConfigurationError("project_batch called with an empty buffer")
        batch = PointBatch.from_points(state.storage)
        state.storage = []
        logger.info(f"Projection {state.t + 1}: {len(batch)} points, {state.anchor_count} anchors")

        with _PhaseTimer(s.record_timings) as embed_timer:
            low, kld = self._embed(batch)
        if low is None:
            logger.warning(f"Cannot embed {len(batch)} points without anchors; batch dropped")
            return None

        with _PhaseTimer(s.record_timings) as pedrul_timer:
            projection, rows = self._refresh_anchors(batch, low)
            anchors = projection.take(rows)

        # clustering and hulls cover the whole projection: old anchors plus the batch
        with _PhaseTimer(s.record_timings) as hull_timer:
            labels = cluster_embedding(projection.low, s.cluster_eps, s.cluster_min_pts)
            hulls, state.next_polygon_id = build_hulls(
                projection.ids, projection.low, labels, s.rings, state.t + 1, state.hulls, state.next_polygon_id
            )
        state.t += 1

        cuts = []
        with _PhaseTimer(s.record_timings) as ecs_timer:
            record_hits([h.partition for h in hulls], low, state.t)
            if s.ecs_enabled:
                outcome = apply_ecs([h.partition for h in hulls], state.t, s.decay_params())
                cuts = outcome.cuts
                state.cut_log.extend(cuts)
                for h in hulls:
                    h.polygon = outcome.surviving.get(h.polygon_id)
                hull_of = {h.cluster_id: h for h in hulls}
                anchors = self._prune(anchors, labels.labels[rows], hull_of)
                hulls = [h for h in hulls if h.polygon is not None]

        # batch ids never recur; hull matching runs on anchor ids
        kept = frozenset(int(i) for i in anchors.ids)
        for h in hulls:
            h.member_ids = h.member_ids & kept
        state.anchors = anchors
        state.hulls = hulls
        metrics = IterationMetrics(
            t=state.t,
            kld=kld,
            embed_ms=embed_timer.ms,
            pedrul_ms=pedrul_timer.ms,
            hull_ms=hull_timer.ms,
            ecs_ms=ecs_timer.ms,
            anchors=state.anchor_count,
            hull_vertices=state.hull_vertex_count,
            cuts=len(cuts),
        )
        self.metrics.record(metrics)
        logger.info(
            f"Projection {state.t} done: KLD {kld if kld is None else round(kld, 6)}, "
            f"{metrics.anchors} anchors, {len(hulls)} hulls, {metrics.cuts} cuts"
        )
        if self.on_projection is not None:
            self.on_projection(self, metrics)
        return metrics

    @staticmethod
    def _prune(anchors: AnchorSet, labels: np.ndarray, hull_of: dict) -> AnchorSet:
        """Drop anchors outside what is left of their own cluster's hull"""
        keep = np.ones(len(anchors), dtype=bool)
        for c, hull in hull_of.items():
            rows = np.flatnonzero(labels == c)
            if c == NOISE or rows.size == 0:
                continue
            if hull.polygon is None:
                keep[rows] = False
            else:
                keep[rows] = hull.polygon.contains_many(anchors.low[rows])
        dropped = int((~keep).sum())
        if dropped:
            logger.info(f"Pruned {dropped} anchors outside surviving hulls")
        return anchors.take(np.flatnonzero(keep))

    def snapshot(self) -> ProjectionSnapshot:
        state = self.state
        anchors = ()
        if state.anchors is not None:
            anchors = tuple(
                AnchorRecord(id=int(i), x=float(p[0]), y=float(p[1])) for i, p in zip(state.anchors.ids, state.anchors.low)
            )
        hulls = tuple(
            HullRecord(
                polygon_id=h.polygon_id,
                cluster_id=h.cluster_id,
                vertices=_closed_loop(h.polygon.vertices),
            )
            for h in state.hulls
        )
        cuts = tuple(
            CutEntry(polygon_id=c.polygon_id, section_id=c.section_id, t=c.t, kind=c.kind)
            for c in state.cuts_at(state.t)
        )
        return ProjectionSnapshot(t=state.t, config_hash=self._config_hash, anchors=anchors, hulls=hulls, cuts=cuts)
