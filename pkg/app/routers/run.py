import argparse
import logging
from pathlib import Path

from ..dependencies import CommandRouter, build_settings, open_stream
from ..services.metrics.collector import IterationMetrics
from ..services.pipeline.snapshot import RunSummary, write_snapshot, write_summary
from ..services.pipeline.stream_tsne import StreamTsne

router = CommandRouter("run", help="stream the data through S+t-SNE and write metrics and snapshots")
logger = logging.getLogger(__name__)


@router.command
def run(args: argparse.Namespace) -> int:
    settings = build_settings(args)
    out_dir = Path(args.out)
    snapshot_dir = out_dir / "snapshots"
    logger.info(f"====== S+t-SNE run, config {settings.config_hash()} ======")
    logger.info(f"Batch {settings.batch_size}, PEDRUL budget {settings.pedrul_budget}, opening {settings.opening_size}")

    def on_projection(projector: StreamTsne, metrics: IterationMetrics) -> None:
        if metrics.t % settings.snapshot_every == 0:
            write_snapshot(projector.snapshot(), snapshot_dir)

    projector = StreamTsne(settings, on_projection=on_projection)
    collector = projector.run(open_stream(args, settings))
    collector.write_csv(out_dir / "metrics.csv")

    state = projector.state
    write_summary(
        RunSummary(
            mode="stream",
            config_hash=settings.config_hash(),
            projections=state.t,
            points_seen=state.points_seen,
            anchors=state.anchor_count,
            hulls=len(state.hulls),
            hull_vertices=state.hull_vertex_count,
            cuts_total=len(state.cut_log),
            fit_steps=state.fit_steps,
            partial_steps=state.partial_steps,
            rejected_ids=[r.point_id for r in state.rejected],
        ),
        out_dir,
    )
    logger.info(f"Results written to {out_dir}")
    return 0
