import argparse
import logging
from pathlib import Path

from ..dependencies import CommandRouter, build_settings, open_stream
from ..services.pipeline.baseline import BaselineTsne
from ..services.pipeline.snapshot import RunSummary, write_summary

router = CommandRouter("baseline", help="refit t-SNE on the whole history every batch (small datasets only)")
logger = logging.getLogger(__name__)


@router.command
def baseline(args: argparse.Namespace) -> int:
    settings = build_settings(args)
    out_dir = Path(args.out)
    logger.info(f"====== batch t-SNE baseline, config {settings.config_hash()} ======")

    runner = BaselineTsne(settings)
    collector = runner.run(open_stream(args, settings))
    collector.write_csv(out_dir / "metrics.csv")
    write_summary(
        RunSummary(
            mode="baseline",
            config_hash=settings.config_hash(),
            projections=runner.t,
            points_seen=len(runner.seen),
            anchors=len(runner.seen),
            fit_steps=runner.fit_steps,
        ),
        out_dir,
    )
    return 0
