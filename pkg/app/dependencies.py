"""
Shared wiring for the command routers: the flag set every command accepts,
settings construction from parsed flags, and stream selection.
"""
import argparse
import logging
from typing import Callable, Iterator, Optional, Union

from app.internal.errors import ConfigurationError
from app.services.pipeline.config import RunSettings, get_run_settings
from app.services.streams.blobs import blob_stream
from app.services.streams.files import count_rows, file_stream
from app.services.streams.points import HighDimPoint
from app.services.streams.synthetic import default_drift_specs, synthetic_drift_stream

logger = logging.getLogger(__name__)

DEFAULT_DRIFT_TOTAL = 30000
DEFAULT_BLOB_TOTAL = 2000

Handler = Callable[[argparse.Namespace], int]


class CommandRouter:
    """A named sub-command: its handler plus the flags it adds on top of the shared ones"""

    def __init__(self, name: str, help: str = ""):
        self.name = name
        self.help = help
        self.handler: Optional[Handler] = None
        self._extra: list[tuple[tuple, dict]] = []

    def argument(self, *flags, **kwargs) -> "CommandRouter":
        self._extra.append((flags, kwargs))
        return self

    def command(self, fn: Handler) -> Handler:
        self.handler = fn
        return fn

    def attach(self, subparsers) -> argparse.ArgumentParser:
        parser = subparsers.add_parser(self.name, help=self.help, description=self.help)
        add_stream_arguments(parser)
        for flags, kwargs in self._extra:
            parser.add_argument(*flags, **kwargs)
        parser.set_defaults(handler=self.handler)
        return parser


def parse_radius(value: str) -> Union[float, str]:
    if value == "auto":
        return value
    try:
        radius = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"radius must be a positive number or 'auto', got {value!r}")
    if radius <= 0:
        raise argparse.ArgumentTypeError(f"radius must be positive, got {value}")
    return radius


def parse_fit_iters(value: str) -> tuple[int, int]:
    """'E,O' -> (early exaggeration steps, optimisation steps)"""
    try:
        early, optimization = (int(v) for v in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected E,O (two integers), got {value!r}")
    if early < 0 or optimization < 0:
        raise argparse.ArgumentTypeError("iteration counts must be >= 0")
    return early, optimization


def add_stream_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", metavar="PATH", help="CSV file, one point per line")
    source.add_argument("--synthetic-drift", action="store_true", help="three drifting 3-D Gaussian structures")
    source.add_argument("--blobs", type=int, metavar="K", help="K isotropic Gaussian blobs")

    parser.add_argument("--total", type=int, metavar="N", help="expected stream length")
    parser.add_argument("--batch-size", type=int, metavar="B")
    parser.add_argument("--pedrul", type=int, metavar="D", dest="pedrul_budget", help="anchor budget")
    parser.add_argument("--radius", type=parse_radius, metavar="R|auto")
    parser.add_argument("--perplexity", type=float, metavar="P")
    parser.add_argument("--partial-perplexity", type=float, metavar="P", help="perplexity of batch-to-anchor affinities")
    parser.add_argument("--fit-iters", type=parse_fit_iters, metavar="E,O")
    parser.add_argument("--partial-iters", type=int, metavar="N")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--eta", type=float)
    parser.add_argument("--rings", type=int, metavar="M")
    parser.add_argument("--cluster-eps", type=float)
    parser.add_argument("--cluster-minpts", type=int, dest="cluster_min_pts")
    parser.add_argument("--slice", type=float, metavar="F", dest="slice_fraction")
    parser.add_argument("--seed", type=int, metavar="S")
    parser.add_argument("--out", metavar="DIR", default="results")
    parser.add_argument("--snapshot-every", type=int, metavar="K")

    parser.add_argument("--labels", action="store_true", help="last CSV column is an integer label")
    parser.add_argument("--no-ecs", action="store_true", help="record hits but never cut or prune")
    parser.add_argument("--retain-all", action="store_true", help="keep every projected point as an anchor")
    parser.add_argument("--no-timings", action="store_true", help="write 0.0 phase times for byte-identical output")
    parser.add_argument("--blob-dim", type=int, default=50)
    parser.add_argument("--blob-separation", type=float, default=50.0)
    parser.add_argument("--cap", type=int, dest="baseline_cap", help="largest stream the baseline accepts")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def resolve_total(args: argparse.Namespace) -> Optional[int]:
    if args.total is not None:
        return args.total
    if args.input:
        total = count_rows(args.input)
        logger.info(f"Counted {total} rows in {args.input}")
        return total
    if args.synthetic_drift:
        return DEFAULT_DRIFT_TOTAL
    return DEFAULT_BLOB_TOTAL


def build_settings(args: argparse.Namespace) -> RunSettings:
    """CLI flags override environment/.env values, which override defaults"""
    early, optimization = args.fit_iters if args.fit_iters else (None, None)
    return get_run_settings(
        batch_size=args.batch_size,
        pedrul_budget=args.pedrul_budget,
        radius=args.radius,
        perplexity=args.perplexity,
        partial_perplexity=args.partial_perplexity,
        early_exaggeration_iters=early,
        optimization_iters=optimization,
        partial_iters=args.partial_iters,
        alpha=args.alpha,
        beta=args.beta,
        eta=args.eta,
        rings=args.rings,
        cluster_eps=args.cluster_eps,
        cluster_min_pts=args.cluster_min_pts,
        slice_fraction=args.slice_fraction,
        total=resolve_total(args),
        seed=args.seed,
        snapshot_every=args.snapshot_every,
        ecs_enabled=False if args.no_ecs else None,
        retain_all=True if args.retain_all else None,
        record_timings=False if args.no_timings else None,
        baseline_cap=args.baseline_cap,
    )


def open_stream(args: argparse.Namespace, settings: RunSettings) -> Iterator[HighDimPoint]:
    if args.input:
        return file_stream(args.input, labels=args.labels)
    if args.synthetic_drift:
        return synthetic_drift_stream(default_drift_specs(total=settings.total), seed=settings.seed)
    if args.blobs < 1:
        raise ConfigurationError(f"--blobs needs at least 1 cluster, got {args.blobs}")
    return blob_stream(
        k=args.blobs,
        n_per_cluster=settings.total // args.blobs,
        separation=args.blob_separation,
        dim=args.blob_dim,
        seed=settings.seed,
    )
