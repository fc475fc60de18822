"""Per-iteration measurements and their CSV export"""
import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

from app.internal.errors import ConfigurationError, ContractViolationError

logger = logging.getLogger(__name__)

CSV_FIELDS = ["t", "kld", "embed_ms", "pedrul_ms", "hull_ms", "ecs_ms", "anchors", "hull_vertices", "cuts"]


@dataclass(frozen=True)
class IterationMetrics:
    t: int
    kld: Optional[float] = None
    embed_ms: float = 0.0
    pedrul_ms: float = 0.0
    hull_ms: float = 0.0
    ecs_ms: float = 0.0
    anchors: int = 0
    hull_vertices: int = 0
    cuts: int = 0

    def __post_init__(self):
        if min(self.embed_ms, self.pedrul_ms, self.hull_ms, self.ecs_ms) < 0:
            raise ConfigurationError(f"negative phase time at t={self.t}")
        if min(self.anchors, self.hull_vertices, self.cuts) < 0:
            raise ConfigurationError(f"negative count at t={self.t}")
        if self.kld is not None and self.kld < 0:
            raise ConfigurationError(f"negative KLD at t={self.t}")

    @property
    def retained(self) -> int:
        return self.anchors + self.hull_vertices

    def to_row(self) -> dict[str, str]:
        row = {k: v for k, v in asdict(self).items()}
        row["kld"] = "" if self.kld is None else repr(float(self.kld))
        for key in ("embed_ms", "pedrul_ms", "hull_ms", "ecs_ms"):
            row[key] = f"{row[key]:.3f}"
        return {k: str(row[k]) for k in CSV_FIELDS}


@dataclass
class MetricsCollector:
    series: list[IterationMetrics] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.series)

    def record(self, metrics: IterationMetrics) -> "MetricsCollector":
        if self.series and metrics.t <= self.series[-1].t:
            raise ContractViolationError(
                f"iteration {metrics.t} recorded after {self.series[-1].t}; t must strictly increase"
            )
        self.series.append(metrics)
        return self

    def klds(self) -> list[Optional[float]]:
        return [m.kld for m in self.series]

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=CSV_FIELDS, lineterminator="\n")
            writer.writeheader()
            for m in self.series:
                writer.writerow(m.to_row())
        logger.info(f"Wrote {len(self.series)} metric rows to {path}")
        return path


def record_iteration(collector: MetricsCollector, metrics: IterationMetrics) -> MetricsCollector:
    return collector.record(metrics)
