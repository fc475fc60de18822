"""Between-batch snapshots of the projection and their JSON files"""
import logging
from pathlib import Path
from typing import Literal, Union

from pydantic import BaseModel, ConfigDict, field_validator

logger = logging.getLogger(__name__)


class AnchorRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    x: float
    y: float


class HullRecord(BaseModel):
    """Closed counter-clockwise vertex loop: the last vertex repeats the first"""

    model_config = ConfigDict(frozen=True)

    polygon_id: int
    cluster_id: int
    vertices: tuple[tuple[float, float], ...]

    @field_validator("vertices")
    @classmethod
    def _closed(cls, v):
        if len(v) < 4 or v[0] != v[-1]:
            raise ValueError("hull loop must list at least 3 vertices and end on its first vertex")
        return v


class CutEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    polygon_id: int
    section_id: int
    t: int
    kind: Literal["wedge", "ring"] = "wedge"


class ProjectionSnapshot(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: int = 0
    config_hash: str = ""
    anchors: tuple[AnchorRecord, ...] = ()
    hulls: tuple[HullRecord, ...] = ()
    cuts: tuple[CutEntry, ...] = ()

    @property
    def file_name(self) -> str:
        return f"snapshot_{self.t}.json"


def write_snapshot(snapshot: ProjectionSnapshot, out_dir: Union[str, Path]) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / snapshot.file_name
    path.write_text(snapshot.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug(f"Wrote snapshot t={snapshot.t} to {path}")
    return path


def read_snapshot(path: Union[str, Path]) -> ProjectionSnapshot:
    return ProjectionSnapshot.model_validate_json(Path(path).read_text(encoding="utf-8"))


class RunSummary(BaseModel):
    """End-of-run totals written next to the metrics file"""

    mode: Literal["stream", "baseline"] = "stream"
    config_hash: str
    projections: int
    points_seen: int
    anchors: int = 0
    hulls: int = 0
    hull_vertices: int = 0
    cuts_total: int = 0
    fit_steps: int = 0
    partial_steps: int = 0
    rejected_ids: list[int] = []


def write_summary(summary: RunSummary, out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / "summary.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path
