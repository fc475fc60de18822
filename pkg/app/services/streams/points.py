"""
Point types flowing through the stream: single high-dimensional points, their
2-D projections, and the stacked batches the numeric code works on.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from app.internal.errors import ConfigurationError


@dataclass(frozen=True)
class HighDimPoint:
    id: int
    coords: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).ravel()
        if not np.all(np.isfinite(coords)):
            raise ConfigurationError(f"point {self.id} has non-finite coordinates")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class LowDimPoint:
    source_id: int
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).ravel()
        if coords.shape != (2,) or not np.all(np.isfinite(coords)):
            raise ConfigurationError(f"low-dimensional point {self.source_id} must be 2 finite values")
        object.__setattr__(self, "coords", coords)


@dataclass
class PointBatch:
    """Row-aligned ids, coordinates and optional labels"""

    ids: np.ndarray
    coords: np.ndarray
    labels: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64).ravel()
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if self.coords.shape[0] != self.ids.shape[0]:
            raise ConfigurationError(
                f"batch has {self.ids.shape[0]} ids but {self.coords.shape[0]} rows"
            )
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).ravel()

    @classmethod
    def from_points(cls, points: Sequence[HighDimPoint]) -> "PointBatch":
        if not points:
            raise ConfigurationError("cannot build a batch from zero points")
        dims = {p.dim for p in points}
        if len(dims) != 1:
            raise ConfigurationError(f"points have mixed dimensions: {sorted(dims)}")
        labels = None
        if all(p.label is not None for p in points):
            labels = np.array([p.label for p in points], dtype=np.int64)
        return cls(
            ids=np.array([p.id for p in points], dtype=np.int64),
            coords=np.vstack([p.coords for p in points]),
            labels=labels,
        )

    def __len__(self) -> int:
        return self.ids.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


def as_matrix(points) -> np.ndarray:
    """Accept a sequence of points, a PointBatch or an array; return an (n, D) float array"""
    if isinstance(points, PointBatch):
        return points.coords
    if isinstance(points, np.ndarray):
        return np.atleast_2d(points.astype(float, copy=False))
    points = list(points)
    if points and isinstance(points[0], (HighDimPoint, LowDimPoint)):
        dims = {p.coords.shape[0] for p in points}
        if len(dims) != 1:
            raise ConfigurationError(f"points have mixed dimensions: {sorted(dims)}")
        return np.vstack([p.coords for p in points])
    try:
        return np.atleast_2d(np.asarray(points, dtype=float))
    except ValueError as e:
        raise ConfigurationError(f"points do not share one dimension: {e}") from e
