"""
Synthetic drifting stream: three 3-D Gaussian structures whose means move and
whose covariances contract and dilate on a tick schedule. The default preset
sends two structures towards each other so their trajectories cross, while
the third only changes scale.
"""
import logging
from typing import Iterator, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.internal.errors import ConfigurationError
from app.services.streams.points import HighDimPoint

logger = logging.getLogger(__name__)

DEFAULT_TOTAL = 30000
DEFAULT_TICK_EVERY = 100
DEFAULT_SPEED = 0.05
DEFAULT_SCALE_RATE = 1.002
DEFAULT_SCALE_PERIOD = 20


class DriftStructureSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: tuple[float, float, float]
    covariance: tuple[tuple[float, float, float], ...]
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    scale_rate: float = Field(1.0, gt=0)
    # ticks per contraction/dilation half-cycle; 0 keeps scaling in one direction
    scale_period: int = Field(0, ge=0)
    points_per_structure: int = Field(10000, ge=0)
    tick_every: int = Field(DEFAULT_TICK_EVERY, ge=1)

    @field_validator("covariance")
    @classmethod
    def _square(cls, v):
        if len(v) != 3 or any(len(row) != 3 for row in v):
            raise ValueError("covariance must be 3x3")
        return v

    def cholesky(self) -> np.ndarray:
        cov = np.asarray(self.covariance, dtype=float)
        if not np.allclose(cov, cov.T):
            raise ConfigurationError("covariance must be symmetric")
        try:
            return np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as e:
            raise ConfigurationError(f"covariance is not positive definite: {e}") from e

    def scale_exponent(self, tick: int) -> int:
        if self.scale_period == 0:
            return tick
        phase = tick % (2 * self.scale_period)
        return phase if phase <= self.scale_period else 2 * self.scale_period - phase

    def mean_at(self, tick: int) -> np.ndarray:
        return np.asarray(self.mean, dtype=float) + tick * np.asarray(self.velocity, dtype=float)

    def covariance_at(self, tick: int) -> np.ndarray:
        return np.asarray(self.covariance, dtype=float) * self.scale_rate ** self.scale_exponent(tick)


def default_drift_specs(total: int = DEFAULT_TOTAL, tick_every: int = DEFAULT_TICK_EVERY) -> list[DriftStructureSpec]:
    """Two crossing, scaling structures plus one stationary scaling structure"""
    per = total // 3
    cov = ((0.5, 0.0, 0.0), (0.0, 0.5, 0.0), (0.0, 0.0, 0.5))
    common = dict(
        covariance=cov,
        scale_rate=DEFAULT_SCALE_RATE,
        scale_period=DEFAULT_SCALE_PERIOD,
        points_per_structure=per,
        tick_every=tick_every,
    )
    return [
        DriftStructureSpec(mean=(-4.0, 0.0, 0.0), velocity=(DEFAULT_SPEED, 0.0, 0.0), **common),
        DriftStructureSpec(mean=(4.0, 0.0, 0.0), velocity=(-DEFAULT_SPEED, 0.0, 0.0), **common),
        DriftStructureSpec(mean=(0.0, 4.0, 0.0), **common),
    ]


def synthetic_drift_stream(
    specs: Optional[Sequence[DriftStructureSpec]] = None,
    seed: int = 0,
) -> Iterator[HighDimPoint]:
    """
    Round-robin over the structures; a structure's tick advances every
    ``tick_every`` of its own points. Labels are structure indices.
    """
    specs = list(specs) if specs is not None else default_drift_specs()
    if len(specs) != 3:
        raise ConfigurationError(f"drift stream needs exactly 3 structures, got {len(specs)}")
    chols = [s.cholesky() for s in specs]
    rng = np.random.default_rng(seed)
    emitted = [0, 0, 0]
    rounds = max(s.points_per_structure for s in specs)
    logger.info(f"Synthetic drift stream: {sum(s.points_per_structure for s in specs)} points, seed {seed}")

    next_id = 0
    for _ in range(rounds):
        for k, spec in enumerate(specs):
            if emitted[k] >= spec.points_per_structure:
                continue
            tick = emitted[k] // spec.tick_every
            scale = np.sqrt(spec.scale_rate ** spec.scale_exponent(tick))
            z = rng.standard_normal(3)
            coords = spec.mean_at(tick) + scale * (chols[k] @ z)
            yield HighDimPoint(id=next_id, coords=coords, label=k)
            emitted[k] += 1
            next_id += 1
