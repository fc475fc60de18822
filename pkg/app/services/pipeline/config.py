import hashlib
import logging
from typing import Literal, Optional, Union

from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from app.internal.errors import ConfigurationError
from app.services.ecs.decay import DecayParams
from app.services.tsne.core import TsneParams
from app.services.tsne.partial import PartialParams

logger = logging.getLogger(__name__)


class RunSettings(BaseSettings):
    """Every knob of a streaming run; STSNE_* environment variables override the defaults"""

    batch_size: int = Field(400, ge=4)
    pedrul_budget: int = Field(400, ge=1)
    radius: Union[float, Literal["auto"]] = "auto"
    perplexity: float = Field(30.0, gt=0)
    partial_perplexity: float = Field(5.0, gt=0)  # 新點對錨點的 perplexity
    early_exaggeration_iters: int = Field(250, ge=0)
    optimization_iters: int = Field(400, ge=0)
    partial_iters: int = Field(100, ge=0)
    exaggeration_factor: float = Field(12.0, gt=0)
    learning_rate: float = Field(200.0, gt=0)
    momentum_early: float = Field(0.5, ge=0, lt=1)
    momentum_late: float = Field(0.8, ge=0, lt=1)
    alpha: float = Field(0.88, gt=0)
    beta: float = 1.6
    eta: float = Field(0.01, ge=0)
    rings: int = Field(3, ge=1)
    cluster_eps: float = Field(2.0, gt=0)
    cluster_min_pts: int = Field(8, ge=1)
    slice_fraction: float = Field(0.2, gt=0, le=1)
    total: Optional[int] = Field(None, ge=1)
    seed: int = 0
    snapshot_every: int = Field(1, ge=1)

    ecs_enabled: bool = True  # 關閉時只記錄命中，不切割也不修剪
    retain_all: bool = False  # 保留所有投影點，不做 PEDRUL 篩選
    record_timings: bool = True
    baseline_cap: int = Field(20000, ge=1)

    class Config:
        env_file = ".env"
        env_prefix = "STSNE_"
        extra = "ignore"

    @field_validator("radius")
    @classmethod
    def _positive_radius(cls, v):
        if v != "auto" and v <= 0:
            raise ValueError("radius must be positive or 'auto'")
        return v

    @model_validator(mode="after")
    def _opening_slice_fits(self):
        if self.total is not None and self.slice_fraction * self.total < self.batch_size:
            raise ValueError(
                f"opening slice {self.slice_fraction} x {self.total} is smaller than the batch size {self.batch_size}"
            )
        return self

    @property
    def opening_size(self) -> int:
        """Points consumed by the opening full projection"""
        if self.total is None:
            return self.batch_size
        return max(self.batch_size, int(round(self.slice_fraction * self.total)))

    @property
    def fixed_radius(self) -> Optional[float]:
        return None if self.radius == "auto" else float(self.radius)

    def tsne_params(self, perplexity: Optional[float] = None) -> TsneParams:
        return TsneParams(
            perplexity=self.perplexity if perplexity is None else perplexity,
            early_exaggeration_iters=self.early_exaggeration_iters,
            optimization_iters=self.optimization_iters,
            exaggeration_factor=self.exaggeration_factor,
            learning_rate=self.learning_rate,
            momentum_early=self.momentum_early,
            momentum_late=self.momentum_late,
            seed=self.seed,
        )

    def partial_params(self) -> PartialParams:
        return PartialParams(iters=self.partial_iters, learning_rate=self.learning_rate)

    def decay_params(self) -> DecayParams:
        return DecayParams(alpha=self.alpha, beta=self.beta, eta=self.eta)

    def config_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()[:16]


def get_run_settings(**overrides) -> RunSettings:
    """Build settings from defaults, .env and explicit overrides (overrides win)"""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    try:
        return RunSettings(**overrides)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'settings'}: {err['msg']}" for err in e.errors())
        raise ConfigurationError(f"invalid run configuration: {problems}") from e
