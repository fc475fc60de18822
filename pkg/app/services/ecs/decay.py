"""Exponential forgetting threshold N(t) = alpha * exp(-t * eta + beta)"""
import math

from pydantic import BaseModel, ConfigDict, Field

from app.internal.errors import ContractViolationError


class DecayParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(0.88, gt=0)
    beta: float = 1.6
    # eta = 0 gives a constant threshold
    eta: float = Field(0.01, ge=0)


def decay_threshold(t: int, params: DecayParams = DecayParams()) -> float:
    if t < 0:
        raise ContractViolationError(f"iteration must be >= 0, got {t}")
    return params.alpha * math.exp(-t * params.eta + params.beta)


def is_starved(t: int, last_hit, params: DecayParams = DecayParams()):
    """Strict test t - last_hit > N(t); works elementwise on arrays"""
    return (t - last_hit) > decay_threshold(t, params)
