"""
Partial embedding: place a new batch into an existing embedding using only
new-to-anchor conditional probabilities. Anchors never move.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist

from app.internal.errors import ConfigurationError, DegenerateRowError, DivergenceError, EmbeddingStateError
from app.services.streams.points import as_matrix
from app.services.tsne.core import Q_FLOOR, calibrate_row

logger = logging.getLogger(__name__)

MAX_BACKTRACK = 10


class PartialParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    iters: int = Field(100, ge=0)
    learning_rate: float = Field(200.0, gt=0)


@dataclass
class AnchorSet:
    """Retained representatives: ids, original coordinates and fixed 2-D positions"""

    ids: np.ndarray
    high: np.ndarray
    low: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64).ravel()
        self.high = np.atleast_2d(np.asarray(self.high, dtype=float))
        self.low = np.asarray(self.low, dtype=float).reshape(-1, 2)
        if not (self.ids.shape[0] == self.high.shape[0] == self.low.shape[0]):
            raise ConfigurationError(
                f"anchor arrays misaligned: {self.ids.shape[0]} ids, "
                f"{self.high.shape[0]} high rows, {self.low.shape[0]} low rows"
            )

    def __len__(self) -> int:
        return self.ids.shape[0]

    @classmethod
    def empty(cls, dim: int) -> "AnchorSet":
        return cls(ids=np.empty(0, dtype=np.int64), high=np.empty((0, dim)), low=np.empty((0, 2)))

    def take(self, rows: np.ndarray) -> "AnchorSet":
        return AnchorSet(ids=self.ids[rows], high=self.high[rows], low=self.low[rows])


@dataclass
class PartialEmbedding:
    coords: np.ndarray
    objective_history: list[float] = field(default_factory=list)
    steps: int = 0


def cross_affinities(batch, anchors: AnchorSet, perplexity: float) -> np.ndarray:
    """Row-stochastic (B x A) matrix of p_{k|i} from batch point i to anchor k"""
    if len(anchors) == 0:
        raise EmbeddingStateError("anchor set is empty; run a full fit before partial embedding")
    X = as_matrix(batch)
    if X.shape[1] != anchors.high.shape[1]:
        raise ConfigurationError(
            f"batch dimension {X.shape[1]} does not match anchors {anchors.high.shape[1]}"
        )
    limit = max(1.0, float(len(anchors) - 1))
    if perplexity > limit:
        logger.warning(f"Perplexity {perplexity} exceeds {len(anchors)} anchors, clamping to {limit}")
        perplexity = limit
    d = cdist(X, anchors.high, "sqeuclidean")
    cross = np.empty_like(d)
    for i in range(d.shape[0]):
        try:
            _, cross[i] = calibrate_row(d[i], perplexity)
        except DegenerateRowError as e:
            logger.warning(f"Batch row {i}: {e.detail}")
            cross[i] = e.fallback[1]
    return cross


def init_positions(cross: np.ndarray, anchors: AnchorSet) -> np.ndarray:
    if cross.shape[1] != len(anchors):
        raise ConfigurationError(f"cross matrix has {cross.shape[1]} columns for {len(anchors)} anchors")
    return cross @ anchors.low


def _partial_terms(Y: np.ndarray, anchors_low: np.ndarray, P: np.ndarray):
    num = 1.0 / (1.0 + cdist(Y, anchors_low, "sqeuclidean"))
    Q = num / num.sum()
    nz = P > 0.0
    objective = float(np.sum(P[nz] * np.log(P[nz] / np.maximum(Q[nz], Q_FLOOR))))
    return num, Q, objective


def optimize_partial(
    init: np.ndarray,
    anchors: AnchorSet,
    cross: np.ndarray,
    params: PartialParams,
) -> PartialEmbedding:
    """
    Plain gradient descent on KL(P || Q) over new-anchor pairs only, with
    P = cross / B and Q the Student-t kernel normalised over the same pairs.
    """
    Y = np.array(init, dtype=float).reshape(-1, 2)
    if cross.shape != (Y.shape[0], len(anchors)):
        raise ConfigurationError(f"cross matrix {cross.shape} does not match {Y.shape[0]} x {len(anchors)}")
    if Y.shape[0] == 0 or params.iters == 0:
        return PartialEmbedding(coords=Y, steps=0)
    P = cross / Y.shape[0]
    A = anchors.low
    num, Q, objective = _partial_terms(Y, A, P)
    history = [objective]

    for it in range(params.iters):
        W = (P - Q) * num
        grad = 2.0 * (W.sum(axis=1)[:, None] * Y - W @ A)
        if not np.all(np.isfinite(grad)):
            raise DivergenceError("partial embedding gradient is non-finite", iteration=it)
        step = params.learning_rate
        # backtrack so the objective never increases
        for _ in range(MAX_BACKTRACK):
            trial = Y - step * grad
            t_num, t_q, t_obj = _partial_terms(trial, A, P)
            if t_obj <= objective:
                Y, num, Q, objective = trial, t_num, t_q, t_obj
                break
            step *= 0.5
        history.append(objective)

    if not np.all(np.isfinite(Y)):
        raise DivergenceError("partial embedding produced non-finite coordinates", iteration=params.iters)
    return PartialEmbedding(coords=Y, objective_history=history, steps=params.iters)
