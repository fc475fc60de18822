"""
Exact (O(n^2)) t-SNE: perplexity-calibrated input affinities, Student-t output
affinities, the KL objective with its gradient, and the two-phase optimiser.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import pdist, squareform

from app.internal.errors import (
    ConfigurationError,
    ContractViolationError,
    DegenerateRowError,
    DivergenceError,
)
from app.services.streams.points import as_matrix

logger = logging.getLogger(__name__)

Q_FLOOR = 1e-12
INIT_SIGMA = 1e-2
MIN_GAIN = 0.01

SYMMETRY_TOL = 1e-12
SUM_TOL = 1e-9


class TsneParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    perplexity: float = Field(30.0, gt=0)
    early_exaggeration_iters: int = Field(250, ge=0)
    optimization_iters: int = Field(400, ge=0)
    exaggeration_factor: float = Field(12.0, gt=0)
    learning_rate: float = Field(200.0, gt=0)
    momentum_early: float = Field(0.5, ge=0, lt=1)
    momentum_late: float = Field(0.8, ge=0, lt=1)
    seed: int = 0


@dataclass(frozen=True)
class AffinityMatrix:
    """Joint probabilities p_ij; invariants are checked on construction"""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ContractViolationError(f"affinity matrix must be square, got {v.shape}")
        if np.any(np.diag(v) != 0.0):
            raise ContractViolationError("affinity matrix diagonal must be zero")
        if np.any(v < 0.0):
            raise ContractViolationError("affinity matrix has negative entries")
        if v.size and np.max(np.abs(v - v.T)) > SYMMETRY_TOL:
            raise ContractViolationError("affinity matrix is not symmetric")
        if abs(v.sum() - 1.0) > SUM_TOL:
            raise ContractViolationError(f"affinity matrix sums to {v.sum()!r}, expected 1")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass
class TsneEmbedding:
    coords: np.ndarray
    kl_history: list[float] = field(default_factory=list)
    steps: int = 0

    @property
    def initial_kl(self) -> float:
        """KL at the first unexaggerated iteration"""
        return self.kl_history[0]

    @property
    def final_kl(self) -> float:
        return self.kl_history[-1]


def _values(m: Union[AffinityMatrix, np.ndarray]) -> np.ndarray:
    return m.values if isinstance(m, AffinityMatrix) else np.asarray(m, dtype=float)


def effective_perplexity(perplexity: float, n: int) -> float:
    """Largest usable perplexity for n points (must stay below n - 1)"""
    if perplexity < n - 1:
        return perplexity
    clamped = float(max(1.0, n - 2))
    logger.warning(f"Perplexity {perplexity} too large for {n} points, using {clamped}")
    return clamped


def pairwise_sq_dists(points) -> np.ndarray:
    X = as_matrix(points)
    if X.shape[0] < 2:
        raise ConfigurationError(f"need at least 2 points, got {X.shape[0]}")
    return squareform(pdist(X, "sqeuclidean"))


def calibrate_row(
    sq_dist_row,
    perplexity: float,
    self_index: Optional[int] = None,
    tol: float = 1e-5,
    max_steps: int = 50,
) -> tuple[float, np.ndarray]:
    """
    Binary search on the Gaussian precision so that 2^H(p) matches the perplexity.

    Returns (beta, p) where p has the row's length with the self entry at 0.
    If the target is unreachable the closest precision seen is returned.
    """
    row = np.asarray(sq_dist_row, dtype=float).ravel()
    if perplexity < 1:
        raise ConfigurationError(f"perplexity must be >= 1, got {perplexity}")
    mask = np.ones(row.shape[0], dtype=bool)
    if self_index is not None:
        mask[self_index] = False
    cand = row[mask]
    if cand.size == 0:
        raise ConfigurationError("distance row has no candidates")
    if not np.all(np.isfinite(cand)):
        raise ConfigurationError("distance row has non-finite entries")

    p_full = np.zeros_like(row)
    if np.all(cand == 0.0):
        p_full[mask] = 1.0 / cand.size
        raise DegenerateRowError(
            "all candidate distances are zero; uniform fallback available",
            fallback=(0.0, p_full),
        )

    shifted = cand - cand.min()
    target = np.log(perplexity)
    beta = 1.0 / max(float(np.mean(shifted)), np.finfo(float).tiny)
    lo, hi = 0.0, np.inf
    best_gap, best_beta, best_p = np.inf, beta, None

    for _ in range(max_steps):
        w = np.exp(-shifted * beta)
        z = w.sum()
        p = w / z
        entropy = np.log(z) + beta * np.dot(shifted, p)
        gap = abs(np.exp(entropy) - perplexity)
        if gap < best_gap:
            best_gap, best_beta, best_p = gap, beta, p
        if gap <= tol * perplexity:
            break
        if entropy > target:
            lo = beta
            beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
        else:
            hi = beta
            beta = (beta + lo) / 2.0

    p_full[mask] = best_p
    return best_beta, p_full


def conditional_affinities(sq_dists: np.ndarray, perplexity: float) -> np.ndarray:
    n = sq_dists.shape[0]
    cond = np.zeros((n, n))
    for i in range(n):
        try:
            _, cond[i] = calibrate_row(sq_dists[i], perplexity, self_index=i)
        except DegenerateRowError as e:
            logger.warning(f"Row {i}: {e.detail}")
            cond[i] = e.fallback[1]
    return cond


def joint_affinities(points, perplexity: float) -> AffinityMatrix:
    X = as_matrix(points)
    n = X.shape[0]
    if n < 3:
        raise ConfigurationError(f"joint affinities need at least 3 points, got {n}")
    cond = conditional_affinities(pairwise_sq_dists(X), perplexity)
    return AffinityMatrix((cond + cond.T) / (2.0 * n))


def student_kernel(Y: np.ndarray) -> np.ndarray:
    """(1 + |y_i - y_j|^2)^-1 with a zero diagonal"""
    num = 1.0 / (1.0 + squareform(pdist(Y, "sqeuclidean")))
    np.fill_diagonal(num, 0.0)
    return num


def low_dim_affinities(Y) -> AffinityMatrix:
    Y = as_matrix(Y)
    if Y.shape[0] < 2:
        raise ConfigurationError(f"need at least 2 points, got {Y.shape[0]}")
    if not np.all(np.isfinite(Y)):
        raise ConfigurationError("embedding has non-finite coordinates")
    num = student_kernel(Y)
    return AffinityMatrix(num / num.sum())


def _kl(P: np.ndarray, Q: np.ndarray) -> float:
    nz = P > 0.0
    return max(0.0, float(np.sum(P[nz] * np.log(P[nz] / np.maximum(Q[nz], Q_FLOOR)))))


def kl_divergence(P, Q) -> float:
    p, q = _values(P), _values(Q)
    if p.shape != q.shape:
        raise ConfigurationError(f"size mismatch: P is {p.shape}, Q is {q.shape}")
    return _kl(p, q)


def kl_gradient(P, Q, Y) -> np.ndarray:
    p, q, Y = _values(P), _values(Q), as_matrix(Y)
    if not (p.shape == q.shape and p.shape[0] == Y.shape[0]):
        raise ConfigurationError(f"inconsistent sizes: P {p.shape}, Q {q.shape}, Y {Y.shape}")
    W = (p - q) * student_kernel(Y)
    return 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)


def fit(points, params: TsneParams, P: Optional[AffinityMatrix] = None) -> TsneEmbedding:
    """
    Full t-SNE: ``early_exaggeration_iters`` steps on exaggerated P, then
    ``optimization_iters`` plain steps. KL is tracked from exaggeration removal.
    """
    X = as_matrix(points)
    n = X.shape[0]
    if n < 4:
        raise ConfigurationError(f"fit needs at least 4 points, got {n}")
    if params.perplexity >= n - 1:
        raise ConfigurationError(f"perplexity {params.perplexity} must be below n-1 = {n - 1}")
    if P is None:
        P = joint_affinities(X, params.perplexity)
    p = P.values

    rng = np.random.default_rng(params.seed)
    Y = rng.normal(0.0, INIT_SIGMA, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    early = params.early_exaggeration_iters
    total = early + params.optimization_iters
    kl_history: list[float] = []

    logger.info(f"Fitting t-SNE on {n} points ({early} exaggerated + {params.optimization_iters} steps)")
    for it in range(total):
        exaggerating = it < early
        num = student_kernel(Y)
        Q = num / num.sum()
        if not exaggerating:
            kl_history.append(_kl(p, Q))
        p_eff = p * params.exaggeration_factor if exaggerating else p
        W = (p_eff - Q) * num
        grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)

        momentum = params.momentum_early if exaggerating else params.momentum_late
        same_sign = np.sign(grad) == np.sign(update)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, MIN_GAIN, out=gains)
        update = momentum * update - params.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
        if not np.all(np.isfinite(Y)):
            raise DivergenceError("t-SNE produced non-finite coordinates", iteration=it)
        if it % 100 == 0 and kl_history:
            logger.debug(f"iteration {it}: KL {kl_history[-1]:.6f}")

    num = student_kernel(Y)
    kl_history.append(_kl(p, num / num.sum()))
    logger.info(f"t-SNE finished, final KL {kl_history[-1]:.6f}")
    return TsneEmbedding(coords=Y, kl_history=kl_history, steps=total)
