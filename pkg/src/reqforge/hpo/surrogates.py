"""Surrogate models over encoded settings and the acquisition rule.

Two interchangeable surrogates: an exact Gaussian process with fixed kernel
hyperparameters, and a bootstrap regression forest whose predictive variance
is the spread across trees. Proposals maximize expected improvement over a
uniformly sampled candidate pool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import scipy.linalg
import scipy.special

from ..errors import ContractError, FitError
from .space import (
    HyperparameterSetting,
    SearchSpace,
    encode_batch,
    encode_settings,
    sample_batch,
)

GP_LENGTH_SCALE = 0.5
GP_NOISE = 1e-6
GP_MAX_JITTER = 1e-3
GP_SIGNAL_FLOOR = 1e-4
RF_TREES = 50
RF_MAX_DEPTH = 8
RF_VARIANCE_FLOOR = 1e-6
DEFAULT_POOL_SIZE = 2048
DEFAULT_XI = 0.01


class TrialLike(Protocol):
    setting: HyperparameterSetting
    metric_value: float


class SurrogateModel(Protocol):
    def predict_batch(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ...


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :]
    d -= 2.0 * (a @ b.T)
    return np.maximum(d, 0.0)


@dataclass
class GPModel:
    """Squared-exponential GP with fixed length scale.

    Targets are standardized internally; the signal variance is the sample
    variance of the raw targets (floored), so far from all data the
    predictive variance reverts to it.
    """

    train_x: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    y_mean: float
    y_scale: float
    jitter: float

    @classmethod
    def fit(cls, train_x: np.ndarray, targets: np.ndarray) -> "GPModel":
        n = len(targets)
        if n < 2:
            raise ContractError("GP fit needs at least 2 observations")
        y_mean = float(np.mean(targets))
        signal_var = max(float(np.var(targets, ddof=1)), GP_SIGNAL_FLOOR)
        y_scale = math.sqrt(signal_var)
        z = (targets - y_mean) / y_scale

        corr = np.exp(-_sq_dists(train_x, train_x) / (2.0 * GP_LENGTH_SCALE**2))
        jitter = GP_NOISE
        while True:
            try:
                chol = np.linalg.cholesky(corr + jitter * np.eye(n))
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
                if jitter > GP_MAX_JITTER:
                    raise FitError(
                        f"kernel matrix stayed singular up to jitter {GP_MAX_JITTER}"
                    ) from None
        alpha = scipy.linalg.cho_solve((chol, True), z)
        return cls(np.array(train_x, dtype=float), chol, alpha, y_mean, y_scale, jitter)

    @property
    def signal_variance(self) -> float:
        return self.y_scale**2

    def predict_batch(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cross = np.exp(
            -_sq_dists(np.atleast_2d(points), self.train_x)
            / (2.0 * GP_LENGTH_SCALE**2)
        )
        mean = self.y_mean + self.y_scale * (cross @ self.alpha)
        v = scipy.linalg.solve_triangular(self.chol, cross.T, lower=True)
        var_z = np.maximum(1.0 - (v * v).sum(axis=0), 0.0)
        return mean, self.signal_variance * var_z


@dataclass
class RFModel:
    """Bootstrap forest; variance across trees is floored so the acquisition
    never divides by zero."""

    nodes: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]

    @classmethod
    def fit(
        cls, train_x: np.ndarray, targets: np.ndarray, rng: np.random.Generator
    ) -> "RFModel":
        from . import forest

        n = len(targets)
        if n < 2:
            raise ContractError("forest fit needs at least 2 observations")
        boot = rng.integers(0, n, size=(RF_TREES, n))
        nodes = forest.build_forest(
            np.ascontiguousarray(train_x, dtype=np.float64),
            np.ascontiguousarray(targets, dtype=np.float64),
            boot,
            RF_MAX_DEPTH,
        )
        return cls(nodes)

    def predict_batch(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        from . import forest

        mean, var = forest.forest_moments(
            *self.nodes, np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        )
        return mean, np.maximum(var, RF_VARIANCE_FLOOR)


def fit_surrogate(
    kind: str,
    history: Sequence[TrialLike],
    space: SearchSpace,
    rng_seed: int = 0,
) -> SurrogateModel:
    """Fit a surrogate ("gp" or "rf") on completed trials."""
    if len(history) < 2:
        raise ContractError("surrogate fit needs at least 2 trials")
    train_x = encode_settings(space, [t.setting for t in history])
    targets = np.array([t.metric_value for t in history], dtype=float)
    if kind == "gp":
        return GPModel.fit(train_x, targets)
    if kind == "rf":
        return RFModel.fit(train_x, targets, np.random.default_rng(rng_seed))
    raise ValueError(f"unknown surrogate kind {kind!r}")


def predict(model: SurrogateModel, point: np.ndarray) -> tuple[float, float]:
    """Posterior mean and non-negative variance at one encoded point."""
    mean, var = model.predict_batch(np.asarray(point, dtype=float)[None, :])
    return float(mean[0]), float(var[0])


def expected_improvement(mean, variance, best: float, xi: float = DEFAULT_XI):
    """Closed-form EI for maximization; accepts scalars or arrays.

    With zero variance this is max(mean - best - xi, 0).
    """
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ContractError("variance must be non-negative")
    sigma = np.sqrt(variance)
    delta = mean - best - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, delta / np.where(sigma > 0, sigma, 1.0), 0.0)
    cdf = 0.5 * (1.0 + scipy.special.erf(z / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    ei = np.where(sigma > 0, delta * cdf + sigma * pdf, np.maximum(delta, 0.0))
    ei = np.maximum(ei, 0.0)
    if ei.ndim == 0:
        return float(ei)
    return ei


def propose_next(
    model: SurrogateModel,
    space: SearchSpace,
    history: Sequence[TrialLike],
    rng_seed: int,
    pool_size: int = DEFAULT_POOL_SIZE,
) -> HyperparameterSetting:
    """Argmax of EI over a uniform candidate pool; ties go to the lowest
    pool index, so the choice is deterministic for a given seed."""
    if not history:
        raise ContractError("propose_next needs a non-empty history")
    pool = sample_batch(space, np.random.default_rng(rng_seed), pool_size)
    mean, var = model.predict_batch(encode_batch(pool))
    best = max(t.metric_value for t in history)
    ei = expected_improvement(mean, var, best)
    return pool.setting(int(np.argmax(ei)))
