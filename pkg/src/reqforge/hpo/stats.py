"""Statistics over optimization traces.

best_of_k_stats reproduces the random-sampling analysis: draw k values with
replacement from each observed population, keep the max, and average over
repeats. pearson and correlation_report quantify how hyperparameters relate
to the final metric.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DegenerateError
from .space import HyperparameterSetting


def format_mean_std(mean: float, std: float, decimals: int = 4) -> str:
    return f"{mean:.{decimals}f}±{std:.{decimals}f}"


@dataclass(frozen=True)
class BestOfK:
    k: int
    mean: float
    std: float

    @property
    def display(self) -> str:
        return format_mean_std(self.mean, self.std)


def best_of_k_stats(
    per_round_values: Sequence[Sequence[float]],
    repeats: int,
    rng_seed: int,
    max_k: int = 10,
) -> list[BestOfK]:
    """Best-of-k means and stds for k = 1..max_k.

    Each repeat draws max_k values with replacement from every population
    and takes running maxima, so the per-repeat curve (and therefore the
    mean curve) is non-decreasing in k by construction. With several
    populations the per-repeat statistic is their average.
    """
    if repeats < 1 or max_k < 1:
        raise ValueError("repeats and max_k must be positive")
    pops = [np.asarray(p, dtype=float) for p in per_round_values]
    if not pops or any(len(p) == 0 for p in pops):
        raise ValueError("need at least one non-empty value population")

    rng = np.random.default_rng(rng_seed)
    acc = np.zeros((repeats, max_k))
    for pop in pops:
        draws = pop[rng.integers(0, len(pop), size=(repeats, max_k))]
        acc += np.maximum.accumulate(draws, axis=1)
    acc /= len(pops)

    means = acc.mean(axis=0)
    stds = acc.std(axis=0)
    for i in range(len(means) - 1):
        assert means[i + 1] >= means[i] - 1e-12, "best-of-k mean must not decrease"
    return [BestOfK(k + 1, float(means[k]), float(stds[k])) for k in range(max_k)]


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation; constant input is degenerate."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-d sequences of equal length")
    if len(x) < 2:
        raise ValueError("pearson needs at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise DegenerateError("pearson is undefined for a constant vector")
    return float(np.clip(float(xc @ yc) / denom, -1.0, 1.0))


@dataclass(frozen=True)
class Quartiles:
    min: float
    q1: float
    median: float
    q3: float
    max: float

    @classmethod
    def of(cls, values: np.ndarray) -> "Quartiles":
        q = np.percentile(values, [0, 25, 50, 75, 100])
        return cls(*(float(v) for v in q))


@dataclass(frozen=True)
class CorrelationReport:
    """Pearson r per numeric hyperparameter (rates on log10 scale) and
    metric quartiles per optimizer and schedule."""

    numeric: dict[str, float]
    categorical: dict[str, dict[str, Quartiles]]

    def to_json_dict(self) -> dict:
        return {
            "numeric": dict(self.numeric),
            "categorical": {
                param: {name: vars(q) for name, q in groups.items()}
                for param, groups in self.categorical.items()
            },
        }


def correlation_report(
    samples: Sequence[tuple[HyperparameterSetting, float]]
) -> CorrelationReport:
    """Correlate settings with metric values across an observed dataset."""
    if len(samples) < 2:
        raise ValueError("correlation_report needs at least 2 samples")
    metric = np.array([v for _, v in samples], dtype=float)

    numeric = {
        "learning rate": np.log10([s.learning_rate for s, _ in samples]),
        "weight decay": np.log10([s.weight_decay for s, _ in samples]),
        "iters": np.array([s.iters for s, _ in samples], dtype=float),
        "batch size": np.array([s.batch_size for s, _ in samples], dtype=float),
    }
    numeric_r = {name: pearson(vals, metric) for name, vals in numeric.items()}

    categorical: dict[str, dict[str, Quartiles]] = {}
    for param, labels in (
        ("optimizer", [s.optimizer.value for s, _ in samples]),
        ("lr schedule", [s.schedule.value for s, _ in samples]),
    ):
        groups: dict[str, Quartiles] = {}
        for name in dict.fromkeys(labels):
            vals = metric[[i for i, l in enumerate(labels) if l == name]]
            if len(vals) < 2:
                warnings.warn(
                    f"skipping {param} {name!r}: fewer than 2 samples", stacklevel=2
                )
                continue
            groups[name] = Quartiles.of(vals)
        categorical[param] = groups

    return CorrelationReport(numeric=numeric_r, categorical=categorical)
