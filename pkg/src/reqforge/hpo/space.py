"""Per-task hyperparameter search spaces, sampling, and encoding.

All four tasks share the optimizer and schedule choices and the log-uniform
learning-rate and weight-decay ranges; iteration and batch-size ranges are
task specific. Settings encode to a fixed 12-dimensional point: two one-hot
blocks followed by four min-max scaled continuous coordinates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

import numpy as np

from ..errors import SchemaError
from ..schema import Task

ENCODED_DIM = 12


class Optimizer(str, Enum):
    SGD = "SGD"
    ADAM = "Adam"
    ADAMW = "AdamW"
    RMSPROP = "RMSprop"


class Schedule(str, Enum):
    MULTISTEP = "MultiStepLR"
    COSINE = "CosineAnnealingLR"
    STEP = "StepLR"
    POLY = "PolyLR"


OPTIMIZERS = tuple(Optimizer)
SCHEDULES = tuple(Schedule)


@dataclass(frozen=True)
class SearchSpace:
    task: Task
    iter_bounds: tuple[int, int]
    batch_bounds: tuple[int, int]
    lr_bounds: tuple[float, float] = (1e-8, 0.1)
    wd_bounds: tuple[float, float] = (1e-5, 0.1)
    optimizers: tuple[Optimizer, ...] = OPTIMIZERS
    schedules: tuple[Schedule, ...] = SCHEDULES


SPACES: dict[Task, SearchSpace] = {
    Task.CLASSIFICATION: SearchSpace(Task.CLASSIFICATION, (2000, 5000), (1, 64)),
    Task.DETECTION: SearchSpace(Task.DETECTION, (4000, 9000), (1, 16)),
    Task.SEGMENTATION: SearchSpace(Task.SEGMENTATION, (2000, 7000), (2, 8)),
    Task.KEYPOINT: SearchSpace(Task.KEYPOINT, (2000, 5000), (2, 64)),
}


def space_for_task(task: Task) -> SearchSpace:
    return SPACES[task]


@dataclass(frozen=True)
class HyperparameterSetting:
    optimizer: Optimizer
    schedule: Schedule
    learning_rate: float
    weight_decay: float
    iters: int
    batch_size: int

    def to_json_dict(self) -> dict[str, Any]:
        """Wire keys follow the prompt format, spaces included."""
        return {
            "iters": self.iters,
            "batch size": self.batch_size,
            "optimizer": self.optimizer.value,
            "learning rate": self.learning_rate,
            "weight decay": self.weight_decay,
            "lr schedule": self.schedule.value,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "HyperparameterSetting":
        try:
            return cls(
                optimizer=Optimizer(obj["optimizer"]),
                schedule=Schedule(obj["lr schedule"]),
                learning_rate=float(obj["learning rate"]),
                weight_decay=float(obj["weight decay"]),
                iters=int(obj["iters"]),
                batch_size=int(obj["batch size"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad hyperparameter setting: {exc}") from exc


def setting_in_space(setting: HyperparameterSetting, space: SearchSpace) -> bool:
    return (
        setting.optimizer in space.optimizers
        and setting.schedule in space.schedules
        and space.lr_bounds[0] <= setting.learning_rate <= space.lr_bounds[1]
        and space.wd_bounds[0] <= setting.weight_decay <= space.wd_bounds[1]
        and space.iter_bounds[0] <= setting.iters <= space.iter_bounds[1]
        and space.batch_bounds[0] <= setting.batch_size <= space.batch_bounds[1]
    )


@dataclass(frozen=True)
class SampleBatch:
    """Column arrays for n sampled settings; cheap to encode in one pass."""

    space: SearchSpace
    opt_idx: np.ndarray
    sched_idx: np.ndarray
    learning_rate: np.ndarray
    weight_decay: np.ndarray
    iters: np.ndarray
    batch_size: np.ndarray

    def __len__(self) -> int:
        return len(self.opt_idx)

    def setting(self, i: int) -> HyperparameterSetting:
        return HyperparameterSetting(
            optimizer=self.space.optimizers[int(self.opt_idx[i])],
            schedule=self.space.schedules[int(self.sched_idx[i])],
            learning_rate=float(self.learning_rate[i]),
            weight_decay=float(self.weight_decay[i]),
            iters=int(self.iters[i]),
            batch_size=int(self.batch_size[i]),
        )


def sample_batch(space: SearchSpace, rng: np.random.Generator, n: int) -> SampleBatch:
    """Draw n independent settings: categoricals uniform, learning rate and
    weight decay log-uniform, iters and batch size uniform integers with
    inclusive bounds. The draw order is fixed so seeds stay comparable."""
    lr_lo, lr_hi = (math.log10(b) for b in space.lr_bounds)
    wd_lo, wd_hi = (math.log10(b) for b in space.wd_bounds)
    return SampleBatch(
        space=space,
        opt_idx=rng.integers(0, len(space.optimizers), n),
        sched_idx=rng.integers(0, len(space.schedules), n),
        learning_rate=10.0 ** rng.uniform(lr_lo, lr_hi, n),
        weight_decay=10.0 ** rng.uniform(wd_lo, wd_hi, n),
        iters=rng.integers(space.iter_bounds[0], space.iter_bounds[1] + 1, n),
        batch_size=rng.integers(space.batch_bounds[0], space.batch_bounds[1] + 1, n),
    )


def sample_uniform(space: SearchSpace, rng_seed: int) -> HyperparameterSetting:
    """One uniform draw; identical seeds give identical settings."""
    return sample_batch(space, np.random.default_rng(rng_seed), 1).setting(0)


def _scale_log(values: np.ndarray, bounds: tuple[float, float]) -> np.ndarray:
    lo, hi = (math.log10(b) for b in bounds)
    return (np.log10(values) - lo) / (hi - lo)


def _scale_linear(values: np.ndarray, bounds: tuple[int, int]) -> np.ndarray:
    lo, hi = bounds
    return (values - lo) / (hi - lo)


def encode_columns(
    space: SearchSpace,
    opt_idx: np.ndarray,
    sched_idx: np.ndarray,
    learning_rate: np.ndarray,
    weight_decay: np.ndarray,
    iters: np.ndarray,
    batch_size: np.ndarray,
) -> np.ndarray:
    n = len(opt_idx)
    out = np.zeros((n, ENCODED_DIM), dtype=np.float64)
    rows = np.arange(n)
    out[rows, opt_idx] = 1.0
    out[rows, len(space.optimizers) + sched_idx] = 1.0
    base = len(space.optimizers) + len(space.schedules)
    out[:, base] = _scale_log(learning_rate, space.lr_bounds)
    out[:, base + 1] = _scale_log(weight_decay, space.wd_bounds)
    out[:, base + 2] = _scale_linear(iters, space.iter_bounds)
    out[:, base + 3] = _scale_linear(batch_size, space.batch_bounds)
    return out


def encode_batch(batch: SampleBatch) -> np.ndarray:
    return encode_columns(
        batch.space,
        batch.opt_idx,
        batch.sched_idx,
        batch.learning_rate,
        batch.weight_decay,
        batch.iters,
        batch.batch_size,
    )


def encode(space: SearchSpace, setting: HyperparameterSetting) -> np.ndarray:
    """Encode one setting to the 12-dimensional point in [0, 1]^12."""
    return encode_columns(
        space,
        np.array([space.optimizers.index(setting.optimizer)]),
        np.array([space.schedules.index(setting.schedule)]),
        np.array([setting.learning_rate]),
        np.array([setting.weight_decay]),
        np.array([setting.iters]),
        np.array([setting.batch_size]),
    )[0]


def encode_settings(
    space: SearchSpace, settings: list[HyperparameterSetting]
) -> np.ndarray:
    return encode_columns(
        space,
        np.array([space.optimizers.index(s.optimizer) for s in settings], dtype=int),
        np.array([space.schedules.index(s.schedule) for s in settings], dtype=int),
        np.array([s.learning_rate for s in settings]),
        np.array([s.weight_decay for s in settings]),
        np.array([s.iters for s in settings], dtype=int),
        np.array([s.batch_size for s in settings], dtype=int),
    )


@dataclass(frozen=True)
class SettingGrid:
    """Axis values for the exhaustive oracle grid."""

    space: SearchSpace
    learning_rate: np.ndarray
    weight_decay: np.ndarray
    iters: np.ndarray
    batch_size: np.ndarray

    def size(self) -> int:
        return (
            len(self.space.optimizers)
            * len(self.space.schedules)
            * len(self.learning_rate)
            * len(self.weight_decay)
            * len(self.iters)
            * len(self.batch_size)
        )


def default_grid(
    space: SearchSpace,
    lr_points: int = 29,
    wd_points: int = 17,
    iter_points: int = 7,
    batch_points: int = 8,
) -> SettingGrid:
    """Evenly spaced axes (log scale for rates); integer axes are rounded
    and deduplicated so the grid never repeats a setting."""
    lr = np.logspace(
        math.log10(space.lr_bounds[0]), math.log10(space.lr_bounds[1]), lr_points
    )
    wd = np.logspace(
        math.log10(space.wd_bounds[0]), math.log10(space.wd_bounds[1]), wd_points
    )
    iters = np.unique(
        np.rint(np.linspace(*space.iter_bounds, iter_points)).astype(np.int64)
    )
    batch = np.unique(
        np.rint(np.linspace(*space.batch_bounds, batch_points)).astype(np.int64)
    )
    return SettingGrid(space, lr, wd, iters, batch)


def space_prompt_json(space: SearchSpace) -> str:
    """The search space as prompt JSON, with per-task range text."""
    it_lo, it_hi = space.iter_bounds
    bs_lo, bs_hi = space.batch_bounds
    doc = {
        "iters": {
            "type": "number",
            "description": (
                f"The number of iterations of model training, "
                f"an integer from {it_lo} to {it_hi}."
            ),
        },
        "batch size": {
            "type": "number",
            "description": (
                f"Batch size during model training, "
                f"an integer between {bs_lo} and {bs_hi}."
            ),
        },
        "optimizer": {
            "type": "string",
            "enum": [o.value for o in space.optimizers],
            "description": "Parameter optimizer for model training.",
        },
        "learning rate": {
            "type": "number",
            "description": "Initial learning rate for model training.",
        },
        "weight decay": {
            "type": "number",
            "description": "Weight decay value for model training.",
        },
        "lr schedule": {
            "type": "string",
            "enum": [s.value for s in space.schedules],
            "description": "Learning rate decay rules during model training.",
        },
    }
    return json.dumps(doc, indent=2, ensure_ascii=False)
