"""Training executors and the synthetic response surface.

Real training is replaced by a deterministic surface over the search space:
a Gaussian bump in log learning rate, a linear penalty in log weight decay,
linear gains for iterations and batch-size proximity, plus per-request
optimizer and schedule offsets and small hash-keyed noise. External training
is still reachable through the same one-method executor contract.
"""

from __future__ import annotations

import hashlib
import json
import math
import subprocess
from dataclasses import dataclass, replace
from typing import Any, Protocol

import numpy as np

from .errors import ContractError
from .hpo.space import (
    HyperparameterSetting,
    SettingGrid,
    default_grid,
    space_for_task,
)
from .registry import ModelCard
from .schema import MetricTarget, Task

METRIC_NAMES = {
    Task.CLASSIFICATION: "accuracy",
    Task.DETECTION: "mAP",
    Task.SEGMENTATION: "mIoU",
    Task.KEYPOINT: "OKS-mAP",
}

# Surface shape constants. With the best setting and noise off the surface
# tops out at 0.45 + 0.05 + 0.02 + 0.35 + 0.05 + 0.03 = 0.95.
BASE_SCORE = 0.45
LR_GAIN = 0.35
WD_PENALTY = 0.02
ITER_GAIN = 0.05
BATCH_GAIN = 0.03
NOISE_AMPLITUDE = 0.01
OPTIMIZER_OFFSETS = {"SGD": 0.0, "Adam": 0.03, "AdamW": 0.05, "RMSprop": 0.01}
SCHEDULE_OFFSET_POOL = (-0.02, -0.01, 0.01, 0.02)
FAILURE_LR_THRESHOLD = 0.05
FAILURE_GATE = 0.9


@dataclass(frozen=True)
class DataSummary:
    class_count: int
    image_count: int


@dataclass(frozen=True)
class TrainJob:
    request_id: str
    task: Task
    model_card: ModelCard
    data_summary: DataSummary
    setting: HyperparameterSetting
    seed: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "task": self.task.value,
            "model": {
                "name": self.model_card.name,
                "structure": self.model_card.structure,
                "params(M)": self.model_card.params_m,
                "flops(G)": self.model_card.flops_g,
            },
            "data": {
                "class_count": self.data_summary.class_count,
                "image_count": self.data_summary.image_count,
            },
            "setting": self.setting.to_json_dict(),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TrainResult:
    status: str  # "ok" or "failed"
    metric: MetricTarget
    notes: str = ""

    def __post_init__(self):
        if self.status not in ("ok", "failed"):
            raise ContractError(f"unknown train status {self.status!r}")
        if self.status == "failed" and self.metric.value != 0.0:
            raise ContractError("failed trainings must report value 0")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric.name,
            "value": self.metric.value,
            "status": self.status,
            "notes": self.notes,
        }

    @classmethod
    def from_json_dict(cls, obj: Any) -> "TrainResult":
        status = obj.get("status", "ok")
        value = obj["value"]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError("'value' must be a number")
        return cls(
            status=str(status),
            metric=MetricTarget(str(obj["metric"]), float(value)),
            notes=str(obj.get("notes", "")),
        )


class TrainerExecutor(Protocol):
    def train_and_eval(self, job: TrainJob) -> TrainResult:
        ...


@dataclass(frozen=True)
class SurfaceParams:
    """Per-request surface shape; all fields drawn once from the id seed."""

    task: Task
    lr_peak: float  # best log10 learning rate
    lr_width: float
    wd_anchor: float  # best log10 weight decay
    batch_anchor: float  # best normalized batch size in [0, 1]
    schedule_offsets: tuple[float, float, float, float]
    noise_amplitude: float = NOISE_AMPLITUDE

    def without_noise(self) -> "SurfaceParams":
        return replace(self, noise_amplitude=0.0)


def _id_seed(request_id: str, task: Task) -> int:
    digest = hashlib.sha256(f"{task.value}|{request_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def surface_params_for_request(request_id: str, task: Task) -> SurfaceParams:
    rng = np.random.default_rng(_id_seed(request_id, task))
    lr_peak = float(rng.uniform(-5.0, -2.0))
    lr_width = float(rng.uniform(0.5, 1.5))
    wd_anchor = float(rng.uniform(-5.0, -1.0))
    batch_anchor = float(rng.uniform(0.0, 1.0))
    offsets = tuple(
        float(v) for v in rng.permutation(np.array(SCHEDULE_OFFSET_POOL))
    )
    return SurfaceParams(task, lr_peak, lr_width, wd_anchor, batch_anchor, offsets)


def _params_key(params: SurfaceParams) -> list:
    return [
        params.task.value,
        repr(params.lr_peak),
        repr(params.lr_width),
        repr(params.wd_anchor),
        repr(params.batch_anchor),
        [repr(v) for v in params.schedule_offsets],
    ]


def _unit_hash(tag: str, params: SurfaceParams, setting: HyperparameterSetting) -> float:
    """Deterministic value in [0, 1) keyed by surface, setting, and tag."""
    payload = json.dumps(
        [tag, _params_key(params), setting.to_json_dict()], sort_keys=True
    )
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def surface_score(params: SurfaceParams, setting: HyperparameterSetting) -> float:
    """Evaluate the synthetic surface at one setting, noise included."""
    space = space_for_task(params.task)
    sched_idx = space.schedules.index(setting.schedule)
    log_lr = math.log10(setting.learning_rate)
    log_wd = math.log10(setting.weight_decay)
    it_lo, it_hi = space.iter_bounds
    bs_lo, bs_hi = space.batch_bounds
    batch_norm = (setting.batch_size - bs_lo) / (bs_hi - bs_lo)

    score = (
        BASE_SCORE
        + OPTIMIZER_OFFSETS[setting.optimizer.value]
        + params.schedule_offsets[sched_idx]
        + LR_GAIN
        * math.exp(-((log_lr - params.lr_peak) ** 2) / (2.0 * params.lr_width**2))
        - WD_PENALTY * abs(log_wd - params.wd_anchor)
        + ITER_GAIN * (setting.iters - it_lo) / (it_hi - it_lo)
        + BATCH_GAIN * (1.0 - abs(batch_norm - params.batch_anchor))
    )
    if params.noise_amplitude:
        score += params.noise_amplitude * (
            2.0 * _unit_hash("noise", params, setting) - 1.0
        )
    return _clamp01(score)


def oracle_best(
    params: SurfaceParams, grid: SettingGrid | None = None
) -> tuple[float, HyperparameterSetting]:
    """Exhaustive noise-free argmax of the surface over a setting grid."""
    space = space_for_task(params.task)
    if grid is None:
        grid = default_grid(space)
    if grid.space.task != params.task:
        raise ContractError("grid task does not match surface task")

    opt = np.array(
        [OPTIMIZER_OFFSETS[o.value] for o in space.optimizers]
    ).reshape(-1, 1, 1, 1, 1, 1)
    sched = np.array(params.schedule_offsets).reshape(1, -1, 1, 1, 1, 1)
    log_lr = np.log10(grid.learning_rate)
    lr = (
        LR_GAIN
        * np.exp(-((log_lr - params.lr_peak) ** 2) / (2.0 * params.lr_width**2))
    ).reshape(1, 1, -1, 1, 1, 1)
    wd = (-WD_PENALTY * np.abs(np.log10(grid.weight_decay) - params.wd_anchor)).reshape(
        1, 1, 1, -1, 1, 1
    )
    it_lo, it_hi = space.iter_bounds
    iters = (ITER_GAIN * (grid.iters - it_lo) / (it_hi - it_lo)).reshape(
        1, 1, 1, 1, -1, 1
    )
    bs_lo, bs_hi = space.batch_bounds
    batch_norm = (grid.batch_size - bs_lo) / (bs_hi - bs_lo)
    batch = (BATCH_GAIN * (1.0 - np.abs(batch_norm - params.batch_anchor))).reshape(
        1, 1, 1, 1, 1, -1
    )

    scores = BASE_SCORE + opt + sched + lr + wd + iters + batch
    flat_idx = int(np.argmax(scores))
    io, isc, ilr, iwd, iit, ibs = np.unravel_index(flat_idx, scores.shape)
    best = HyperparameterSetting(
        optimizer=space.optimizers[io],
        schedule=space.schedules[isc],
        learning_rate=float(grid.learning_rate[ilr]),
        weight_decay=float(grid.weight_decay[iwd]),
        iters=int(grid.iters[iit]),
        batch_size=int(grid.batch_size[ibs]),
    )
    return _clamp01(float(scores[io, isc, ilr, iwd, iit, ibs])), best


@dataclass(frozen=True)
class SimulatedTrainer:
    """Executor backed by the synthetic surface.

    Jobs with learning rate above the failure threshold fail on a
    deterministic hash gate (about one in ten), mimicking divergence.
    """

    noise: bool = True
    failures: bool = True

    def train_and_eval(self, job: TrainJob) -> TrainResult:
        params = surface_params_for_request(job.request_id, job.task)
        if not self.noise:
            params = params.without_noise()
        metric_name = METRIC_NAMES[job.task]
        if (
            self.failures
            and job.setting.learning_rate > FAILURE_LR_THRESHOLD
            and _unit_hash("fail", params, job.setting) > FAILURE_GATE
        ):
            return TrainResult(
                "failed",
                MetricTarget(metric_name, 0.0),
                f"diverged: learning rate {job.setting.learning_rate:g} too high",
            )
        value = surface_score(params, job.setting)
        return TrainResult("ok", MetricTarget(metric_name, value))


@dataclass(frozen=True)
class ExternalTrainer:
    """Adapter for a real training service.

    Sends the job JSON to a subprocess (stdin/stdout) or an HTTP endpoint
    and expects a TrainResult JSON back. Timeouts, nonzero exits, and
    malformed replies become failed results with metric 0, never raises.
    """

    command: tuple[str, ...] = ()
    endpoint: str = ""
    timeout_s: float = 600.0

    def train_and_eval(self, job: TrainJob) -> TrainResult:
        if bool(self.command) == bool(self.endpoint):
            raise ContractError("configure exactly one of command or endpoint")
        metric_name = METRIC_NAMES[job.task]
        failed = lambda note: TrainResult(  # noqa: E731
            "failed", MetricTarget(metric_name, 0.0), note
        )
        payload = json.dumps(job.to_json_dict())
        if self.command:
            try:
                proc = subprocess.run(
                    list(self.command),
                    input=payload.encode("utf-8"),
                    capture_output=True,
                    timeout=self.timeout_s,
                )
            except subprocess.TimeoutExpired:
                return failed(f"timeout after {self.timeout_s}s")
            except OSError as exc:
                return failed(f"cannot run trainer command: {exc}")
            if proc.returncode != 0:
                return failed(f"trainer exited with {proc.returncode}")
            reply = proc.stdout.decode("utf-8", errors="replace")
        else:
            import requests

            try:
                resp = requests.post(
                    self.endpoint,
                    data=payload.encode("utf-8"),
                    headers={"Content-Type": "application/json"},
                    timeout=self.timeout_s,
                )
                resp.raise_for_status()
                reply = resp.text
            except requests.RequestException as exc:
                return failed(f"trainer endpoint error: {exc}")
        try:
            return TrainResult.from_json_dict(json.loads(reply))
        except (
            json.JSONDecodeError,
            KeyError,
            TypeError,
            ValueError,
            ContractError,
        ) as exc:
            return failed(f"malformed trainer reply: {exc}")
