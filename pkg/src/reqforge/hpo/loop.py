"""Strategy loop over training rounds.

Every strategy produces one TrialRecord per round. Executor failures and
rejected proposals score 0 and stay in the history, so budgets are always
spent in full and traces are comparable across strategies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any, Mapping

import numpy as np

from ..errors import ContractError, ProposalError
from ..registry import ModelCard

if TYPE_CHECKING:
    from ..llm.client import ChatClient
    from ..llm.prompts import HPOContext
from ..schema import MetricTarget, Task
from ..trainer import METRIC_NAMES, DataSummary, TrainJob, TrainerExecutor
from .space import HyperparameterSetting, sample_uniform, space_for_task
from .surrogates import DEFAULT_POOL_SIZE, fit_surrogate, propose_next


class Strategy(str, Enum):
    RANDOM = "random"
    BAYES_GP = "bayes_gp"
    BAYES_RF = "bayes_rf"
    LLM = "llm"


_SURROGATE_KIND = {Strategy.BAYES_GP: "gp", Strategy.BAYES_RF: "rf"}
_SEED_ROUNDS = 2  # uniform draws before the surrogate takes over


@dataclass(frozen=True)
class TrialRecord:
    round: int
    setting: HyperparameterSetting
    metric_value: float
    note: str = ""

    def __post_init__(self):
        if self.round < 1:
            raise ContractError("trial rounds are 1-based")
        if not 0.0 <= self.metric_value <= 1.0:
            raise ContractError(
                f"metric value {self.metric_value} outside [0, 1]"
            )

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "setting": self.setting.to_json_dict(),
            "metric": self.metric_value,
            "note": self.note,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "TrialRecord":
        return cls(
            round=int(obj["round"]),
            setting=HyperparameterSetting.from_json_dict(obj["setting"]),
            metric_value=float(obj["metric"]),
            note=str(obj.get("note", "")),
        )


@dataclass(frozen=True)
class HPOTrace:
    request_id: str
    strategy: Strategy
    trials: tuple[TrialRecord, ...]

    @property
    def best(self) -> TrialRecord:
        if not self.trials:
            raise ContractError("trace has no trials")
        return max(self.trials, key=lambda t: t.metric_value)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "strategy": self.strategy.value,
            "trials": [t.to_json_dict() for t in self.trials],
            "best": self.best.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "HPOTrace":
        return cls(
            request_id=str(obj["request_id"]),
            strategy=Strategy(obj["strategy"]),
            trials=tuple(TrialRecord.from_json_dict(t) for t in obj["trials"]),
        )


def default_setting(space) -> HyperparameterSetting:
    """Deterministic midpoint fallback used when a proposal fails."""
    lr = 10.0 ** ((math.log10(space.lr_bounds[0]) + math.log10(space.lr_bounds[1])) / 2)
    wd = 10.0 ** ((math.log10(space.wd_bounds[0]) + math.log10(space.wd_bounds[1])) / 2)
    return HyperparameterSetting(
        optimizer=space.optimizers[0],
        schedule=space.schedules[0],
        learning_rate=lr,
        weight_decay=wd,
        iters=(space.iter_bounds[0] + space.iter_bounds[1]) // 2,
        batch_size=(space.batch_bounds[0] + space.batch_bounds[1]) // 2,
    )


def _placeholder_context(task: Task) -> "HPOContext":
    from ..llm.prompts import HPOContext

    return HPOContext(
        num_classes=0,
        dataset="synthetic",
        model_name="surrogate-bench",
        params_m=1.0,
        flops_g=1.0,
        reference_accuracy=0.0,
        metric_name=METRIC_NAMES[task],
    )


def _evaluate(
    executor: TrainerExecutor, job: TrainJob, round_no: int
) -> TrialRecord:
    try:
        result = executor.train_and_eval(job)
    except Exception as exc:  # executor contract: failures never stop a run
        return TrialRecord(round_no, job.setting, 0.0, note=f"executor error: {exc}")
    if result.status != "ok":
        note = result.notes or "training failed"
        return TrialRecord(round_no, job.setting, 0.0, note=note)
    value = result.metric.value
    note = ""
    if not 0.0 <= value <= 1.0:
        note = f"metric {value:g} clamped into [0, 1]"
        value = min(max(value, 0.0), 1.0)
    return TrialRecord(round_no, job.setting, value, note=note)


def run_hpo(
    strategy: Strategy | str,
    budget_rounds: int,
    executor: TrainerExecutor,
    context: HPOContext | None,
    rng_seed: int,
    *,
    task: Task,
    request_id: str = "request",
    model_card: ModelCard | None = None,
    data_summary: DataSummary | None = None,
    client: ChatClient | None = None,
    pool_size: int = DEFAULT_POOL_SIZE,
) -> HPOTrace:
    """Run one optimization and return its trace.

    random draws every round uniformly; bayes_gp and bayes_rf draw
    2 uniform rounds and then maximize expected improvement under the
    fitted surrogate; llm asks the chat model each round, feeding observed
    metrics back. Identical seeds give identical traces.
    """
    from ..llm.ops import llm_propose_setting

    strategy = Strategy(strategy)
    if budget_rounds < 1:
        raise ContractError("budget_rounds must be >= 1")
    if strategy is Strategy.LLM and client is None:
        raise ContractError("llm strategy needs a chat client")
    space = space_for_task(task)
    if context is None:
        context = _placeholder_context(task)
    if model_card is None:
        model_card = ModelCard(
            name=context.model_name,
            task=task,
            structure=context.model_name,
            params_m=context.params_m,
            flops_g=context.flops_g,
            speed_ms=1.0,
            performance=MetricTarget(context.metric_name, context.reference_accuracy),
        )
    if data_summary is None:
        data_summary = DataSummary(context.num_classes, 0)

    # four independent seed streams per round, all derived from rng_seed
    states = np.random.SeedSequence(rng_seed).generate_state(
        4 * budget_rounds, dtype=np.uint64
    )
    trials: list[TrialRecord] = []
    for round_no in range(1, budget_rounds + 1):
        base = 4 * (round_no - 1)
        sample_seed = int(states[base])
        fit_seed = int(states[base + 1])
        propose_seed = int(states[base + 2])
        job_seed = int(states[base + 3] % np.uint64(2**31))

        if strategy is Strategy.LLM:
            pairs = [(t.setting, t.metric_value) for t in trials]
            try:
                setting = llm_propose_setting(client, context, space, pairs)
            except ProposalError as exc:
                trials.append(
                    TrialRecord(
                        round_no,
                        default_setting(space),
                        0.0,
                        note=f"proposal failed: {exc}",
                    )
                )
                continue
        elif strategy is Strategy.RANDOM or round_no <= _SEED_ROUNDS:
            setting = sample_uniform(space, sample_seed)
        else:
            model = fit_surrogate(
                _SURROGATE_KIND[strategy], trials, space, rng_seed=fit_seed
            )
            setting = propose_next(model, space, trials, propose_seed, pool_size)

        job = TrainJob(request_id, task, model_card, data_summary, setting, job_seed)
        trials.append(_evaluate(executor, job, round_no))

    return HPOTrace(request_id=request_id, strategy=strategy, trials=tuple(trials))
