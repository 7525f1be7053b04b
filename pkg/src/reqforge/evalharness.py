"""Scoring: config accuracy, search aggregation, and run grading.

Three protocols. Protocol 1 compares parsed configs against gold configs
key by key. Protocol 2 aggregates best metric values per task. Protocol 3
grades finished pipeline runs F/W/P and sums benchmark points.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Sequence, Union

from .errors import ContractError, DuplicateError
from .hpo.stats import format_mean_std
from .registry import ModelCard
from .schema import (
    CanonicalConfig,
    Device,
    Engine,
    RequestConfig,
    Task,
    canonicalize,
)
from .textmatch import DEFAULT_SIMILARITY_THRESHOLD, normalize_text, similarity

ITEM_KEYS = (
    "data.scenario",
    "data.modality",
    "model.task",
    "model.specific_model",
    "model.speed",
    "model.flops",
    "model.parameters",
    "deploy.device",
    "deploy.inference engine",
)
LIST_KEYS = ("data.object", "data.specific", "model.metrics")
SCORED_KEYS = (
    "data.scenario",
    "data.object",
    "data.modality",
    "data.specific",
    "model.task",
    "model.specific_model",
    "model.speed",
    "model.flops",
    "model.parameters",
    "model.metrics",
    "deploy.device",
    "deploy.inference engine",
)


@dataclass(frozen=True)
class KeyVerdict:
    correct: bool
    kind: str  # "item" or "list"


@dataclass(frozen=True)
class KeyLevelResult:
    """Per-key verdicts for one predicted config against its gold."""

    verdicts: Mapping[str, KeyVerdict]

    def _fraction(self, kind: str | None) -> float:
        picked = [
            v.correct
            for v in self.verdicts.values()
            if kind is None or v.kind == kind
        ]
        return sum(picked) / len(picked)

    @property
    def item_accuracy(self) -> float:
        return self._fraction("item")

    @property
    def list_accuracy(self) -> float:
        return self._fraction("list")

    @property
    def total_accuracy(self) -> float:
        return self._fraction(None)

    @property
    def all_correct(self) -> bool:
        return all(v.correct for v in self.verdicts.values())

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "keys": {k: v.correct for k, v in self.verdicts.items()},
            "item_accuracy": self.item_accuracy,
            "list_accuracy": self.list_accuracy,
            "total_accuracy": self.total_accuracy,
        }


def _as_canonical(cfg: Union[RequestConfig, CanonicalConfig]) -> CanonicalConfig:
    if isinstance(cfg, CanonicalConfig):
        return cfg
    return canonicalize(cfg)


def _term_key(term: str) -> str:
    return " ".join(normalize_text(term))


def _dedup(items: Sequence, key: Callable) -> list:
    seen: dict = {}
    for item in items:
        seen.setdefault(key(item), item)
    return list(seen.values())


def _perfect_match(pred: Sequence, gold: Sequence, edge: Callable) -> bool:
    """True iff a one-to-one fuzzy assignment covers both sides."""
    if len(pred) != len(gold):
        return False
    used = [False] * len(gold)

    def assign(i: int) -> bool:
        if i == len(pred):
            return True
        for j in range(len(gold)):
            if not used[j] and edge(pred[i], gold[j]):
                used[j] = True
                if assign(i + 1):
                    return True
                used[j] = False
        return False

    return assign(0)


def _values_close(a: float | None, b: float | None) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def compare_configs(
    pred: Union[RequestConfig, CanonicalConfig],
    gold: Union[RequestConfig, CanonicalConfig],
    fuzzy_threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
) -> KeyLevelResult:
    """Score one parse against gold, key by key.

    Both configs are canonicalized first, so unit and casing differences
    never count as errors. Free-text keys pass at similarity >=
    fuzzy_threshold, enums and quantities must match exactly, and a list
    key is correct only when every element on both sides pairs up.
    Description fields carry no gold signal and are not scored.
    """
    p = _as_canonical(pred)
    g = _as_canonical(gold)

    def fuzzy(a: str, b: str) -> bool:
        return similarity(a, b) >= fuzzy_threshold

    term_edge = fuzzy

    def metric_edge(a, b) -> bool:
        return fuzzy(a.name, b.name) and _values_close(a.value, b.value)

    def terms(values: Sequence[str]) -> list[str]:
        return _dedup(values, _term_key)

    def metric_list(values) -> list:
        return _dedup(values, lambda m: (_term_key(m.name), m.value))

    checks: dict[str, tuple[bool, str]] = {
        "data.scenario": (fuzzy(p.data.scenario, g.data.scenario), "item"),
        "data.object": (
            _perfect_match(terms(p.data.object), terms(g.data.object), term_edge),
            "list",
        ),
        "data.modality": (fuzzy(p.data.modality, g.data.modality), "item"),
        "data.specific": (
            _perfect_match(terms(p.data.specific), terms(g.data.specific), term_edge),
            "list",
        ),
        "model.task": (p.model.task == g.model.task, "item"),
        "model.specific_model": (
            fuzzy(p.model.specific_model, g.model.specific_model),
            "item",
        ),
        "model.speed": (
            _values_close(p.speed_ms_per_sample, g.speed_ms_per_sample),
            "item",
        ),
        "model.flops": (_values_close(p.flops_total, g.flops_total), "item"),
        "model.parameters": (
            _values_close(p.parameter_count, g.parameter_count),
            "item",
        ),
        "model.metrics": (
            _perfect_match(
                metric_list(p.model.metrics), metric_list(g.model.metrics), metric_edge
            ),
            "list",
        ),
        "deploy.device": (p.deploy.device == g.deploy.device, "item"),
        "deploy.inference engine": (p.deploy.engine == g.deploy.engine, "item"),
    }
    verdicts = {k: KeyVerdict(correct, kind) for k, (correct, kind) in checks.items()}
    return KeyLevelResult(verdicts=verdicts)


def req_level(results: Sequence[KeyLevelResult]) -> float:
    """Fraction of requests parsed with every scored key correct."""
    if not results:
        raise ContractError("req_level needs at least one result")
    return sum(r.all_correct for r in results) / len(results)


def mean_key_level(results: Sequence[KeyLevelResult]) -> float:
    """Average per-request key accuracy."""
    if not results:
        raise ContractError("mean_key_level needs at least one result")
    return sum(r.total_accuracy for r in results) / len(results)


def key_accuracy_table(results: Sequence[KeyLevelResult]) -> dict[str, float]:
    """Per-key accuracy across many requests."""
    if not results:
        raise ContractError("key_accuracy_table needs at least one result")
    table = {}
    for key in SCORED_KEYS:
        table[key] = sum(r.verdicts[key].correct for r in results) / len(results)
    return table


@dataclass(frozen=True)
class TaskAggregate:
    mean: float
    std: float
    display: str


def aggregate_hpo(
    per_request_best: Mapping[Union[Task, str], Sequence[float]],
) -> dict[str, TaskAggregate]:
    """Mean and population std of best metrics per task, shown as m+-s."""
    out: dict[str, TaskAggregate] = {}
    for task, values in per_request_best.items():
        name = task.value if isinstance(task, Task) else str(task)
        if not values:
            warnings.warn(f"no values for task {name}; skipped", stacklevel=2)
            continue
        n = len(values)
        mean = sum(values) / n
        std = math.sqrt(sum((v - mean) ** 2 for v in values) / n)
        out[name] = TaskAggregate(mean, std, format_mean_std(mean, std, decimals=3))
    return out


class Grade(Enum):
    F = "F"
    W = "W"
    P = "P"

    @property
    def points(self) -> int:
        return {"F": 0, "W": 1, "P": 2}[self.value]


def _constraints_met(gold: CanonicalConfig, card: ModelCard, achieved: float, plan) -> bool:
    for target in gold.model.metrics:
        if achieved < target.value:
            return False
    if gold.parameter_count is not None and card.params_m * 1e6 > gold.parameter_count:
        return False
    if gold.flops_total is not None and card.flops_g * 1e9 > gold.flops_total:
        return False
    if gold.speed_ms_per_sample is not None and card.speed_ms > gold.speed_ms_per_sample:
        return False
    if gold.deploy.device != Device.NONE:
        if plan is None or str(plan.device) != gold.deploy.device.value:
            return False
    if gold.deploy.engine != Engine.NONE:
        if plan is None or str(plan.engine) != gold.deploy.engine.value:
            return False
    return True


def grade_run(artifact, gold: Union[RequestConfig, CanonicalConfig]) -> Grade:
    """Grade one finished run: F total failure, W workable, P perfect.

    F when the pipeline did not complete, picked no model, or the best
    metric is 0. P when every hard requirement in the gold config holds:
    metric targets reached, card within parameter/compute/latency limits,
    and the plan on the requested device and engine. W otherwise.
    """
    g = _as_canonical(gold)
    status = getattr(artifact, "status", "")
    card = getattr(artifact, "model", None)
    trace = getattr(artifact, "trace", None)
    if status != "completed" or card is None or trace is None or not trace.trials:
        return Grade.F
    achieved = trace.best.metric_value
    if achieved <= 0.0:
        return Grade.F
    plan = getattr(artifact, "plan", None)
    if _constraints_met(g, card, achieved, plan):
        return Grade.P
    return Grade.W


PER_TASK_MAX_POINTS = 40
TOTAL_MAX_POINTS = 160
MAX_REQUESTS_PER_TASK = 20


@dataclass(frozen=True)
class BenchmarkScore:
    per_task: Mapping[str, int]
    grades: Mapping[tuple[str, str], Grade]
    total: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "per_task": dict(self.per_task),
            "total": self.total,
            "per_task_max": PER_TASK_MAX_POINTS,
            "total_max": TOTAL_MAX_POINTS,
            "grades": {
                f"{task}/{rid}": grade.value
                for (task, rid), grade in self.grades.items()
            },
        }


def score_benchmark(
    grades: Union[
        Mapping[tuple[Union[Task, str], str], Grade],
        Iterable[tuple[Union[Task, str], str, Grade]],
    ],
) -> BenchmarkScore:
    """Sum grade points per task and overall (40 per task, 160 total)."""
    if isinstance(grades, Mapping):
        entries = [(task, rid, grade) for (task, rid), grade in grades.items()]
    else:
        entries = [(task, rid, grade) for task, rid, grade in grades]
    per_task: dict[str, int] = {}
    counts: dict[str, int] = {}
    seen: set[tuple[str, str]] = set()
    recorded: dict[tuple[str, str], Grade] = {}
    for task, rid, grade in entries:
        name = task.value if isinstance(task, Task) else str(task)
        grade = Grade(grade)
        key = (name, str(rid))
        if key in seen:
            raise DuplicateError(f"request {rid!r} graded twice for task {name}")
        seen.add(key)
        counts[name] = counts.get(name, 0) + 1
        if counts[name] > MAX_REQUESTS_PER_TASK:
            raise ContractError(
                f"task {name} has more than {MAX_REQUESTS_PER_TASK} graded requests"
            )
        per_task[name] = per_task.get(name, 0) + grade.points
        recorded[key] = grade
    return BenchmarkScore(
        per_task=per_task, grades=recorded, total=sum(per_task.values())
    )


def _rule(width: int) -> str:
    return "-" * width


def render_accuracy_table(results: Sequence[KeyLevelResult]) -> str:
    """Aligned per-key accuracy table with key- and req-level footers."""
    table = key_accuracy_table(results)
    rows = [(key, f"{100.0 * acc:.2f}") for key, acc in table.items()]
    rows.append(("Key-Level", f"{100.0 * mean_key_level(results):.2f}"))
    rows.append(("Req-Level", f"{100.0 * req_level(results):.2f}"))
    left = max(len(k) for k, _ in rows)
    right = max(len(v) for _, v in rows)
    lines = [f"{'key':<{left}}  {'acc%':>{right}}", _rule(left + right + 2)]
    for key, value in rows:
        lines.append(f"{key:<{left}}  {value:>{right}}")
    return "\n".join(lines)


def render_hpo_table(aggregates: Mapping[str, TaskAggregate]) -> str:
    if not aggregates:
        return "(no results)"
    left = max(len(k) for k in aggregates)
    lines = []
    for task, agg in aggregates.items():
        lines.append(f"{task:<{left}}  {agg.display}")
    return "\n".join(lines)


def render_benchmark_table(score: BenchmarkScore) -> str:
    rows = [
        (task, f"{points}/{PER_TASK_MAX_POINTS}")
        for task, points in score.per_task.items()
    ]
    rows.append(("total", f"{score.total}/{TOTAL_MAX_POINTS}"))
    left = max(len(k) for k, _ in rows)
    lines = []
    for task, cell in rows:
        lines.append(f"{task:<{left}}  {cell}")
    return "\n".join(lines)


def report_json(
    accuracy: Sequence[KeyLevelResult] | None = None,
    hpo: Mapping[str, TaskAggregate] | None = None,
    benchmark: BenchmarkScore | None = None,
) -> str:
    """Bundle whichever protocol outputs are present into one JSON report."""
    payload: dict[str, Any] = {}
    if accuracy:
        payload["understanding"] = {
            "per_key": key_accuracy_table(accuracy),
            "key_level": mean_key_level(accuracy),
            "req_level": req_level(accuracy),
            "cases": [r.to_json_dict() for r in accuracy],
        }
    if hpo:
        payload["hpo"] = {
            task: {"mean": agg.mean, "std": agg.std, "display": agg.display}
            for task, agg in hpo.items()
        }
    if benchmark is not None:
        payload["benchmark"] = benchmark.to_json_dict()
    return json.dumps(payload, indent=2, ensure_ascii=False)
