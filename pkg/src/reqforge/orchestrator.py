"""Five-stage pipeline: understand, pick data, pick model, tune, deploy.

Each stage either advances the run or stamps a failed_* status; nothing
escapes as an exception, so every request ends in a gradeable artifact.
Artifacts persist under runs/<id>/ with a content digest for audit.
"""

from __future__ import annotations

import hashlib
import json
import time
import uuid
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
import scipy

from . import __version__
from .errors import (
    ClientError,
    ContractError,
    DuplicateError,
    IntegrityError,
    ParseError,
    SchemaError,
    SelectionError,
    TaxonomyError,
    UnderstandingError,
)
from .hpo.loop import HPOTrace, Strategy, run_hpo
from .hpo.space import HyperparameterSetting
from .hpo.surrogates import DEFAULT_POOL_SIZE
from .llm.client import ChatClient
from .llm.ops import llm_parse_request
from .llm.prompts import HPOContext
from .registry import (
    DataCard,
    DataSelection,
    ModelCard,
    Registry,
    load_zoo,
    select_data,
    select_model,
)
from .schema import (
    CanonicalConfig,
    Device,
    Engine,
    MetricTarget,
    RequestConfig,
    SchemaWarning,
    Task,
    canonicalize,
    config_from_obj,
    config_to_obj,
)
from .textmatch import Taxonomy, load_taxonomy
from .trainer import METRIC_NAMES, DataSummary, SimulatedTrainer, TrainerExecutor

STATUSES = (
    "completed",
    "failed_understanding",
    "failed_selection",
    "failed_training",
)

_ALLOWED_DEVICES = {Device.CPU.value, Device.GPU.value}
_ALLOWED_ENGINES = {Engine.ONNXRUNTIME.value, Engine.NCNN.value, Engine.OPENVINO.value}


def bundled_zoo_path() -> Path:
    return Path(str(resources.files("reqforge").joinpath("data", "zoo.json")))


def bundled_taxonomy_path() -> Path:
    return Path(str(resources.files("reqforge").joinpath("data", "taxonomy.tsv")))


@dataclass(frozen=True)
class DeploymentPlan:
    """Export decision for a finished run. Fields never hold none."""

    device: str
    engine: str
    model_name: str
    setting_digest: str = ""
    notes: str = ""

    def __post_init__(self):
        if self.device not in _ALLOWED_DEVICES:
            raise ContractError(f"plan device must be cpu or gpu, got {self.device!r}")
        if self.engine not in _ALLOWED_ENGINES:
            raise ContractError(f"unsupported plan engine {self.engine!r}")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "device": self.device,
            "engine": self.engine,
            "model": self.model_name,
            "setting_digest": self.setting_digest,
            "notes": self.notes,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "DeploymentPlan":
        return cls(
            device=str(obj["device"]),
            engine=str(obj["engine"]),
            model_name=str(obj["model"]),
            setting_digest=str(obj.get("setting_digest", "")),
            notes=str(obj.get("notes", "")),
        )


def make_deployment_plan(
    cfg: CanonicalConfig,
    card: ModelCard,
    setting: HyperparameterSetting | None = None,
) -> DeploymentPlan:
    """Resolve the export target, defaulting to onnxruntime on cpu."""
    device = cfg.deploy.device.value if cfg.deploy.device != Device.NONE else "cpu"
    engine = (
        cfg.deploy.engine.value if cfg.deploy.engine != Engine.NONE else "onnxruntime"
    )
    digest = ""
    if setting is not None:
        body = json.dumps(setting.to_json_dict(), sort_keys=True)
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()[:12]
    return DeploymentPlan(
        device=device, engine=engine, model_name=card.name, setting_digest=digest
    )


@dataclass(frozen=True)
class RunArtifact:
    run_id: str
    request_id: str
    request_text: str
    status: str
    parsed: RequestConfig | None = None
    config: CanonicalConfig | None = None
    selection: DataSelection | None = None
    model: ModelCard | None = None
    trace: HPOTrace | None = None
    plan: DeploymentPlan | None = None
    stage_timings: Mapping[str, float] = field(default_factory=dict)
    versions: str = ""
    error: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ContractError(f"unknown run status {self.status!r}")
        if self.status == "completed":
            stages = (self.config, self.selection, self.model, self.trace, self.plan)
            if any(s is None for s in stages):
                raise ContractError("completed run must populate all five stages")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "request_id": self.request_id,
            "request_text": self.request_text,
            "status": self.status,
            "parsed": None if self.parsed is None else config_to_obj(self.parsed),
            "config": None if self.config is None else config_to_obj(self.config),
            "selection": None
            if self.selection is None
            else _selection_obj(self.selection),
            "model": None if self.model is None else _model_card_obj(self.model),
            "trace": None if self.trace is None else self.trace.to_json_dict(),
            "plan": None if self.plan is None else self.plan.to_json_dict(),
            "stage_timings": dict(self.stage_timings),
            "versions": self.versions,
            "error": self.error,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "RunArtifact":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SchemaWarning)
            parsed = (
                None
                if obj["parsed"] is None
                else config_from_obj(obj["parsed"], mode="lenient")
            )
            config = (
                None
                if obj["config"] is None
                else canonicalize(config_from_obj(obj["config"], mode="lenient"))
            )
        return cls(
            run_id=str(obj["run_id"]),
            request_id=str(obj["request_id"]),
            request_text=str(obj["request_text"]),
            status=str(obj["status"]),
            parsed=parsed,
            config=config,
            selection=None
            if obj["selection"] is None
            else _selection_from(obj["selection"]),
            model=None if obj["model"] is None else _model_card_from(obj["model"]),
            trace=None if obj["trace"] is None else HPOTrace.from_json_dict(obj["trace"]),
            plan=None
            if obj["plan"] is None
            else DeploymentPlan.from_json_dict(obj["plan"]),
            stage_timings={k: float(v) for k, v in obj["stage_timings"].items()},
            versions=str(obj.get("versions", "")),
            error=str(obj.get("error", "")),
        )


def _data_card_obj(card: DataCard) -> dict[str, Any]:
    return {
        "name": card.name,
        "task": card.task.value,
        "classes": list(card.classes),
        "modality": card.modality,
        "scenarios": list(card.scenarios),
        "image_count": card.image_count,
        "source": card.source,
    }


def _data_card_from(obj: Mapping[str, Any]) -> DataCard:
    return DataCard(
        name=str(obj["name"]),
        task=Task(obj["task"]),
        classes=tuple(obj["classes"]),
        modality=str(obj["modality"]),
        scenarios=tuple(obj["scenarios"]),
        image_count=int(obj["image_count"]),
        source=str(obj.get("source", "")),
    )


def _model_card_obj(card: ModelCard) -> dict[str, Any]:
    return {
        "name": card.name,
        "task": card.task.value,
        "structure": card.structure,
        "params(M)": card.params_m,
        "flops(G)": card.flops_g,
        "speed(ms)": card.speed_ms,
        "metric": card.performance.name,
        "performance": card.performance.value,
        "source": card.source,
    }


def _model_card_from(obj: Mapping[str, Any]) -> ModelCard:
    return ModelCard(
        name=str(obj["name"]),
        task=Task(obj["task"]),
        structure=str(obj["structure"]),
        params_m=float(obj["params(M)"]),
        flops_g=float(obj["flops(G)"]),
        speed_ms=float(obj["speed(ms)"]),
        performance=MetricTarget(str(obj["metric"]), float(obj["performance"])),
        source=str(obj.get("source", "")),
    )


def _selection_obj(sel: DataSelection) -> dict[str, Any]:
    return {
        "cards": [_data_card_obj(c) for c in sel.cards],
        "class_map": {term: list(classes) for term, classes in sel.class_map.items()},
        "uncovered": list(sel.uncovered),
        "total_images": sel.total_images,
    }


def _selection_from(obj: Mapping[str, Any]) -> DataSelection:
    return DataSelection(
        cards=tuple(_data_card_from(c) for c in obj["cards"]),
        class_map={k: tuple(v) for k, v in obj["class_map"].items()},
        uncovered=tuple(obj["uncovered"]),
        total_images=int(obj["total_images"]),
    )


def _tool_versions_digest() -> str:
    body = json.dumps(
        {"package": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        sort_keys=True,
    )
    return hashlib.sha256(body.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class PipelineOptions:
    strategy: Strategy | str = Strategy.BAYES_GP
    budget_rounds: int = 5
    rng_seed: int = 0
    zoo_path: str | Path | None = None
    taxonomy_path: str | Path | None = None
    client: ChatClient | None = None
    executor: TrainerExecutor | None = None
    runs_dir: str | Path | None = "runs"
    request_id: str = ""
    run_id: str = ""
    clock: Callable[[], float] = time.perf_counter
    pool_size: int = DEFAULT_POOL_SIZE

    # registry/taxonomy preloaded by callers that run many requests
    registry: Registry | None = None
    taxonomy: Taxonomy | None = None


def _num_classes(selection: DataSelection) -> int:
    matched = {c for classes in selection.class_map.values() for c in classes}
    if matched:
        return len(matched)
    return len(selection.cards[0].classes)


def run_pipeline(request_text: str, options: PipelineOptions | None = None) -> RunArtifact:
    """Drive one request through all five stages and persist the artifact.

    A stage failure stops the run with the matching failed_* status; the
    artifact keeps everything produced before the failure plus the error
    text. With a scripted client and the simulated trainer the whole run
    is deterministic for a given seed.
    """
    opts = options or PipelineOptions()
    if opts.client is None:
        raise ContractError("pipeline needs a chat client for understanding")
    request_id = opts.request_id or hashlib.sha256(
        request_text.encode("utf-8")
    ).hexdigest()[:12]
    run_id = opts.run_id or f"run-{uuid.uuid4().hex[:12]}"
    timings: dict[str, float] = {}
    versions = _tool_versions_digest()

    def finish(status: str, error: str = "", **stages) -> RunArtifact:
        artifact = RunArtifact(
            run_id=run_id,
            request_id=request_id,
            request_text=request_text,
            status=status,
            stage_timings=dict(timings),
            versions=versions,
            error=error,
            **stages,
        )
        if opts.runs_dir is not None:
            persist_run(artifact, opts.runs_dir)
        return artifact

    # stage 1: request understanding
    started = opts.clock()
    try:
        parsed = llm_parse_request(opts.client, request_text)
        config = canonicalize(parsed)
    except (UnderstandingError, ClientError, SchemaError) as exc:
        timings["understand"] = opts.clock() - started
        return finish("failed_understanding", error=str(exc))
    timings["understand"] = opts.clock() - started

    # stage 2: data selection
    started = opts.clock()
    try:
        registry = opts.registry or load_zoo(opts.zoo_path or bundled_zoo_path())
        taxonomy = opts.taxonomy or load_taxonomy(
            opts.taxonomy_path or bundled_taxonomy_path()
        )
        selection = select_data(config, registry, taxonomy)
    except (SelectionError, ParseError, SchemaError, DuplicateError, TaxonomyError) as exc:
        timings["select_data"] = opts.clock() - started
        return finish(
            "failed_selection", error=str(exc), parsed=parsed, config=config
        )
    timings["select_data"] = opts.clock() - started

    # stage 3: model selection
    started = opts.clock()
    try:
        card = select_model(config, registry)
    except SelectionError as exc:
        timings["select_model"] = opts.clock() - started
        return finish(
            "failed_selection",
            error=str(exc),
            parsed=parsed,
            config=config,
            selection=selection,
        )
    timings["select_model"] = opts.clock() - started

    # stage 4: hyperparameter search over the training executor
    started = opts.clock()
    task = config.model.task
    context = HPOContext(
        num_classes=_num_classes(selection),
        dataset=selection.cards[0].name,
        model_name=card.name,
        params_m=card.params_m,
        flops_g=card.flops_g,
        reference_accuracy=card.performance.value,
        metric_name=METRIC_NAMES[task],
    )
    executor = opts.executor or SimulatedTrainer()
    try:
        trace = run_hpo(
            opts.strategy,
            opts.budget_rounds,
            executor,
            context,
            opts.rng_seed,
            task=task,
            request_id=request_id,
            model_card=card,
            data_summary=DataSummary(context.num_classes, selection.total_images),
            client=opts.client,
            pool_size=opts.pool_size,
        )
    except Exception as exc:
        timings["hpo"] = opts.clock() - started
        return finish(
            "failed_training",
            error=str(exc),
            parsed=parsed,
            config=config,
            selection=selection,
            model=card,
        )
    timings["hpo"] = opts.clock() - started

    # stage 5: deployment plan
    started = opts.clock()
    plan = make_deployment_plan(config, card, trace.best.setting)
    timings["deploy"] = opts.clock() - started

    return finish(
        "completed",
        parsed=parsed,
        config=config,
        selection=selection,
        model=card,
        trace=trace,
        plan=plan,
    )


def _canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def persist_run(artifact: RunArtifact, runs_dir: str | Path) -> Path:
    """Write artifact.json (digest wrapped), trace.jsonl, and plan.json."""
    run_dir = Path(runs_dir) / artifact.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    obj = artifact.to_json_dict()
    digest = hashlib.sha256(_canonical_json(obj).encode("utf-8")).hexdigest()
    envelope = {"sha256": digest, "artifact": obj}
    (run_dir / "artifact.json").write_text(
        json.dumps(envelope, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    trial_lines = []
    if artifact.trace is not None:
        trial_lines = [
            _canonical_json(t.to_json_dict()) for t in artifact.trace.trials
        ]
    (run_dir / "trace.jsonl").write_text(
        "".join(line + "\n" for line in trial_lines), encoding="utf-8"
    )
    if artifact.plan is not None:
        (run_dir / "plan.json").write_text(
            json.dumps(artifact.plan.to_json_dict(), indent=2, ensure_ascii=False)
            + "\n",
            encoding="utf-8",
        )
    return run_dir


def load_run(path: str | Path) -> RunArtifact:
    """Read an artifact back, refusing corrupt or truncated files."""
    p = Path(path)
    if p.is_dir():
        p = p / "artifact.json"
    try:
        raw = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise IntegrityError(f"cannot read artifact: {exc}") from exc
    try:
        envelope = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"artifact file is not valid JSON: {exc}") from exc
    if (
        not isinstance(envelope, dict)
        or "sha256" not in envelope
        or "artifact" not in envelope
    ):
        raise IntegrityError("artifact file missing digest envelope")
    obj = envelope["artifact"]
    digest = hashlib.sha256(_canonical_json(obj).encode("utf-8")).hexdigest()
    if digest != envelope["sha256"]:
        raise IntegrityError("artifact digest mismatch")
    try:
        return RunArtifact.from_json_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError(f"artifact fields malformed: {exc}") from exc
