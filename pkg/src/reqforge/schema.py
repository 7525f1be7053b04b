"""Request configuration schema.

A request config is a three-part JSON document (data, model, deploy) that
captures what a user asked for in natural language. This module parses and
validates the wire format, normalizes quantities to canonical units, and
serializes configs back to JSON with exact key spelling, including the
"inference engine" key which contains a space.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

from .errors import ParseError, SchemaError, UnitError


class SchemaWarning(UserWarning):
    """Tolerated deviation found while parsing in lenient mode."""


class Task(str, Enum):
    CLASSIFICATION = "classification"
    DETECTION = "detection"
    SEGMENTATION = "segmentation"
    KEYPOINT = "keypoint"


class Device(str, Enum):
    CPU = "cpu"
    GPU = "gpu"
    NONE = "none"


class Engine(str, Enum):
    ONNXRUNTIME = "onnxruntime"
    NCNN = "ncnn"
    OPENVINO = "openvino"
    NONE = "none"


# Multipliers take a quantity to its canonical unit: milliseconds per sample
# for speed, raw operation count for flops, raw count for parameters. fps is
# handled separately because it is a rate, not a scale factor.
SPEED_UNITS = {"ms": 1.0, "s": 1000.0, "min": 60000.0, "h": 3600000.0}
FLOPS_UNITS = {
    "FLOPs": 1.0,
    "MFLOPs": 1e6,
    "GFLOPs": 1e9,
    "TFLOPs": 1e12,
    "PFLOPs": 1e15,
    "EFLOPs": 1e18,
}
PARAM_UNITS = {"K": 1e3, "M": 1e6, "B": 1e9}

_UNIT_VOCAB = {
    "speed": set(SPEED_UNITS) | {"fps", "none"},
    "flops": set(FLOPS_UNITS) | {"none"},
    "parameters": set(PARAM_UNITS) | {"none"},
}


@dataclass(frozen=True)
class Quantity:
    """A numeric constraint with a unit; value 0 with unit none means unset."""

    value: float = 0.0
    unit: str = "none"


UNSET = Quantity()


@dataclass(frozen=True)
class MetricTarget:
    name: str
    value: float


@dataclass(frozen=True)
class DataRequirement:
    description: str = ""
    scenario: str = ""
    object: tuple[str, ...] = ()
    modality: str = ""
    specific: tuple[str, ...] = ()


@dataclass(frozen=True)
class ModelRequirement:
    task: Task
    description: str = ""
    specific_model: str = "none"
    speed: Quantity = UNSET
    flops: Quantity = UNSET
    parameters: Quantity = UNSET
    metrics: tuple[MetricTarget, ...] = ()


@dataclass(frozen=True)
class DeployRequirement:
    description: str = ""
    device: Device = Device.NONE
    engine: Engine = Engine.NONE


@dataclass(frozen=True)
class RequestConfig:
    """Validated request. extras holds unknown keys kept by lenient parsing,
    keyed by dotted path (e.g. "model.speed.note")."""

    data: DataRequirement
    model: ModelRequirement
    deploy: DeployRequirement
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class CanonicalConfig:
    """A RequestConfig after canonicalization, plus derived unit-free fields.

    Free text is lowercased with collapsed whitespace, metric values are in
    [0, 1], and each quantity is resolved to a canonical magnitude or None
    when the constraint is unset.
    """

    data: DataRequirement
    model: ModelRequirement
    deploy: DeployRequirement
    speed_ms_per_sample: float | None
    flops_total: float | None
    parameter_count: float | None
    extras: dict[str, Any] = field(default_factory=dict)

    def to_request_config(self) -> RequestConfig:
        return RequestConfig(self.data, self.model, self.deploy, dict(self.extras))


_DATA_KEYS = ("description", "scenario", "object", "modality", "specific")
_MODEL_KEYS = (
    "description",
    "task",
    "specific_model",
    "speed",
    "flops",
    "parameters",
    "metrics",
)
_DEPLOY_KEYS = ("description", "device", "inference engine")


def _fail_constant(name: str) -> float:
    raise SchemaError(f"non-finite number {name!r} is not allowed")


class _Parser:
    """Single-document parser; mode is 'strict' or 'lenient'."""

    def __init__(self, mode: str):
        if mode not in ("strict", "lenient"):
            raise ValueError(f"unknown parse mode {mode!r}")
        self.lenient = mode == "lenient"
        self.extras: dict[str, Any] = {}

    def warn(self, message: str) -> None:
        warnings.warn(message, SchemaWarning, stacklevel=4)

    def unknown(self, path: str, value: Any) -> None:
        if not self.lenient:
            raise SchemaError(f"unknown key {path!r}")
        self.extras[path] = value
        self.warn(f"ignoring unknown key {path!r}")

    def absent(self, obj: dict, key: str, path: str) -> bool:
        # JSON null is treated as absent in lenient mode only.
        if key not in obj:
            return True
        if obj[key] is None:
            if not self.lenient:
                raise SchemaError(f"{path} must not be null")
            self.warn(f"treating null {path} as absent")
            return True
        return False

    def text(self, obj: dict, key: str, path: str, default: str = "") -> str:
        if self.absent(obj, key, path):
            return default
        v = obj[key]
        if not isinstance(v, str):
            raise SchemaError(f"{path} must be a string")
        return v

    def text_list(self, obj: dict, key: str, path: str) -> tuple[str, ...]:
        if self.absent(obj, key, path):
            return ()
        v = obj[key]
        if not isinstance(v, list) or any(not isinstance(s, str) for s in v):
            raise SchemaError(f"{path} must be a list of strings")
        return tuple(v)

    def number(self, obj: dict, key: str, path: str, default: float = 0.0) -> float:
        if self.absent(obj, key, path):
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"{path} must be a number")
        v = float(v)
        if not math.isfinite(v):
            raise SchemaError(f"{path} must be finite")
        if v < 0:
            raise SchemaError(f"{path} must be non-negative")
        return v

    def enum_token(self, raw: str, allowed: set[str] | dict, path: str) -> str:
        if raw in allowed:
            return raw
        if self.lenient:
            folded = {a.lower(): a for a in allowed}
            hit = folded.get(raw.strip().lower())
            if hit is not None:
                self.warn(f"normalized {path} {raw!r} to {hit!r}")
                return hit
        raise SchemaError(f"{path} has unsupported value {raw!r}")

    def quantity(self, obj: dict, key: str, kind: str, path: str) -> Quantity:
        if self.absent(obj, key, path):
            return UNSET
        v = obj[key]
        if not isinstance(v, dict):
            raise SchemaError(f"{path} must be an object")
        value = self.number(v, "value", f"{path}.value")
        unit = "none"
        if not self.absent(v, "unit", f"{path}.unit"):
            raw = v["unit"]
            if not isinstance(raw, str):
                raise SchemaError(f"{path}.unit must be a string")
            unit = self.enum_token(raw, _UNIT_VOCAB[kind], f"{path}.unit")
        for extra in set(v) - {"value", "unit"}:
            self.unknown(f"{path}.{extra}", v[extra])
        return Quantity(value, unit)

    def metrics(self, obj: dict, path: str) -> tuple[MetricTarget, ...]:
        if self.absent(obj, "metrics", path):
            return ()
        v = obj["metrics"]
        if not isinstance(v, list):
            raise SchemaError(f"{path} must be a list")
        out = []
        for i, item in enumerate(v):
            ipath = f"{path}[{i}]"
            if not isinstance(item, dict):
                raise SchemaError(f"{ipath} must be an object")
            name = self.text(item, "name", f"{ipath}.name")
            value = self.number(item, "value", f"{ipath}.value")
            for extra in set(item) - {"name", "value"}:
                if not self.lenient:
                    raise SchemaError(f"unknown key {ipath}.{extra}")
                self.warn(f"dropping unknown key {ipath}.{extra}")
            out.append(MetricTarget(name, value))
        return tuple(out)

    def section(self, root: dict, name: str) -> dict:
        if self.absent(root, name, name):
            return {}
        v = root[name]
        if not isinstance(v, dict):
            raise SchemaError(f"{name} must be an object")
        return v

    def parse(self, root: Any) -> RequestConfig:
        if not isinstance(root, dict):
            raise SchemaError("top-level config must be an object")

        data_obj = self.section(root, "data")
        model_obj = self.section(root, "model")
        deploy_obj = self.section(root, "deploy")
        for extra in set(root) - {"data", "model", "deploy"}:
            self.unknown(extra, root[extra])

        data = DataRequirement(
            description=self.text(data_obj, "description", "data.description"),
            scenario=self.text(data_obj, "scenario", "data.scenario"),
            object=self.text_list(data_obj, "object", "data.object"),
            modality=self.text(data_obj, "modality", "data.modality"),
            specific=self.text_list(data_obj, "specific", "data.specific"),
        )
        for extra in set(data_obj) - set(_DATA_KEYS):
            self.unknown(f"data.{extra}", data_obj[extra])

        if self.absent(model_obj, "task", "model.task"):
            raise SchemaError("model.task is required")
        raw_task = model_obj["task"]
        if not isinstance(raw_task, str):
            raise SchemaError("model.task must be a string")
        task = Task(self.enum_token(raw_task, {t.value for t in Task}, "model.task"))

        model = ModelRequirement(
            task=task,
            description=self.text(model_obj, "description", "model.description"),
            specific_model=self.text(
                model_obj, "specific_model", "model.specific_model", default="none"
            ),
            speed=self.quantity(model_obj, "speed", "speed", "model.speed"),
            flops=self.quantity(model_obj, "flops", "flops", "model.flops"),
            parameters=self.quantity(
                model_obj, "parameters", "parameters", "model.parameters"
            ),
            metrics=self.metrics(model_obj, "model.metrics"),
        )
        for extra in set(model_obj) - set(_MODEL_KEYS):
            self.unknown(f"model.{extra}", model_obj[extra])

        device = Device.NONE
        if not self.absent(deploy_obj, "device", "deploy.device"):
            raw = deploy_obj["device"]
            if not isinstance(raw, str):
                raise SchemaError("deploy.device must be a string")
            device = Device(
                self.enum_token(raw, {d.value for d in Device}, "deploy.device")
            )
        engine = Engine.NONE
        if not self.absent(deploy_obj, "inference engine", "deploy.inference engine"):
            raw = deploy_obj["inference engine"]
            if not isinstance(raw, str):
                raise SchemaError("deploy.inference engine must be a string")
            engine = Engine(
                self.enum_token(
                    raw, {e.value for e in Engine}, "deploy.inference engine"
                )
            )
        deploy = DeployRequirement(
            description=self.text(deploy_obj, "description", "deploy.description"),
            device=device,
            engine=engine,
        )
        for extra in set(deploy_obj) - set(_DEPLOY_KEYS):
            self.unknown(f"deploy.{extra}", deploy_obj[extra])

        return RequestConfig(data, model, deploy, self.extras)


def config_from_obj(obj: Any, mode: str = "strict") -> RequestConfig:
    """Validate an already-decoded JSON object as a request config."""
    return _Parser(mode).parse(obj)


def parse_request_config(text: str, mode: str = "strict") -> RequestConfig:
    """Parse JSON text into a RequestConfig.

    Strict mode rejects unknown keys and nulls; lenient mode keeps unknown
    keys in extras and warns. model.task is mandatory in both modes.
    """
    try:
        obj = json.loads(text, parse_constant=_fail_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    return config_from_obj(obj, mode)


def normalize_units(quantity: Quantity, kind: str) -> float | None:
    """Resolve a quantity to its canonical magnitude, or None when unset.

    Canonical units: milliseconds per sample (speed), raw operation count
    (flops), raw count (parameters). fps converts as 1000/value and is
    rejected for value 0, which would divide by zero.
    """
    if kind not in _UNIT_VOCAB:
        raise ValueError(f"unknown quantity kind {kind!r}")
    if quantity.unit == "none":
        return None
    if quantity.unit not in _UNIT_VOCAB[kind]:
        raise UnitError(f"unit {quantity.unit!r} is not a {kind} unit")
    if quantity.unit == "fps":
        if quantity.value == 0:
            raise UnitError("fps with value 0 cannot be converted")
        return 1000.0 / quantity.value
    if quantity.value == 0:
        return None
    if kind == "speed":
        return quantity.value * SPEED_UNITS[quantity.unit]
    if kind == "flops":
        return quantity.value * FLOPS_UNITS[quantity.unit]
    return quantity.value * PARAM_UNITS[quantity.unit]


def _fold_text(s: str) -> str:
    return " ".join(s.lower().split())


def _fold_metric(m: MetricTarget, path: str) -> MetricTarget:
    value = m.value
    if value > 100:
        raise SchemaError(f"{path}.value {value} exceeds 100")
    if value > 1:
        value = value / 100.0
    return MetricTarget(_fold_text(m.name), value)


def canonicalize(cfg: RequestConfig) -> CanonicalConfig:
    """Normalize a config for comparison and selection.

    Free text is lowercased with whitespace collapsed, metric values given
    as percentages in (1, 100] are folded into [0, 1], and quantities are
    resolved to canonical magnitudes. Applying canonicalize to an already
    canonical config is a no-op.
    """
    data = replace(
        cfg.data,
        description=_fold_text(cfg.data.description),
        scenario=_fold_text(cfg.data.scenario),
        object=tuple(_fold_text(o) for o in cfg.data.object),
        modality=_fold_text(cfg.data.modality),
        specific=tuple(_fold_text(s) for s in cfg.data.specific),
    )
    model = replace(
        cfg.model,
        description=_fold_text(cfg.model.description),
        specific_model=_fold_text(cfg.model.specific_model) or "none",
        metrics=tuple(
            _fold_metric(m, f"model.metrics[{i}]")
            for i, m in enumerate(cfg.model.metrics)
        ),
    )
    deploy = replace(cfg.deploy, description=_fold_text(cfg.deploy.description))
    return CanonicalConfig(
        data=data,
        model=model,
        deploy=deploy,
        speed_ms_per_sample=normalize_units(cfg.model.speed, "speed"),
        flops_total=normalize_units(cfg.model.flops, "flops"),
        parameter_count=normalize_units(cfg.model.parameters, "parameters"),
        extras=dict(cfg.extras),
    )


def _compact_number(v: float) -> float | int:
    if isinstance(v, float) and v.is_integer() and abs(v) < 2**53:
        return int(v)
    return v


def _quantity_dict(q: Quantity) -> dict[str, Any]:
    return {"value": _compact_number(q.value), "unit": q.unit}


def config_to_obj(cfg: RequestConfig | CanonicalConfig) -> dict[str, Any]:
    """Build the wire-format dict with Listing-order keys and extras merged."""
    out: dict[str, Any] = {
        "data": {
            "description": cfg.data.description,
            "scenario": cfg.data.scenario,
            "object": list(cfg.data.object),
            "modality": cfg.data.modality,
            "specific": list(cfg.data.specific),
        },
        "model": {
            "description": cfg.model.description,
            "task": cfg.model.task.value,
            "specific_model": cfg.model.specific_model,
            "speed": _quantity_dict(cfg.model.speed),
            "flops": _quantity_dict(cfg.model.flops),
            "parameters": _quantity_dict(cfg.model.parameters),
            "metrics": [
                {"name": m.name, "value": _compact_number(m.value)}
                for m in cfg.model.metrics
            ],
        },
        "deploy": {
            "description": cfg.deploy.description,
            "device": cfg.deploy.device.value,
            "inference engine": cfg.deploy.engine.value,
        },
    }
    for path, value in cfg.extras.items():
        node = out
        parts = path.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return out


def serialize_config(cfg: RequestConfig | CanonicalConfig) -> str:
    """Serialize a config to JSON text; parse of the result restores cfg."""
    return json.dumps(config_to_obj(cfg), indent=2, ensure_ascii=False)
