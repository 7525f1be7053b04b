"""Zoo manifests and card selection.

A zoo manifest is one JSON file with "data" and "models" card lists. Model
cards keep the wire keys "params(M)" and "flops(G)". Selection takes a
canonical config: data cards are ranked and greedily accumulated until the
requested object terms are covered; model cards are filtered by the hard
constraints and the best scored card wins.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import DuplicateError, ParseError, SchemaError, SelectionError
from .schema import CanonicalConfig, MetricTarget, Task
from .textmatch import Taxonomy, expand_objects, similarity


@dataclass(frozen=True)
class DataCard:
    name: str
    task: Task
    classes: tuple[str, ...]
    modality: str
    scenarios: tuple[str, ...]
    image_count: int
    source: str = ""


@dataclass(frozen=True)
class ModelCard:
    name: str
    task: Task
    structure: str
    params_m: float
    flops_g: float
    speed_ms: float
    performance: MetricTarget
    source: str = ""


@dataclass(frozen=True)
class Registry:
    data: tuple[DataCard, ...]
    models: tuple[ModelCard, ...]
    digest: str

    def data_for_task(self, task: Task) -> tuple[DataCard, ...]:
        return tuple(c for c in self.data if c.task == task)

    def models_for_task(self, task: Task) -> tuple[ModelCard, ...]:
        return tuple(c for c in self.models if c.task == task)


@dataclass(frozen=True)
class DataSelection:
    """Chosen data cards plus the request-term coverage they achieve."""

    cards: tuple[DataCard, ...]
    class_map: dict[str, tuple[str, ...]]
    uncovered: tuple[str, ...]
    total_images: int


def _need(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{where}: missing key {key!r}")
    return obj[key]


def _positive_number(obj: dict, key: str, where: str) -> float:
    v = _need(obj, key, where)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
        raise SchemaError(f"{where}: {key!r} must be a positive number")
    return float(v)


def _text(obj: dict, key: str, where: str) -> str:
    v = _need(obj, key, where)
    if not isinstance(v, str) or not v:
        raise SchemaError(f"{where}: {key!r} must be a non-empty string")
    return v


def _text_list(obj: dict, key: str, where: str) -> tuple[str, ...]:
    v = _need(obj, key, where)
    if not isinstance(v, list) or any(not isinstance(s, str) for s in v):
        raise SchemaError(f"{where}: {key!r} must be a list of strings")
    return tuple(v)


def _parse_data_card(obj: dict, where: str) -> DataCard:
    return DataCard(
        name=_text(obj, "name", where),
        task=Task(_text(obj, "task", where)),
        classes=_text_list(obj, "classes", where),
        modality=_text(obj, "modality", where),
        scenarios=_text_list(obj, "scenarios", where),
        image_count=int(_positive_number(obj, "image_count", where)),
        source=str(obj.get("source", "")),
    )


def _parse_model_card(obj: dict, where: str) -> ModelCard:
    perf = _need(obj, "performance", where)
    if not isinstance(perf, dict):
        raise SchemaError(f"{where}: 'performance' must be an object")
    perf_value = perf.get("value")
    if isinstance(perf_value, bool) or not isinstance(perf_value, (int, float)):
        raise SchemaError(f"{where}: performance value must be a number")
    return ModelCard(
        name=_text(obj, "name", where),
        task=Task(_text(obj, "task", where)),
        structure=_text(obj, "structure", where),
        params_m=_positive_number(obj, "params(M)", where),
        flops_g=_positive_number(obj, "flops(G)", where),
        speed_ms=_positive_number(obj, "speed_ms", where),
        performance=MetricTarget(str(perf.get("name", "")), float(perf_value)),
        source=str(obj.get("source", "")),
    )


def load_zoo(path: str | Path) -> Registry:
    """Load a zoo manifest; the registry digest is the manifest sha256."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read zoo manifest {path}: {exc}") from exc
    try:
        obj = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed zoo manifest {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: manifest must be an object")

    data_cards = []
    for i, entry in enumerate(obj.get("data", [])):
        try:
            data_cards.append(_parse_data_card(entry, f"data[{i}]"))
        except ValueError as exc:
            raise SchemaError(f"data[{i}]: {exc}") from exc
    model_cards = []
    for i, entry in enumerate(obj.get("models", [])):
        try:
            model_cards.append(_parse_model_card(entry, f"models[{i}]"))
        except ValueError as exc:
            raise SchemaError(f"models[{i}]: {exc}") from exc

    for kind, cards in (("data", data_cards), ("model", model_cards)):
        seen = set()
        for card in cards:
            if card.name in seen:
                raise DuplicateError(f"duplicate {kind} card name {card.name!r}")
            seen.add(card.name)

    return Registry(
        data=tuple(data_cards),
        models=tuple(model_cards),
        digest=hashlib.sha256(raw).hexdigest(),
    )


def _fold(s: str) -> str:
    return " ".join(s.lower().split())


def select_data(
    cfg: CanonicalConfig, registry: Registry, taxonomy: Taxonomy
) -> DataSelection:
    """Pick data cards that cover the requested object terms.

    Cards of the request task are ranked (by similarity to cfg.data.specific
    when given, manifest order otherwise) and walked in order; a card is
    chosen when one of its classes matches a still-uncovered term after
    taxonomy expansion. Uncovered terms are reported, not raised.
    """
    candidates = registry.data_for_task(cfg.model.task)
    if not candidates:
        raise SelectionError(f"no data card for task {cfg.model.task.value!r}")

    if cfg.data.specific:
        scored = sorted(
            candidates,
            key=lambda c: max(similarity(s, c.name) for s in cfg.data.specific),
            reverse=True,
        )
    else:
        scored = list(candidates)

    terms = list(dict.fromkeys(cfg.data.object))
    if not terms:
        card = scored[0]
        return DataSelection((card,), {}, (), card.image_count)

    expansions = {t: expand_objects(t, taxonomy) for t in terms}
    chosen: list[DataCard] = []
    class_map: dict[str, tuple[str, ...]] = {}
    uncovered = set(terms)
    for card in scored:
        if not uncovered:
            break
        hits: dict[str, tuple[str, ...]] = {}
        for term in sorted(uncovered, key=terms.index):
            matched = tuple(
                c for c in card.classes if _fold(c) in expansions[term]
            )
            if matched:
                hits[term] = matched
        if hits:
            chosen.append(card)
            class_map.update(hits)
            uncovered.difference_update(hits)

    return DataSelection(
        cards=tuple(chosen),
        class_map=class_map,
        uncovered=tuple(t for t in terms if t in uncovered),
        total_images=sum(c.image_count for c in chosen),
    )


def select_model(cfg: CanonicalConfig, registry: Registry) -> ModelCard:
    """Pick the best model card under the request's hard constraints.

    Constraint comparisons are inclusive; an unset constraint filters
    nothing. Among surviving cards the (fuzzy score, performance) maximum
    wins, with manifest order breaking ties.
    """
    candidates = registry.models_for_task(cfg.model.task)
    if not candidates:
        raise SelectionError(f"no model card for task {cfg.model.task.value!r}")

    bounds = (
        ("parameters", cfg.parameter_count, lambda c: c.params_m * 1e6),
        ("flops", cfg.flops_total, lambda c: c.flops_g * 1e9),
        ("speed", cfg.speed_ms_per_sample, lambda c: c.speed_ms),
    )
    eliminated: dict[str, int] = {}
    surviving = []
    for card in candidates:
        violated = [
            name for name, limit, value in bounds
            if limit is not None and value(card) > limit
        ]
        if violated:
            for name in violated:
                eliminated[name] = eliminated.get(name, 0) + 1
        else:
            surviving.append(card)
    if not surviving:
        binding = ", ".join(f"{k} ({v} cards)" for k, v in sorted(eliminated.items()))
        raise SelectionError(
            f"no model for task {cfg.model.task.value!r} satisfies: {binding}"
        )

    wanted = cfg.model.specific_model

    def score(card: ModelCard) -> float:
        if wanted == "none":
            return 0.0
        return similarity(wanted, f"{card.name} {card.structure}")

    best = surviving[0]
    best_key = (score(best), best.performance.value)
    for card in surviving[1:]:
        key = (score(card), card.performance.value)
        if key > best_key:
            best, best_key = card, key
    return best
