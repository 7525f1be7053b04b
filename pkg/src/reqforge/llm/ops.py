"""Model-backed operations: request parsing and setting proposals.

Both operations allow one repair round: the failing reply goes back to the
model together with the error text, and a second failure raises.
"""

from __future__ import annotations

import warnings
from typing import Sequence

from ..errors import (
    ExtractError,
    ParseError,
    ProposalError,
    SchemaError,
    UnderstandingError,
)
from ..hpo.space import HyperparameterSetting, Optimizer, Schedule, SearchSpace
from ..schema import RequestConfig, canonicalize, config_from_obj
from .client import ChatClient, ChatMessage
from .extract import PARSE_MARKER, extract_json
from .prompts import HPOContext, render_hpo_messages, render_parsing_prompt


def _repair_turn(messages, reply: str, error: Exception) -> list[ChatMessage]:
    return list(messages) + [
        ChatMessage("assistant", reply),
        ChatMessage(
            "user",
            f"Your reply could not be used: {error} "
            f"Please answer again with a corrected {PARSE_MARKER} JSON payload.",
        ),
    ]


def llm_parse_request(
    client: ChatClient,
    request_text: str,
    demos: Sequence[str] | None = None,
) -> RequestConfig:
    """Parse a natural-language request through a chat model.

    The reply is read leniently (unknown keys are kept and warned about)
    and checked by canonicalization so out-of-range metric targets also
    trigger the repair round. Two failures raise UnderstandingError.
    """
    messages = render_parsing_prompt(request_text, demos)
    last_error: Exception | None = None
    for attempt in range(2):
        reply = client.complete(messages)
        try:
            obj = extract_json(reply, marker=PARSE_MARKER)
            cfg = config_from_obj(obj, mode="lenient")
            canonicalize(cfg)  # validation only; the caller canonicalizes
            return cfg
        except (ExtractError, ParseError, SchemaError) as exc:
            last_error = exc
            if attempt == 0:
                messages = _repair_turn(messages, reply, exc)
    raise UnderstandingError(
        f"could not parse request after repair retry: {last_error}"
    ) from last_error


def _clamp(value: float, bounds: tuple[float, float], name: str) -> float:
    lo, hi = bounds
    if value < lo or value > hi:
        clamped = min(max(value, lo), hi)
        warnings.warn(
            f"clamped {name} {value:g} into [{lo:g}, {hi:g}]", stacklevel=3
        )
        return clamped
    return value


def _resolve_choice(raw, enum_cls, name: str):
    if not isinstance(raw, str):
        raise SchemaError(f"{name} must be a string")
    try:
        return enum_cls(raw)
    except ValueError:
        pass
    for member in enum_cls:
        if member.value.lower() == raw.strip().lower():
            return member
    raise SchemaError(f"unknown {name} {raw!r}")


def _setting_from_reply(obj: dict, space: SearchSpace) -> HyperparameterSetting:
    for key in (
        "iters",
        "batch size",
        "optimizer",
        "learning rate",
        "weight decay",
        "lr schedule",
    ):
        if key not in obj:
            raise SchemaError(f"missing hyperparameter {key!r}")

    def number(key: str) -> float:
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"{key!r} must be a number")
        return float(v)

    optimizer = _resolve_choice(obj["optimizer"], Optimizer, "optimizer")
    schedule = _resolve_choice(obj["lr schedule"], Schedule, "lr schedule")
    if optimizer not in space.optimizers:
        raise SchemaError(f"optimizer {optimizer.value!r} not in search space")
    if schedule not in space.schedules:
        raise SchemaError(f"lr schedule {schedule.value!r} not in search space")
    return HyperparameterSetting(
        optimizer=optimizer,
        schedule=schedule,
        learning_rate=_clamp(number("learning rate"), space.lr_bounds, "learning rate"),
        weight_decay=_clamp(number("weight decay"), space.wd_bounds, "weight decay"),
        iters=int(
            _clamp(round(number("iters")), space.iter_bounds, "iters")
        ),
        batch_size=int(
            _clamp(round(number("batch size")), space.batch_bounds, "batch size")
        ),
    )


def llm_propose_setting(
    client: ChatClient,
    context: HPOContext,
    space: SearchSpace,
    history: Sequence[tuple[HyperparameterSetting, float]],
) -> HyperparameterSetting:
    """Ask the model for the next setting given the observed history.

    Out-of-range numbers are clamped with a warning; an unusable reply
    (unknown categorical, missing key, no JSON) gets one repair retry and
    then raises ProposalError.
    """
    messages = render_hpo_messages(len(history) + 1, context, space, history)
    last_error: Exception | None = None
    for attempt in range(2):
        reply = client.complete(messages)
        try:
            return _setting_from_reply(extract_json(reply), space)
        except (ExtractError, SchemaError) as exc:
            last_error = exc
            if attempt == 0:
                messages = _repair_turn(messages, reply, exc)
    raise ProposalError(
        f"could not obtain a valid setting after repair retry: {last_error}"
    ) from last_error
