"""Prompt renderers.

The wording lives in text assets with {{slot}} placeholders and is kept
byte-stable (tests pin checksums); renderers only fill slots and assemble
chat transcripts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib.resources import files
from typing import Any, Sequence

from ..errors import ContractError
from ..hpo.space import HyperparameterSetting, SearchSpace, space_prompt_json
from .client import ChatMessage
from .extract import REQUIREMENT_MARKER

_GENERATION_CONDITIONS_LINE = (
    "The following are the conditions that need to be met "
    "for the requirements you provide:"
)
_GENERATION_EXAMPLES_LINE = "Here are some examples you can refer to:"
_PARSING_CASES_LINE = "Here are some cases you can refer to:"


def asset_text(name: str) -> str:
    return files("reqforge").joinpath("assets", name).read_text(encoding="utf-8")


def _drop_block(text: str, heading: str, slot: str) -> str:
    lines = [l for l in text.splitlines() if l != heading and l != slot]
    return "\n".join(lines)


def default_generation_constraints() -> list[str]:
    return [l for l in asset_text("generation_constraints.txt").splitlines() if l]


def default_generation_examples() -> list[str]:
    return [l for l in asset_text("generation_examples.txt").splitlines() if l]


def default_parse_demos() -> list[str]:
    """Demo blocks, each already formatted as requirement plus parse."""
    return [
        block.strip()
        for block in asset_text("parsing_examples.txt").split("\n\n")
        if block.strip()
    ]


def render_generation_prompt(
    n: int,
    constraints: Sequence[str] | None = None,
    examples: Sequence[str] | None = None,
) -> list[ChatMessage]:
    """Prompt asking a simulated client for n requests.

    Empty constraint or example lists drop the matching block entirely.
    """
    if n < 1:
        raise ContractError("need n >= 1 generated requests")
    constraints = (
        default_generation_constraints() if constraints is None else list(constraints)
    )
    examples = (
        default_generation_examples() if examples is None else list(examples)
    )
    text = asset_text("generation_system.txt").replace("{{count}}", str(n))
    if constraints:
        numbered = "\n".join(f"{i}. {c}" for i, c in enumerate(constraints, start=1))
        text = text.replace("{{Request Generation Constraints}}", numbered)
    else:
        text = _drop_block(
            text, _GENERATION_CONDITIONS_LINE, "{{Request Generation Constraints}}"
        )
    if examples:
        shown = "\n".join(f"{REQUIREMENT_MARKER}{e}" for e in examples)
        text = text.replace("{{Request Generation Examples}}", shown)
    else:
        text = _drop_block(
            text, _GENERATION_EXAMPLES_LINE, "{{Request Generation Examples}}"
        )
    return [ChatMessage("user", text.strip())]


def render_parsing_prompt(
    request_text: str, demos: Sequence[str] | None = None
) -> list[ChatMessage]:
    """System prompt with schema and demos; user turn carries the request."""
    demos = default_parse_demos() if demos is None else list(demos)
    text = asset_text("parsing_system.txt").replace(
        "{{JSON Format of Configuration}}", asset_text("config_format.json").strip()
    )
    if demos:
        text = text.replace("{{Request Parsing Examples}}", "\n".join(demos))
    else:
        text = _drop_block(text, _PARSING_CASES_LINE, "{{Request Parsing Examples}}")
    return [
        ChatMessage("system", text.strip()),
        ChatMessage("user", f"{REQUIREMENT_MARKER}{request_text}"),
    ]


@dataclass(frozen=True)
class HPOContext:
    """Data and model block shown to the tuner, plus the task metric name."""

    num_classes: int
    dataset: str
    model_name: str
    params_m: float
    flops_g: float
    reference_accuracy: float
    metric_name: str

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "data": {"num_classes": self.num_classes, "dataset": self.dataset},
            "model": {
                "name": self.model_name,
                "params(M)": self.params_m,
                "flops(G)": self.flops_g,
                "accuracy": self.reference_accuracy,
            },
        }


def render_hpo_messages(
    round: int,
    context: HPOContext,
    space: SearchSpace,
    history: Sequence[tuple[HyperparameterSetting, float]],
) -> list[ChatMessage]:
    """Transcript for the given round; history must hold round - 1 entries.

    Round 1 is the system prompt plus the context JSON; later rounds append
    each prior setting verbatim and the observed metric feedback.
    """
    if round < 1:
        raise ContractError("rounds are 1-based")
    if len(history) != round - 1:
        raise ContractError(
            f"round {round} needs {round - 1} history entries, got {len(history)}"
        )
    system = asset_text("hpo_system.txt").replace(
        "{{Hyperparameter search space definition in JSON format}}",
        space_prompt_json(space),
    )
    feedback = asset_text("hpo_feedback.txt").strip()
    messages = [
        ChatMessage("system", system.strip()),
        ChatMessage("user", json.dumps(context.to_json_dict())),
    ]
    for setting, value in history:
        messages.append(ChatMessage("assistant", json.dumps(setting.to_json_dict())))
        messages.append(
            ChatMessage(
                "user",
                feedback.replace("{{metric}}", context.metric_name).replace(
                    "{{value}}", f"{value:.4f}"
                ),
            )
        )
    return messages
