"""Shared fixtures.

The running example is a smart-agriculture request: classify crops from
drone imagery under a FLOPs budget, deployed with ncnn on cpu. Its expected
parse exercises every branch of the request schema (free text, enums,
quantities with units, a metric list) and the bundled zoo can satisfy it,
so the same pair drives parsing, selection, grading, and pipeline tests.
"""

from __future__ import annotations

import copy
import json

import pytest

from reqforge.llm import PARSE_MARKER, ScriptedClient
from reqforge.orchestrator import bundled_taxonomy_path, bundled_zoo_path
from reqforge.schema import config_from_obj

CROPS_REQUEST = (
    "I am interested in developing a smart agriculture system that can "
    "classify different types of crops in the field using drone-captured "
    "RGB images. The model should be able to classify common crops with an "
    "Accuracy of 0.75 or higher, and the model should be able to infer a "
    "sample within 500 GFLOPs. The model should be deployed using ncnn for "
    "efficient inference and be lightweight enough to run on a standard "
    "laptop without requiring a GPU."
)

CROPS_PARSE = {
    "data": {
        "description": (
            "Drone-captured RGB images of crops in the field, "
            "the dataset contains common crops."
        ),
        "scenario": "agriculture",
        "object": ["crops"],
        "modality": "rgb",
        "specific": [],
    },
    "model": {
        "description": (
            "A model that can classify common crops with an Accuracy "
            "of 75% or higher."
        ),
        "task": "classification",
        "specific_model": "none",
        "speed": {"value": 0, "unit": "none"},
        "flops": {"value": 500, "unit": "GFLOPs"},
        "parameters": {"value": 0, "unit": "none"},
        "metrics": [{"name": "accuracy", "value": 0.75}],
    },
    "deploy": {
        "description": "Standard laptop without requiring a GPU.",
        "device": "cpu",
        "inference engine": "ncnn",
    },
}


@pytest.fixture
def crops_request_text() -> str:
    return CROPS_REQUEST


@pytest.fixture
def crops_parse_obj() -> dict:
    return copy.deepcopy(CROPS_PARSE)


@pytest.fixture
def crops_config(crops_parse_obj):
    return config_from_obj(crops_parse_obj)


@pytest.fixture
def crops_parse_reply() -> str:
    return PARSE_MARKER + json.dumps(CROPS_PARSE)


def _make_parse_client(*replies: str) -> ScriptedClient:
    return ScriptedClient(replies=list(replies))


@pytest.fixture
def make_parse_client():
    return _make_parse_client


@pytest.fixture
def crops_client(crops_parse_reply) -> ScriptedClient:
    return _make_parse_client(crops_parse_reply)


@pytest.fixture(scope="session")
def zoo_path():
    return bundled_zoo_path()


@pytest.fixture(scope="session")
def taxonomy_path():
    return bundled_taxonomy_path()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture()
def acceptance_report():
    """Record one pass/fail line per acceptance criterion and assert it."""

    def _report(num: int, name: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {num:02d} {name}"
        if detail:
            line += f" [{detail}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
