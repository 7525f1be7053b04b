"""Pull JSON payloads out of free-form model replies."""

from __future__ import annotations

import json
from typing import Any

from ..errors import ExtractError

PARSE_MARKER = "###parse###"
REQUIREMENT_MARKER = "###requirement###"


def extract_json(llm_output: str, marker: str | None = None) -> dict[str, Any]:
    """Return the first balanced top-level JSON object in a reply.

    With a marker, only text after its last occurrence is scanned; if the
    marker does not occur, the whole reply is scanned. Surrounding prose
    and code fences are tolerated. Raises ExtractError (carrying the raw
    reply) when no object parses.
    """
    text = llm_output
    if marker:
        pos = text.rfind(marker)
        if pos >= 0:
            text = text[pos + len(marker):]
    decoder = json.JSONDecoder()
    idx = text.find("{")
    while idx >= 0:
        try:
            value, _ = decoder.raw_decode(text, idx)
        except json.JSONDecodeError:
            idx = text.find("{", idx + 1)
            continue
        if isinstance(value, dict):
            return value
        idx = text.find("{", idx + 1)
    raise ExtractError("no JSON object found in reply", raw=llm_output)
