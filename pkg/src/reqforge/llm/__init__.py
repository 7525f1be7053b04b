"""Chat plumbing: clients, prompt renderers, extraction, and operations."""

from .client import (
    ChatClient,
    ChatMessage,
    HttpChatClient,
    ScriptedClient,
    messages_digest,
)
from .extract import PARSE_MARKER, REQUIREMENT_MARKER, extract_json
from .ops import llm_parse_request, llm_propose_setting
from .prompts import (
    HPOContext,
    asset_text,
    default_generation_constraints,
    default_generation_examples,
    default_parse_demos,
    render_generation_prompt,
    render_hpo_messages,
    render_parsing_prompt,
)

__all__ = [
    "ChatClient",
    "ChatMessage",
    "HttpChatClient",
    "ScriptedClient",
    "messages_digest",
    "PARSE_MARKER",
    "REQUIREMENT_MARKER",
    "extract_json",
    "llm_parse_request",
    "llm_propose_setting",
    "HPOContext",
    "asset_text",
    "default_generation_constraints",
    "default_generation_examples",
    "default_parse_demos",
    "render_generation_prompt",
    "render_hpo_messages",
    "render_parsing_prompt",
]
