"""Server side of the line-delimited context protocol.

One JSON object per UTF-8 line, newline terminated. The session opens with a
hello that fixes the context dimension, the action vocabulary, and per-action
embedding vectors; afterwards every context_request is answered by exactly one
context_response, in order, with no interleaving.
"""
from __future__ import annotations

import json
from typing import Mapping

MESSAGE_TYPES = (
    "hello",
    "context_request",
    "context_response",
    "action_taken",
    "end_episode",
    "error",
)

FORMAT_VERSION = 1


class ProtocolError(RuntimeError):
    pass


def encode(message: Mapping) -> str:
    if message.get("type") not in MESSAGE_TYPES:
        raise ProtocolError(f"refusing to encode message type {message.get('type')!r}")
    return json.dumps(message, separators=(",", ":")) + "\n"


def decode(line: str) -> dict:
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed line: {exc}") from None
    if not isinstance(message, dict) or message.get("type") not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message in {line[:80]!r}")
    return message


def hello_message(dimension: int, actions, embeddings: Mapping) -> dict:
    return {
        "type": "hello",
        "format_version": FORMAT_VERSION,
        "d": int(dimension),
        "actions": list(actions),
        "embeddings": {a: [float(v) for v in vec] for a, vec in embeddings.items()},
    }


def context_response(task_id: str, step: int, vector, thought_text: str) -> dict:
    return {
        "type": "context_response",
        "task_id": task_id,
        "step": int(step),
        "context": [float(v) for v in vector],
        "thought_text": thought_text,
    }


def error_message(task_id, message: str) -> dict:
    return {"type": "error", "task_id": task_id, "message": message}
