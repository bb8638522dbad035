"""Line-delimited message protocol to a context extractor process.

One JSON object per UTF-8 line, newline terminated, strictly alternating
request/response. The server opens with a hello naming the context dimension,
the action vocabulary, and per-action embedding vectors for warm starts.
Message types: hello, context_request, context_response, action_taken,
end_episode, error.
"""
from __future__ import annotations

import hashlib
import json
import queue
import shlex
import subprocess
import threading
from typing import Iterable, Mapping

import numpy as np

from .episodes import ContextSourceError, Episode

MESSAGE_TYPES = (
    "hello",
    "context_request",
    "context_response",
    "action_taken",
    "end_episode",
    "error",
)

DEFAULT_TIMEOUT_S = 120.0


class ProtocolError(RuntimeError):
    """Lockstep violation, malformed message, or dimension mismatch."""


def encode_message(message: Mapping) -> str:
    if message.get("type") not in MESSAGE_TYPES:
        raise ProtocolError(f"cannot encode message type {message.get('type')!r}")
    return json.dumps(message, separators=(",", ":")) + "\n"


def decode_message(line: str) -> dict:
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed protocol line: {exc}") from None
    if not isinstance(message, dict) or message.get("type") not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type in {line[:80]!r}")
    return message


class SubprocessChannel:
    """Runs the extractor as a child process and exchanges lines on its
    standard streams. A reader thread feeds a queue so receives can time out."""

    def __init__(self, command: str | list):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lines: queue.Queue = queue.Queue()
        self._eof = False
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def send(self, message: Mapping) -> None:
        assert self._proc.stdin is not None
        if self._eof:
            raise ProtocolError("extractor process already exited")
        try:
            self._proc.stdin.write(encode_message(message))
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ProtocolError(f"extractor process closed its input: {exc}") from None

    def recv(self, timeout: float = DEFAULT_TIMEOUT_S) -> dict:
        if self._eof:
            raise ProtocolError("extractor process closed its output")
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise ProtocolError(f"no reply from extractor within {timeout:.0f}s") from None
        if line is None:
            self._eof = True
            raise ProtocolError("extractor process closed its output")
        return decode_message(line)

    def close(self, wait_s: float = 5.0) -> None:
        """EOF the child's stdin, give it a grace period, then kill."""
        if self._proc.stdin:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=wait_s)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


def mock_context_vector(seed: int, task_id: str, step: int, dimension: int) -> np.ndarray:
    """Deterministic pseudo-random vector keyed by (seed, task, step).

    Trajectory independent by construction, so a live session and a replay of
    its dump serve identical vectors. Uses sha256, not hash(), to stay stable
    across processes.
    """
    digest = hashlib.sha256(f"{seed}:{task_id}:{step}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(dimension)


def mock_embedding(seed: int, action: str, dimension: int) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}:embed:{action}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(dimension)


class InProcessMockChannel:
    """Channel speaking to an in-process stand-in for the extractor.

    Implements the server side of the lockstep state machine over the same
    encoded lines as the real transport, so the client code path is identical.
    Used by the primary test suite; no subprocess or model weights involved.
    """

    def __init__(self, actions: Iterable[str], dimension: int, seed: int = 0):
        self.actions = sorted(str(a) for a in actions)
        self.dimension = int(dimension)
        self.seed = int(seed)
        self._outbox: list[str] = []
        self._awaiting_response_for: tuple | None = None
        self.requests_served = 0
        hello = {
            "type": "hello",
            "format_version": 1,
            "d": self.dimension,
            "actions": self.actions,
            "embeddings": {
                a: [float(v) for v in mock_embedding(self.seed, a, self.dimension)]
                for a in self.actions
            },
        }
        self._outbox.append(encode_message(hello))

    def send(self, message: Mapping) -> None:
        message = decode_message(encode_message(message))  # validate round trip
        mtype = message["type"]
        if mtype == "context_request":
            if self._awaiting_response_for is not None:
                raise ProtocolError("second context_request before a response was read")
            key = (str(message["task_id"]), int(message["step"]))
            vector = mock_context_vector(self.seed, key[0], key[1], self.dimension)
            self._awaiting_response_for = key
            self._outbox.append(
                encode_message(
                    {
                        "type": "context_response",
                        "task_id": key[0],
                        "step": key[1],
                        "context": [float(v) for v in vector],
                        "thought_text": f"mock thought for {key[0]} step {key[1]}",
                    }
                )
            )
            self.requests_served += 1
        elif mtype in ("action_taken", "end_episode"):
            pass  # the mock has no trajectory state to extend
        else:
            raise ProtocolError(f"client sent server-only message {mtype!r}")

    def recv(self, timeout: float = DEFAULT_TIMEOUT_S) -> dict:
        del timeout
        if not self._outbox:
            raise ProtocolError("mock extractor has nothing to send")
        message = decode_message(self._outbox.pop(0))
        if message["type"] == "context_response":
            self._awaiting_response_for = None
        return message

    def close(self) -> None:
        pass


class LiveSource:
    """Context source backed by a protocol channel, one episode at a time.

    Enforces lockstep on the client side: every context_for sends exactly one
    request and consumes exactly one matching response. Selection outcomes and
    episode boundaries are forwarded so the extractor can extend trajectories.
    """

    def __init__(self, channel, timeout: float = DEFAULT_TIMEOUT_S):
        self.channel = channel
        self.timeout = float(timeout)
        hello = channel.recv(timeout=self.timeout)
        if hello.get("type") != "hello":
            raise ProtocolError(f"expected hello, got {hello.get('type')!r}")
        if not isinstance(hello.get("d"), int) or hello["d"] < 1:
            raise ProtocolError("hello lacks a valid dimension")
        self.dimension: int = hello["d"]
        self.actions: list[str] = [str(a) for a in hello.get("actions", [])]
        self.embeddings: dict[str, np.ndarray] = {}
        for action, vector in (hello.get("embeddings") or {}).items():
            arr = np.asarray(vector, dtype=np.float64)
            if arr.shape != (self.dimension,):
                raise ProtocolError(f"embedding for {action!r} has wrong dimension")
            self.embeddings[str(action)] = arr

    def context_for(self, episode: Episode, step: int) -> np.ndarray:
        request = {
            "type": "context_request",
            "task_id": episode.task_id,
            "step": int(step),
        }
        try:
            self.channel.send(request)
            reply = self.channel.recv(timeout=self.timeout)
        except ProtocolError as exc:
            raise ContextSourceError(str(exc)) from None
        if reply.get("type") == "error":
            raise ContextSourceError(
                f"extractor error for {episode.task_id!r}: {reply.get('message')}"
            )
        if reply.get("type") != "context_response":
            raise ContextSourceError(
                f"lockstep violation: expected context_response, got {reply.get('type')!r}"
            )
        if (
            str(reply.get("task_id")) != episode.task_id
            or int(reply.get("step", -1)) != step
        ):
            raise ContextSourceError(
                f"response for {(reply.get('task_id'), reply.get('step'))!r} does not "
                f"match request {(episode.task_id, step)!r}"
            )
        vector = np.asarray(reply.get("context", []), dtype=np.float64)
        if vector.shape != (self.dimension,) or not np.all(np.isfinite(vector)):
            raise ContextSourceError("context_response vector failed validation")
        return vector

    def notify_action(self, episode: Episode, step: int, action) -> None:
        try:
            self.channel.send(
                {
                    "type": "action_taken",
                    "task_id": episode.task_id,
                    "step": int(step),
                    "action": str(action),
                    "observation_text": "",
                }
            )
        except ProtocolError as exc:
            raise ContextSourceError(str(exc)) from None

    def notify_episode_end(self, episode: Episode, reason: str) -> None:
        try:
            self.channel.send(
                {
                    "type": "end_episode",
                    "task_id": episode.task_id,
                    "reason": reason,
                }
            )
        except ProtocolError as exc:
            raise ContextSourceError(str(exc)) from None

    def close(self) -> None:
        self.channel.close()
