"""Trace files, context sources, policy checkpoints, and result writers.

Trace format: UTF-8 line-delimited JSON. The first line is a header record
{"format_version", "d", "action_vocabulary", "embeddings"?, "recorded_by"?};
every following line is one step record {"task_id", "step", "context",
"candidates", "ground_truth", "prior_action"} with ground_truth present only
on the first record of an episode. Context floats are written with 9
significant digits; traces feed replay experiments, checkpoints carry exact
binary floats.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bandit import BanditPolicy
from .baselines import EpsilonGreedyPolicy, RandomPolicy, Ucb1Policy
from .episodes import ContextSourceError, Episode, make_episode

TRACE_FORMAT_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1


class TraceFormatError(ValueError):
    """Malformed trace file; message names the offending line and field."""

    def __init__(self, line_no: int, field_name: str, message: str):
        super().__init__(f"line {line_no}, field {field_name!r}: {message}")
        self.line_no = line_no
        self.field_name = field_name


class CheckpointError(ValueError):
    """Unreadable, truncated, or version-incompatible checkpoint blob."""


@dataclass
class TraceData:
    episodes: list
    contexts: dict  # (task_id, step) -> np.ndarray
    dimension: int
    vocabulary: list
    embeddings: dict = field(default_factory=dict)
    recorded_by: str = ""

    def source(self) -> "ReplaySource":
        return ReplaySource(self.contexts, self.dimension)


def _format_floats(vector: np.ndarray) -> list[float]:
    # 9 significant digits, the trace precision contract
    return [float(f"{v:.9g}") for v in vector]


def write_trace(
    path,
    episodes: Sequence[Episode],
    contexts: Mapping,
    dimension: int,
    vocabulary: Sequence[str] | None = None,
    embeddings: Mapping[str, Iterable[float]] | None = None,
    recorded_by: str = "",
    steps_per_episode: Mapping[str, int] | None = None,
    default_extra_steps: int = 3,
) -> None:
    """Write episodes and their per-step contexts as a replayable trace.

    ``contexts`` maps (task_id, step) to vectors; a mapping of task_id to a
    single vector is also accepted, in which case ``steps_per_episode`` (or
    |ground truth| + ``default_extra_steps``) says how many step records to
    materialize, so a replay with that step allowance never runs dry.
    """
    if vocabulary is None:
        vocab = sorted({str(a) for ep in episodes for a in ep.candidates})
    else:
        vocab = [str(a) for a in vocabulary]
    header: dict = {
        "format_version": TRACE_FORMAT_VERSION,
        "d": int(dimension),
        "action_vocabulary": vocab,
    }
    if embeddings:
        header["embeddings"] = {
            str(a): _format_floats(np.asarray(v, dtype=np.float64))
            for a, v in embeddings.items()
        }
    if recorded_by:
        header["recorded_by"] = recorded_by

    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(json.dumps(header) + "\n")
        for ep in episodes:
            if (ep.task_id, 1) in contexts:
                steps = []
                step = 1
                while (ep.task_id, step) in contexts:
                    steps.append(contexts[(ep.task_id, step)])
                    step += 1
            else:
                count = (steps_per_episode or {}).get(
                    ep.task_id, len(ep.ground_truth) + default_extra_steps
                )
                steps = [contexts[ep.task_id]] * max(count, 1)
            prior_action = None
            for step, vector in enumerate(steps, start=1):
                record = {
                    "task_id": ep.task_id,
                    "step": step,
                    "context": _format_floats(np.asarray(vector, dtype=np.float64)),
                    "candidates": sorted(str(a) for a in ep.candidates),
                    "ground_truth": (
                        [str(a) for a in ep.ground_truth] if step == 1 else None
                    ),
                    "prior_action": prior_action,
                }
                handle.write(json.dumps(record) + "\n")


def load_trace(path) -> TraceData:
    """Parse and validate a trace file; errors carry line numbers."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        lines = handle.readlines()
    if not lines:
        raise TraceFormatError(1, "format_version", "empty file, header missing")

    def parse(line_no: int, raw: str) -> dict:
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(line_no, "-", f"invalid JSON: {exc}") from None
        if not isinstance(record, dict):
            raise TraceFormatError(line_no, "-", "record is not an object")
        return record

    header = parse(1, lines[0])
    if header.get("format_version") != TRACE_FORMAT_VERSION:
        raise TraceFormatError(
            1,
            "format_version",
            f"unsupported version {header.get('format_version')!r}",
        )
    if not isinstance(header.get("d"), int) or header["d"] < 1:
        raise TraceFormatError(1, "d", "missing or invalid dimension")
    dimension = header["d"]
    vocabulary = header.get("action_vocabulary")
    if not isinstance(vocabulary, list):
        raise TraceFormatError(1, "action_vocabulary", "missing vocabulary list")
    vocab_set = set(vocabulary)
    embeddings = {}
    for action, vector in (header.get("embeddings") or {}).items():
        if action not in vocab_set:
            raise TraceFormatError(1, "embeddings", f"unknown action {action!r}")
        arr = np.asarray(vector, dtype=np.float64)
        if arr.shape != (dimension,):
            raise TraceFormatError(
                1, "embeddings", f"embedding for {action!r} has wrong dimension"
            )
        embeddings[action] = arr

    contexts: dict = {}
    order: list[str] = []
    by_task: dict[str, dict] = {}
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        record = parse(line_no, raw)
        for name in ("task_id", "step", "context", "candidates"):
            if name not in record:
                raise TraceFormatError(line_no, name, "missing field")
        task_id = str(record["task_id"])
        step = record["step"]
        if not isinstance(step, int) or step < 1:
            raise TraceFormatError(line_no, "step", f"invalid step {step!r}")
        context = record["context"]
        if not isinstance(context, list) or len(context) != dimension:
            raise TraceFormatError(
                line_no,
                "context",
                f"expected {dimension} floats, got {len(context) if isinstance(context, list) else type(context).__name__}",
            )
        vector = np.asarray(context, dtype=np.float64)
        if not np.all(np.isfinite(vector)):
            raise TraceFormatError(line_no, "context", "non-finite entries")
        candidates = record["candidates"]
        unknown = [c for c in candidates if c not in vocab_set]
        if unknown:
            raise TraceFormatError(
                line_no, "candidates", f"actions not in vocabulary: {unknown}"
            )

        if task_id not in by_task:
            if step != 1:
                raise TraceFormatError(
                    line_no, "step", f"episode {task_id!r} starts at step {step}, not 1"
                )
            gt = record.get("ground_truth")
            if gt is None:
                raise TraceFormatError(
                    line_no, "ground_truth", "missing on the first episode record"
                )
            bad = [g for g in gt if g not in candidates]
            if bad:
                raise TraceFormatError(
                    line_no, "ground_truth", f"actions not in candidates: {bad}"
                )
            by_task[task_id] = {
                "candidates": list(candidates),
                "ground_truth": list(gt),
                "last_step": 1,
            }
            order.append(task_id)
        else:
            info = by_task[task_id]
            if step != info["last_step"] + 1:
                raise TraceFormatError(
                    line_no,
                    "step",
                    f"episode {task_id!r} jumps from step {info['last_step']} to {step}",
                )
            if list(candidates) != info["candidates"]:
                raise TraceFormatError(
                    line_no, "candidates", f"candidates changed within {task_id!r}"
                )
            if record.get("ground_truth") is not None:
                raise TraceFormatError(
                    line_no, "ground_truth", "allowed only on the first episode record"
                )
            info["last_step"] = step
        contexts[(task_id, step)] = vector

    episodes = [
        make_episode(
            task_id=tid,
            candidates=by_task[tid]["candidates"],
            ground_truth=by_task[tid]["ground_truth"],
        )
        for tid in order
    ]
    return TraceData(
        episodes=episodes,
        contexts=contexts,
        dimension=dimension,
        vocabulary=list(vocabulary),
        embeddings=embeddings,
        recorded_by=header.get("recorded_by", ""),
    )


class ReplaySource:
    """Serves recorded vectors by (task_id, step); a miss aborts the episode.

    Replay is an approximation: recorded contexts reflect the recorder's
    trajectory, not the counterfactual one the policy under test would have
    induced. Live mode is the faithful instantiation.
    """

    def __init__(self, contexts: Mapping, dimension: int):
        self.contexts = dict(contexts)
        self.dimension = int(dimension)

    def context_for(self, episode: Episode, step: int) -> np.ndarray:
        key = (episode.task_id, step)
        if key not in self.contexts:
            raise ContextSourceError(
                f"trace has no context for task {episode.task_id!r} step {step}"
            )
        return self.contexts[key]

    def notify_action(self, episode, step, action) -> None:
        pass

    def notify_episode_end(self, episode, reason) -> None:
        pass

    def close(self) -> None:
        pass


# -- checkpointing ----------------------------------------------------------

_POLICY_CLASSES = {
    "linucb": BanditPolicy,
    "random": RandomPolicy,
    "epsilon_greedy": EpsilonGreedyPolicy,
    "ucb1": Ucb1Policy,
}


def _pack(obj):
    if isinstance(obj, np.ndarray):
        # explicit little-endian float64 keeps blobs portable across platforms
        arr = np.ascontiguousarray(obj).astype("<f8")
        return {
            "__ndarray__": base64.b64encode(arr.tobytes()).decode("ascii"),
            "shape": list(arr.shape),
        }
    if isinstance(obj, dict):
        return {k: _pack(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pack(v) for v in obj]
    return obj


def _unpack(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            raw = base64.b64decode(obj["__ndarray__"])
            return np.frombuffer(raw, dtype="<f8").reshape(obj["shape"]).copy()
        return {k: _unpack(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_unpack(v) for v in obj]
    return obj


def checkpoint_policy(policy) -> bytes:
    """Serialize a policy to a versioned, binary-exact blob."""
    envelope = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": policy.kind,
        "state": _pack(policy.state_dict()),
    }
    return json.dumps(envelope).encode("utf-8")


def restore_policy(blob: bytes):
    try:
        envelope = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint: {exc}") from None
    if envelope.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint version {envelope.get('format_version')!r} not supported"
        )
    kind = envelope.get("kind")
    if kind not in _POLICY_CLASSES:
        raise CheckpointError(f"unknown policy kind {kind!r}")
    state = _unpack(envelope.get("state", {}))
    try:
        return _POLICY_CLASSES[kind].from_state_dict(state)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint state: {exc}") from None


# -- result writers ----------------------------------------------------------


def write_episode_records(path, stream_result, meta: Mapping) -> None:
    """One JSON line per episode: metrics plus run metadata."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in stream_result.records:
            row = {
                "episode_index": record.index,
                "task_id": record.task_id,
                "aborted": record.aborted,
            }
            if record.aborted:
                row["abort_reason"] = record.abort_reason
            else:
                res = record.result
                row.update(
                    {
                        "precision": res.precision,
                        "recall": res.recall,
                        "f1": res.f1,
                        "steps": res.steps_taken,
                        "rewards": res.rewards,
                    }
                )
            row.update(meta)
            handle.write(json.dumps(row) + "\n")


def write_curve(path, series: Sequence[float], header: str = "index,running_avg_f1") -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        handle.write(header + "\n")
        for i, value in enumerate(series):
            handle.write(f"{i},{value:.9g}\n")


def write_rounds_curves(path, regret_curve, error_curve) -> None:
    """CSV of (round, cumulative_regret, estimation_error); errors are sparse
    checkpoints and repeat the latest value between them."""
    errors = dict(error_curve)
    latest = ""
    with Path(path).open("w", encoding="utf-8") as handle:
        handle.write("round,cumulative_regret,estimation_error\n")
        for i, regret in enumerate(regret_curve, start=1):
            if i in errors:
                latest = f"{errors[i]:.9g}"
            handle.write(f"{i},{regret:.9g},{latest}\n")
