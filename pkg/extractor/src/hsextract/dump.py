"""Offline trace dumping: roll out the backbone's own greedy choices and
record per-step contexts in the replay trace format.

The trace begins with a header {"format_version": 1, "d", "action_vocabulary",
"embeddings", "recorded_by"}; each step record carries task_id, step, context
(9 significant digits), candidates, ground_truth (first record only), and
prior_action. Per-task failures are logged to stderr and skipped; the file
stays valid.
"""
from __future__ import annotations

import json
import sys
from collections import Counter
from pathlib import Path

from .tasks import Task, load_tasks, vocabulary

TRACE_FORMAT_VERSION = 1


def _floats(vector) -> list[float]:
    return [float(f"{float(v):.9g}") for v in vector]


def rollout(backbone, task: Task, extra_steps: int, per_arm_cap: int):
    """Greedy rollout honoring the budget and per-arm cap of the online
    protocol, so dumped traces cover every step a replay can request."""
    budget = len(task.ground_truth) + extra_steps
    valid = set(task.candidates)
    counts: Counter = Counter()
    steps = []
    backbone.begin_task(task)
    prior_action = None
    for step in range(1, budget + 1):
        if not valid:
            break
        vector, thought = backbone.next_context(task, step)
        action = backbone.greedy_action(task, step, vector, valid)
        steps.append(
            {
                "step": step,
                "context": vector,
                "prior_action": prior_action,
                "thought": thought,
            }
        )
        counts[action] += 1
        if counts[action] >= per_arm_cap:
            valid.discard(action)
        backbone.record_action(task, step, action, "")
        prior_action = action
    backbone.end_task(task)
    return steps


def dump_trace(
    backbone,
    tasks: list[Task],
    out_path,
    extra_steps: int = 3,
    per_arm_cap: int = 3,
) -> int:
    """Write a trace for all tasks; returns how many tasks were recorded."""
    actions = vocabulary(tasks)
    header = {
        "format_version": TRACE_FORMAT_VERSION,
        "d": int(backbone.dimension),
        "action_vocabulary": actions,
        "embeddings": {a: _floats(backbone.action_embedding(a)) for a in actions},
        "recorded_by": f"{backbone.name}-greedy",
    }
    recorded = 0
    with Path(out_path).open("w", encoding="utf-8") as handle:
        handle.write(json.dumps(header) + "\n")
        for task in tasks:
            try:
                steps = rollout(backbone, task, extra_steps, per_arm_cap)
            except Exception as exc:  # noqa: BLE001 - per-task fault barrier
                print(f"dump: task {task.task_id!r} failed: {exc}", file=sys.stderr)
                continue
            for record in steps:
                handle.write(
                    json.dumps(
                        {
                            "task_id": task.task_id,
                            "step": record["step"],
                            "context": _floats(record["context"]),
                            "candidates": list(task.candidates),
                            "ground_truth": (
                                list(task.ground_truth)
                                if record["step"] == 1
                                else None
                            ),
                            "prior_action": record["prior_action"],
                        }
                    )
                    + "\n"
                )
            recorded += 1
    return recorded


def dump_path(backbone, tasks_path, out_path, extra_steps=3, per_arm_cap=3) -> int:
    return dump_trace(
        backbone, load_tasks(tasks_path), out_path, extra_steps, per_arm_cap
    )
