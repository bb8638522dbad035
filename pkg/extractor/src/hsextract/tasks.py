"""Task file loading: one JSON object per line.

Fields: task_id, query, candidates (list of action names), ground_truth
(list of action names, subset of candidates as multiset support).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Task:
    task_id: str
    query: str
    candidates: tuple
    ground_truth: tuple


def load_tasks(path) -> list[Task]:
    tasks = []
    seen = set()
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValueError(f"tasks line {line_no}: invalid JSON: {exc}") from None
        for name in ("task_id", "query", "candidates", "ground_truth"):
            if name not in record:
                raise ValueError(f"tasks line {line_no}: missing field {name!r}")
        task_id = str(record["task_id"])
        if task_id in seen:
            raise ValueError(f"tasks line {line_no}: duplicate task_id {task_id!r}")
        seen.add(task_id)
        candidates = tuple(str(c) for c in record["candidates"])
        gt = tuple(str(g) for g in record["ground_truth"])
        missing = sorted(set(gt) - set(candidates))
        if missing:
            raise ValueError(
                f"tasks line {line_no}: ground truth not in candidates: {missing}"
            )
        if not candidates:
            raise ValueError(f"tasks line {line_no}: empty candidate set")
        tasks.append(Task(task_id, str(record["query"]), candidates, gt))
    return tasks


def vocabulary(tasks) -> list[str]:
    return sorted({c for task in tasks for c in task.candidates})
