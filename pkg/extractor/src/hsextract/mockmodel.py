"""Deterministic stand-in backbone: no weights, seeded pseudo-random vectors.

Context vectors depend only on (seed, task_id, step) and embeddings only on
(seed, action), so they are trajectory independent and stable across
processes. This is what makes a live mock run and a replay of its own dump
coincide record for record.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .tasks import Task


def _rng_for(*parts) -> np.random.Generator:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


class MockBackbone:
    """Serves seeded vectors of a declared dimension; keeps no real state."""

    name = "mock"

    def __init__(self, dimension: int = 8, seed: int = 0):
        self.dimension = int(dimension)
        self.seed = int(seed)

    def action_embedding(self, action: str) -> np.ndarray:
        return _rng_for(self.seed, "embed", action).standard_normal(self.dimension)

    def begin_task(self, task: Task) -> None:
        pass

    def next_context(self, task: Task, step: int) -> tuple[np.ndarray, str]:
        vector = _rng_for(self.seed, task.task_id, step).standard_normal(self.dimension)
        return vector, f"mock thought for {task.task_id} step {step}"

    def record_action(self, task: Task, step: int, action: str, observation: str) -> None:
        pass

    def end_task(self, task: Task) -> None:
        pass

    def greedy_action(self, task: Task, step: int, context, valid) -> str:
        """Deterministic pick among the still-valid candidates."""
        ordered = sorted(valid)
        index = int(_rng_for(self.seed, "action", task.task_id, step).integers(len(ordered)))
        return ordered[index]

    def weight_fingerprint(self) -> str:
        return f"mock-{self.dimension}-{self.seed}"
