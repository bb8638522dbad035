"""Mock backbone and protocol session behavior."""
from __future__ import annotations

import io
import json

import numpy as np

from hsextract.mockmodel import MockBackbone
from hsextract.protocol import decode, encode
from hsextract.session import serve
from hsextract.tasks import Task, load_tasks


def _lines(messages):
    return io.StringIO("".join(encode(m) for m in messages))


def _session(tasks, messages, dimension=6, seed=3):
    backbone = MockBackbone(dimension=dimension, seed=seed)
    out = io.StringIO()
    served = serve(backbone, tasks, stdin=_lines(messages), stdout=out)
    replies = [decode(line) for line in out.getvalue().splitlines()]
    return served, replies


def test_hello_first_with_embeddings(tasks_file):
    tasks = load_tasks(tasks_file)
    _, replies = _session(tasks, [])
    hello = replies[0]
    assert hello["type"] == "hello"
    assert hello["d"] == 6
    assert hello["actions"] == sorted({c for t in tasks for c in t.candidates})
    for action in hello["actions"]:
        assert len(hello["embeddings"][action]) == 6


def test_lockstep_one_response_per_request(tasks_file):
    tasks = load_tasks(tasks_file)
    requests = [
        {"type": "context_request", "task_id": "job-0", "step": 1},
        {"type": "action_taken", "task_id": "job-0", "step": 1, "action": "saw",
         "observation_text": ""},
        {"type": "context_request", "task_id": "job-0", "step": 2},
        {"type": "end_episode", "task_id": "job-0", "reason": "budget"},
    ]
    served, replies = _session(tasks, requests)
    assert served == 2
    responses = [r for r in replies if r["type"] == "context_response"]
    assert [(r["task_id"], r["step"]) for r in responses] == [("job-0", 1), ("job-0", 2)]


def test_contexts_deterministic_and_trajectory_independent(tasks_file):
    tasks = load_tasks(tasks_file)
    with_actions = [
        {"type": "context_request", "task_id": "job-1", "step": 1},
        {"type": "action_taken", "task_id": "job-1", "step": 1, "action": "saw",
         "observation_text": "cut"},
        {"type": "context_request", "task_id": "job-1", "step": 2},
    ]
    without_actions = [
        {"type": "context_request", "task_id": "job-1", "step": 1},
        {"type": "context_request", "task_id": "job-1", "step": 2},
    ]
    _, replies_a = _session(tasks, with_actions)
    _, replies_b = _session(tasks, without_actions)
    ctx_a = [r["context"] for r in replies_a if r["type"] == "context_response"]
    ctx_b = [r["context"] for r in replies_b if r["type"] == "context_response"]
    assert ctx_a == ctx_b


def test_identical_sessions_produce_identical_streams(tasks_file):
    tasks = load_tasks(tasks_file)
    messages = [
        {"type": "context_request", "task_id": t.task_id, "step": s}
        for t in tasks[:4]
        for s in (1, 2, 3)
    ]
    _, first = _session(tasks, messages)
    _, second = _session(tasks, messages)
    assert first == second


def test_unknown_task_yields_error_and_session_continues(tasks_file):
    tasks = load_tasks(tasks_file)
    messages = [
        {"type": "context_request", "task_id": "ghost", "step": 1},
        {"type": "context_request", "task_id": "job-0", "step": 1},
    ]
    served, replies = _session(tasks, messages)
    assert served == 1
    assert replies[1]["type"] == "error"
    assert replies[2]["type"] == "context_response"


def test_malformed_line_reported_not_fatal(tasks_file):
    tasks = load_tasks(tasks_file)
    backbone = MockBackbone(dimension=4, seed=0)
    stdin = io.StringIO(
        "this is not json\n"
        + encode({"type": "context_request", "task_id": "job-0", "step": 1})
    )
    out = io.StringIO()
    served = serve(backbone, tasks, stdin=stdin, stdout=out)
    replies = [decode(line) for line in out.getvalue().splitlines()]
    assert served == 1
    assert replies[1]["type"] == "error"
    assert replies[2]["type"] == "context_response"


def test_embeddings_stable_across_sessions():
    a = MockBackbone(dimension=5, seed=9)
    b = MockBackbone(dimension=5, seed=9)
    assert np.array_equal(a.action_embedding("saw"), b.action_embedding("saw"))
    assert not np.array_equal(a.action_embedding("saw"), a.action_embedding("drill"))


def test_task_file_validation(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"task_id": "x", "query": "q", "candidates": ["a"],
                               "ground_truth": ["b"]}) + "\n")
    try:
        load_tasks(bad)
        raise AssertionError("expected ValueError")
    except ValueError as exc:
        assert "ground truth" in str(exc)


def test_mock_greedy_rollout_respects_cap():
    task = Task("t", "q", ("a", "b"), ("a",))
    backbone = MockBackbone(dimension=3, seed=1)
    from hsextract.dump import rollout

    steps = rollout(backbone, task, extra_steps=5, per_arm_cap=2)
    # budget is 6 but two arms at cap 2 exhaust after 4 selections
    assert len(steps) == 4
