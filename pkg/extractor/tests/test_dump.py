"""Trace dumping with both backbones, checked against the replay loader."""
from __future__ import annotations

import io
import json

from hsextract.backbone import FrozenLMBackbone
from hsextract.dump import dump_path
from hsextract.mockmodel import MockBackbone
from hsextract.protocol import encode
from hsextract.session import serve
from hsextract.tasks import load_tasks


def test_mock_dump_round_trips(tasks_file, tmp_path):
    from toolbandit.trace import load_trace

    out = tmp_path / "dump.jsonl"
    backbone = MockBackbone(dimension=6, seed=2)
    assert dump_path(backbone, tasks_file, out) == 10
    data = load_trace(out)
    assert data.dimension == 6
    assert data.recorded_by == "mock-greedy"


def test_tiny_lm_dump_round_trips(tiny_model_dir, tasks_file, tmp_path):
    from toolbandit.trace import load_trace

    backbone = FrozenLMBackbone(tiny_model_dir, max_thought_tokens=4)
    out = tmp_path / "lm_dump.jsonl"
    recorded = dump_path(backbone, tasks_file, out, extra_steps=1)
    assert recorded == 10
    data = load_trace(out)
    assert data.dimension == backbone.dimension
    # dumped d matches what a session's hello would declare
    hello_out = io.StringIO()
    serve(backbone, load_tasks(tasks_file), stdin=io.StringIO(""), stdout=hello_out)
    hello = json.loads(hello_out.getvalue().splitlines()[0])
    assert hello["d"] == data.dimension
    assert set(hello["embeddings"]) == set(data.embeddings)


def test_tiny_lm_session_streams_are_deterministic(tiny_model_dir, tasks_file):
    tasks = load_tasks(tasks_file)
    messages = "".join(
        encode({"type": "context_request", "task_id": t.task_id, "step": 1})
        for t in tasks[:3]
    )

    def run_session():
        backbone = FrozenLMBackbone(tiny_model_dir, max_thought_tokens=4)
        out = io.StringIO()
        serve(backbone, tasks, stdin=io.StringIO(messages), stdout=out)
        return out.getvalue()

    assert run_session() == run_session()


def test_failed_task_logged_but_file_valid(tasks_file, tmp_path, capsys):
    from toolbandit.trace import load_trace

    class FlakyBackbone(MockBackbone):
        def next_context(self, task, step):
            if task.task_id == "job-3":
                raise RuntimeError("synthetic generation failure")
            return super().next_context(task, step)

    out = tmp_path / "flaky.jsonl"
    recorded = dump_path(FlakyBackbone(dimension=4, seed=0), tasks_file, out)
    assert recorded == 9
    err = capsys.readouterr().err
    assert "job-3" in err
    data = load_trace(out)
    assert len(data.episodes) == 9
