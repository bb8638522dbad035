"""End-to-end protocol conformance against the experiment runner.

The runner package must be installed alongside this one. A mock-backbone
session serves a 10-episode live run; the same tasks dumped to a trace and
replayed must produce identical episode records, because the mock's contexts
depend only on (seed, task, step).
"""
from __future__ import annotations

import json
import subprocess
import sys

import pytest

from hsextract.dump import dump_path
from hsextract.mockmodel import MockBackbone
from hsextract.tasks import load_tasks

REPLAYER = [sys.executable, "-m", "toolbandit.cli"]
MOCK_D = 8
MOCK_SEED = 5


def _run(argv):
    proc = subprocess.run(argv, capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, f"{argv}\nstdout: {proc.stdout}\nstderr: {proc.stderr}"
    return proc


def _episode_rows(out_dir, pattern):
    files = sorted(out_dir.glob(pattern))
    assert files, f"no episode records matching {pattern}"
    rows = []
    for line in files[-1].read_text().splitlines():
        rows.append(json.loads(line))
    return rows


@pytest.fixture()
def dumped_trace(tasks_file, tmp_path):
    trace = tmp_path / "mock_dump.jsonl"
    backbone = MockBackbone(dimension=MOCK_D, seed=MOCK_SEED)
    recorded = dump_path(backbone, tasks_file, trace, extra_steps=3, per_arm_cap=3)
    assert recorded == 10
    return trace


def test_dump_loads_in_replayer_format(dumped_trace, tasks_file):
    from toolbandit.trace import load_trace

    data = load_trace(dumped_trace)
    tasks = load_tasks(tasks_file)
    assert data.dimension == MOCK_D
    assert len(data.episodes) == len(tasks)
    for task, episode in zip(tasks, data.episodes):
        assert episode.task_id == task.task_id
        assert list(episode.ground_truth) == list(task.ground_truth)
        # every budgeted replay step is recorded
        assert (task.task_id, len(task.ground_truth) + 3) in data.contexts
    assert set(data.embeddings) == set(data.vocabulary)


def test_live_run_matches_replay_record_for_record(dumped_trace, tasks_file, tmp_path):
    """[SECONDARY acceptance] 10-episode mock live run == replay of its dump."""
    replay_out = tmp_path / "replay_out"
    live_out = tmp_path / "live_out"
    common = ["--alpha", "0.5", "--seeds", "0", "--s", "3", "--m", "3"]
    _run(
        REPLAYER
        + ["replay", "--trace", str(dumped_trace), "--out", str(replay_out)]
        + common
    )
    extractor_cmd = (
        f"{sys.executable} -m hsextract --tasks {tasks_file} --mock "
        f"--mock-d {MOCK_D} --mock-seed {MOCK_SEED}"
    )
    _run(
        REPLAYER
        + [
            "live",
            "--trace", str(dumped_trace),
            "--extractor-cmd", extractor_cmd,
            "--out", str(live_out),
        ]
        + common
    )
    replay_rows = _episode_rows(replay_out, "replay_*.episodes.jsonl")
    live_rows = _episode_rows(live_out, "live_*.episodes.jsonl")
    assert len(live_rows) == 10
    assert all(not row["aborted"] for row in live_rows + replay_rows)
    assert live_rows == replay_rows
    print("[ACCEPT] protocol conformance (10-episode live == replay): PASS")


def test_live_summary_reports_learning(dumped_trace, tasks_file, tmp_path):
    """The mock stream is stationary per task, so the curve file exists and
    the summary parses; dimension consistency was enforced on the way."""
    live_out = tmp_path / "live_out2"
    extractor_cmd = (
        f"{sys.executable} -m hsextract --tasks {tasks_file} --mock "
        f"--mock-d {MOCK_D} --mock-seed {MOCK_SEED}"
    )
    _run(
        REPLAYER
        + [
            "live",
            "--trace", str(dumped_trace),
            "--extractor-cmd", extractor_cmd,
            "--out", str(live_out),
            "--seeds", "0",
        ]
    )
    summary = json.loads((live_out / "live_linucb_a0.1.summary.json").read_text())
    assert summary["per_seed"][0]["aborted"] == 0
    curves = list(live_out.glob("live_*.curve.csv"))
    assert curves and curves[0].read_text().startswith("index,running_avg_f1")


def test_dimension_mismatch_fails_loudly(dumped_trace, tasks_file, tmp_path):
    """Extractor serving a different d than the trace must abort the run."""
    extractor_cmd = (
        f"{sys.executable} -m hsextract --tasks {tasks_file} --mock "
        f"--mock-d 5 --mock-seed {MOCK_SEED}"
    )
    proc = subprocess.run(
        REPLAYER
        + [
            "live",
            "--trace", str(dumped_trace),
            "--extractor-cmd", extractor_cmd,
            "--out", str(tmp_path / "bad"),
            "--seeds", "0",
        ],
        capture_output=True,
        text=True,
        timeout=300,
    )
    assert proc.returncode == 1
    assert "dimension" in proc.stderr
