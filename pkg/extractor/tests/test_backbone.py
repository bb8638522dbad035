"""Frozen-LM backbone tests on a tiny local model (no pretrained weights)."""
from __future__ import annotations

import io

import numpy as np
import pytest
import torch
from transformers import AutoModelForCausalLM, AutoTokenizer

from hsextract.backbone import FrozenLMBackbone
from hsextract.protocol import decode, encode
from hsextract.session import serve
from hsextract.tasks import load_tasks


@pytest.fixture(scope="module")
def backbone(tmp_path_factory):
    from conftest import build_tiny_model

    path = build_tiny_model(tmp_path_factory.mktemp("lm"))
    return FrozenLMBackbone(path, max_thought_tokens=6)


def test_single_token_embedding_equals_input_row(backbone):
    """[SECONDARY acceptance] single-token action name: exact row equality."""
    tokenizer = backbone.tokenizer
    ids = tokenizer("hammer", add_special_tokens=False)["input_ids"]
    assert len(ids) == 1
    row = backbone.model.get_input_embeddings().weight[ids[0]].detach().double().numpy()
    embedding = backbone.action_embedding("hammer")
    assert np.array_equal(embedding, row)
    print("[ACCEPT] embedding contract (single-token row equality): PASS")


def test_multi_token_embedding_is_token_mean(backbone):
    """[SECONDARY acceptance] multi-token name: mean within 1e-6."""
    name = "hammer drill saw"
    ids = backbone.tokenizer(name, add_special_tokens=False)["input_ids"]
    assert len(ids) == 3
    rows = backbone.model.get_input_embeddings().weight[ids].detach().double().numpy()
    expected = rows.mean(axis=0)
    got = backbone.action_embedding(name)
    assert np.max(np.abs(got - expected)) < 1e-6
    print("[ACCEPT] embedding contract (multi-token mean within 1e-6): PASS")


def test_dimension_matches_hidden_size(backbone):
    assert backbone.dimension == backbone.model.config.hidden_size


def test_next_context_shape_and_determinism(backbone, tasks_file):
    tasks = load_tasks(tasks_file)
    task = tasks[0]
    backbone.begin_task(task)
    v1, thought1 = backbone.next_context(task, 1)
    backbone.begin_task(task)
    v2, thought2 = backbone.next_context(task, 1)
    assert v1.shape == (backbone.dimension,)
    assert np.array_equal(v1, v2)
    assert thought1 == thought2
    assert np.all(np.isfinite(v1))


def test_trajectory_changes_context(backbone, tasks_file):
    """Recorded actions extend the prompt, so later contexts shift."""
    tasks = load_tasks(tasks_file)
    task = tasks[1]
    backbone.begin_task(task)
    backbone.next_context(task, 1)
    backbone.record_action(task, 1, "saw", "it cut the wood")
    with_action, _ = backbone.next_context(task, 2)

    backbone.begin_task(task)
    backbone.next_context(task, 1)
    backbone.record_action(task, 1, "glue", "it stuck")
    with_other, _ = backbone.next_context(task, 2)
    assert not np.array_equal(with_action, with_other)


def test_weights_unchanged_by_session(backbone, tasks_file):
    """Backbone immutability: fingerprint identical before and after."""
    tasks = load_tasks(tasks_file)
    before = backbone.weight_fingerprint()
    messages = [
        {"type": "context_request", "task_id": tasks[0].task_id, "step": 1},
        {
            "type": "action_taken",
            "task_id": tasks[0].task_id,
            "step": 1,
            "action": "saw",
            "observation_text": "ok",
        },
        {"type": "context_request", "task_id": tasks[0].task_id, "step": 2},
        {"type": "end_episode", "task_id": tasks[0].task_id, "reason": "budget"},
    ]
    stdin = io.StringIO("".join(encode(m) for m in messages))
    serve(backbone, tasks, stdin=stdin, stdout=io.StringIO())
    assert backbone.weight_fingerprint() == before


def test_hello_embeddings_identical_across_sessions(backbone, tasks_file):
    tasks = load_tasks(tasks_file)

    def hello_of():
        out = io.StringIO()
        serve(backbone, tasks, stdin=io.StringIO(""), stdout=out)
        return decode(out.getvalue().splitlines()[0])

    assert hello_of()["embeddings"] == hello_of()["embeddings"]


def test_greedy_action_is_embedding_argmax(backbone, tasks_file):
    tasks = load_tasks(tasks_file)
    task = tasks[2]
    backbone.begin_task(task)
    vector, _ = backbone.next_context(task, 1)
    choice = backbone.greedy_action(task, 1, vector, set(task.candidates))
    scores = {
        a: float(backbone.action_embedding(a) @ vector) for a in task.candidates
    }
    assert scores[choice] == max(scores.values())


def test_tiny_model_loads_via_auto_classes(backbone, tmp_path):
    """The fixture path works with the same loaders the CLI uses."""
    from conftest import build_tiny_model

    path = build_tiny_model(tmp_path / "again")
    model = AutoModelForCausalLM.from_pretrained(path)
    tokenizer = AutoTokenizer.from_pretrained(path)
    ids = tokenizer("hammer drill", add_special_tokens=False)["input_ids"]
    assert len(ids) == 2
    with torch.no_grad():
        out = model(torch.tensor([ids]), output_hidden_states=True)
    assert out.hidden_states[-1].shape[-1] == model.config.hidden_size
