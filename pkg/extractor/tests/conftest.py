"""Shared fixtures: a tiny randomly initialized causal LM saved to disk.

The tiny model exercises the real transformers code path (tokenization,
embedding lookup, greedy generation, hidden-state extraction) without any
network access or pretrained weights.
"""
from __future__ import annotations

import json

import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

WORDS = [
    "[UNK]", "[PAD]", "[EOS]",
    "hammer", "drill", "wrench", "saw", "ruler", "glue",
    "build", "a", "the", "shelf", "fix", "measure", "cut", "attach",
    "task", "tools", "thought", "action", "observation", "you", "are",
    "tool", "selection", "assistant", "choose", "step", "by", "to",
    "complete", ":", ",", ".", "1", "2", "3", "4", "5", "6",
]


def build_tiny_model(directory) -> str:
    vocab = {word: i for i, word in enumerate(WORDS)}
    tokenizer = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tokenizer.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        unk_token="[UNK]",
        pad_token="[PAD]",
        eos_token="[EOS]",
    )
    config = GPT2Config(
        vocab_size=len(vocab),
        n_positions=256,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=vocab["[EOS]"],
        eos_token_id=vocab["[EOS]"],
    )
    torch.manual_seed(7)
    model = GPT2LMHeadModel(config)
    model.eval()
    model.save_pretrained(directory)
    fast.save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    return build_tiny_model(tmp_path_factory.mktemp("tinylm"))


@pytest.fixture()
def tasks_file(tmp_path):
    rows = [
        {
            "task_id": f"job-{i}",
            "query": f"build a shelf {i}",
            "candidates": ["hammer", "drill", "wrench", "saw", "ruler", "glue"],
            "ground_truth": ["hammer", "saw"],
        }
        for i in range(10)
    ]
    path = tmp_path / "tasks.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return path
