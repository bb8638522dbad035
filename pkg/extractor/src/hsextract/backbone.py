"""Frozen causal-LM backbone: thought generation, hidden states, embeddings.

The model is loaded once, switched to eval mode, and never updated. Action
embeddings are the mean input-embedding rows of the action's name tokens,
tokenizing the display name as-is. The decision context for a step is the
final-layer hidden state at the last position of the prompt once the action
marker has been appended, i.e. the position whose next token would be the
action name.
"""
from __future__ import annotations

import hashlib

import numpy as np
import torch

from .tasks import Task

DEFAULT_TEMPLATE = (
    "You are a tool-selection assistant. Choose tools step by step to complete the task.\n"
    "Task: {query}\n"
    "Tools: {tools}\n"
    "{trajectory}"
)

THOUGHT_PREFIX = "Thought {step}:"
ACTION_PREFIX = "Action {step}:"


class FrozenLMBackbone:
    name = "lm"

    def __init__(
        self,
        model_id: str,
        template: str = DEFAULT_TEMPLATE,
        max_thought_tokens: int = 24,
        device: str = "cpu",
    ):
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForCausalLM.from_pretrained(model_id)
        self.model.eval()
        self.model.to(device)
        self.device = device
        self.template = template
        self.max_thought_tokens = int(max_thought_tokens)
        self.dimension = int(self.model.config.hidden_size)
        self._trajectories: dict[str, list[tuple[str, str, str]]] = {}
        self._pending_thought: dict[str, str] = {}
        if self.tokenizer.pad_token_id is None and self.tokenizer.eos_token_id is not None:
            self.tokenizer.pad_token = self.tokenizer.eos_token

    def action_embedding(self, action: str) -> np.ndarray:
        ids = self.tokenizer(action, add_special_tokens=False)["input_ids"]
        if not ids:
            raise ValueError(f"action name {action!r} tokenizes to nothing")
        with torch.no_grad():
            rows = self.model.get_input_embeddings().weight[ids]
            return rows.mean(dim=0).double().cpu().numpy()

    def _prompt(self, task: Task, step: int, with_thought: str | None = None) -> str:
        lines = []
        history = self._trajectories.get(task.task_id, [])
        for i, (thought, action, observation) in enumerate(history, start=1):
            lines.append(f"{THOUGHT_PREFIX.format(step=i)} {thought}")
            lines.append(f"{ACTION_PREFIX.format(step=i)} {action}")
            lines.append(f"Observation {i}: {observation}")
        trajectory = "\n".join(lines)
        if trajectory:
            trajectory += "\n"
        base = self.template.format(
            query=task.query, tools=", ".join(task.candidates), trajectory=trajectory
        )
        if with_thought is None:
            return base + THOUGHT_PREFIX.format(step=step)
        return (
            base
            + f"{THOUGHT_PREFIX.format(step=step)} {with_thought}\n"
            + ACTION_PREFIX.format(step=step)
        )

    def _generate_thought(self, prompt: str) -> str:
        inputs = self.tokenizer(prompt, return_tensors="pt").to(self.device)
        with torch.no_grad():
            output = self.model.generate(
                **inputs,
                max_new_tokens=self.max_thought_tokens,
                do_sample=False,
                num_beams=1,
                pad_token_id=self.tokenizer.pad_token_id,
            )
        new_tokens = output[0][inputs["input_ids"].shape[1] :]
        text = self.tokenizer.decode(new_tokens, skip_special_tokens=True)
        return text.split("\n", 1)[0].strip()

    def begin_task(self, task: Task) -> None:
        self._trajectories[task.task_id] = []
        self._pending_thought.pop(task.task_id, None)

    def next_context(self, task: Task, step: int) -> tuple[np.ndarray, str]:
        if task.task_id not in self._trajectories:
            self.begin_task(task)
        thought = self._generate_thought(self._prompt(task, step))
        action_prompt = self._prompt(task, step, with_thought=thought)
        inputs = self.tokenizer(action_prompt, return_tensors="pt").to(self.device)
        with torch.no_grad():
            output = self.model(**inputs, output_hidden_states=True)
        hidden = output.hidden_states[-1][0, -1, :]
        self._pending_thought[task.task_id] = thought
        return hidden.double().cpu().numpy(), thought

    def record_action(self, task: Task, step: int, action: str, observation: str) -> None:
        del step
        thought = self._pending_thought.pop(task.task_id, "")
        self._trajectories.setdefault(task.task_id, []).append(
            (thought, action, observation)
        )

    def end_task(self, task: Task) -> None:
        self._trajectories.pop(task.task_id, None)
        self._pending_thought.pop(task.task_id, None)

    def greedy_action(self, task: Task, step: int, context, valid) -> str:
        """The frozen model's own choice: argmax of embed(a)' h over valid."""
        scores = {a: float(self.action_embedding(a) @ context) for a in sorted(valid)}
        best = max(scores.values())
        return min(a for a, s in scores.items() if s == best)

    def weight_fingerprint(self) -> str:
        digest = hashlib.sha256()
        for name, tensor in sorted(self.model.state_dict().items()):
            digest.update(name.encode("utf-8"))
            digest.update(tensor.cpu().numpy().tobytes())
        return digest.hexdigest()
