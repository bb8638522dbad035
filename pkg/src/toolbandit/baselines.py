"""Comparison policies sharing the select/update interface of the linear layer.

All policies expose dimension, ensure_arm, select_with_scores, select, update,
state_dict/from_state_dict. The episode engine enforces valid-set and cap
constraints, so policies only ever see the currently selectable actions.
"""
from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np

from .bandit import ActionId, BanditPolicy, NoValidActionError, as_context


class RandomPolicy:
    """Uniform selection over the valid set; keeps no statistics."""

    kind = "random"

    def __init__(self, dimension: int, rng_seed: int = 0):
        self.dimension = int(dimension)
        self.rng_seed = int(rng_seed)
        self._rng = np.random.default_rng(rng_seed)

    def ensure_arm(self, action: ActionId, prior=None) -> None:
        del action, prior

    def select_with_scores(self, ctx, valid: Iterable[ActionId]):
        ordered = sorted(valid)
        if not ordered:
            raise NoValidActionError("arms exhausted: valid set is empty")
        as_context(ctx, self.dimension)
        choice = ordered[int(self._rng.integers(len(ordered)))]
        return choice, {}

    def select(self, ctx, valid):
        return self.select_with_scores(ctx, valid)[0]

    def update(self, action, ctx, reward) -> None:
        del action, ctx, reward

    def state_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "rng_seed": self.rng_seed,
            "rng_state": self._rng.bit_generator.state,
        }

    @classmethod
    def from_state_dict(cls, state: Mapping) -> "RandomPolicy":
        policy = cls(state["dimension"], state["rng_seed"])
        policy._rng.bit_generator.state = state["rng_state"]
        return policy


class EpsilonGreedyPolicy:
    """With probability epsilon pick uniformly, otherwise the greedy argmax.

    The greedy part scores with the shared linear layer at alpha = 0, and
    updates delegate to it unchanged, so arm statistics match LinUCB's given
    identical action/reward sequences.
    """

    kind = "epsilon_greedy"

    def __init__(self, dimension: int, epsilon: float = 0.1, rng_seed: int = 0):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        self.epsilon = float(epsilon)
        self.rng_seed = int(rng_seed)
        self._rng = np.random.default_rng(rng_seed)
        self.linear = BanditPolicy(dimension, alpha=0.0, rng_seed=rng_seed)

    @property
    def dimension(self) -> int:
        return self.linear.dimension

    @property
    def arms(self):
        return self.linear.arms

    def ensure_arm(self, action: ActionId, prior=None):
        return self.linear.ensure_arm(action, prior)

    def theta_estimate(self, action: ActionId) -> np.ndarray:
        return self.linear.theta_estimate(action)

    def select_with_scores(self, ctx, valid: Iterable[ActionId]):
        ordered = sorted(valid)
        if not ordered:
            raise NoValidActionError("arms exhausted: valid set is empty")
        # epsilon = 0 must not consume randomness, so the selection sequence
        # coincides with a plain greedy policy's call for call.
        if self.epsilon > 0.0 and float(self._rng.random()) < self.epsilon:
            choice = ordered[int(self._rng.integers(len(ordered)))]
            return choice, {}
        return self.linear.select_with_scores(ctx, ordered)

    def select(self, ctx, valid):
        return self.select_with_scores(ctx, valid)[0]

    def update(self, action, ctx, reward) -> None:
        self.linear.update(action, ctx, reward)

    def state_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "rng_seed": self.rng_seed,
            "rng_state": self._rng.bit_generator.state,
            "linear": self.linear.state_dict(),
        }

    @classmethod
    def from_state_dict(cls, state: Mapping) -> "EpsilonGreedyPolicy":
        policy = cls(
            state["linear"]["dimension"], state["epsilon"], state["rng_seed"]
        )
        policy._rng.bit_generator.state = state["rng_state"]
        policy.linear = BanditPolicy.from_state_dict(state["linear"])
        return policy


class Ucb1Policy:
    """Context-free UCB1 over per-arm reward means.

    Score = mean + c * sqrt(2 ln N / n_a) with N the total pull count.
    Unpulled arms are optimistic (infinite score), ties resolve to the
    smallest action id.
    """

    kind = "ucb1"

    def __init__(self, dimension: int, c: float = 1.0, rng_seed: int = 0):
        if c < 0:
            raise ValueError("exploration constant c must be non-negative")
        self.dimension = int(dimension)
        self.c = float(c)
        self.rng_seed = int(rng_seed)
        self.counts: dict[ActionId, int] = {}
        self.means: dict[ActionId, float] = {}

    def ensure_arm(self, action: ActionId, prior=None) -> None:
        del prior
        if action not in self.counts:
            self.counts[action] = 0
            self.means[action] = 0.0

    def _index(self, action: ActionId, total: int) -> float:
        n = self.counts.get(action, 0)
        if n == 0:
            return math.inf
        bonus = self.c * math.sqrt(2.0 * math.log(max(total, 1)) / n)
        return self.means[action] + bonus

    def select_with_scores(self, ctx, valid: Iterable[ActionId]):
        ordered = sorted(valid)
        if not ordered:
            raise NoValidActionError("arms exhausted: valid set is empty")
        as_context(ctx, self.dimension)
        total = sum(self.counts.get(a, 0) for a in self.counts)
        scored = {a: self._index(a, total) for a in ordered}
        best = ordered[0]
        for a in ordered:
            if scored[a] > scored[best]:
                best = a
        return best, scored

    def select(self, ctx, valid):
        return self.select_with_scores(ctx, valid)[0]

    def update(self, action, ctx, reward) -> None:
        del ctx
        self.ensure_arm(action)
        self.counts[action] += 1
        n = self.counts[action]
        self.means[action] += (float(reward) - self.means[action]) / n

    def state_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "c": self.c,
            "rng_seed": self.rng_seed,
            "actions": [
                {
                    "id": str(a),
                    "id_type": "int" if isinstance(a, int) else "str",
                    "count": self.counts[a],
                    "mean": self.means[a],
                }
                for a in sorted(self.counts)
            ],
        }

    @classmethod
    def from_state_dict(cls, state: Mapping) -> "Ucb1Policy":
        policy = cls(state["dimension"], state["c"], state["rng_seed"])
        for rec in state["actions"]:
            action: ActionId = int(rec["id"]) if rec["id_type"] == "int" else rec["id"]
            policy.counts[action] = int(rec["count"])
            policy.means[action] = float(rec["mean"])
        return policy


POLICY_KINDS = ("linucb", "greedy", "epsilon_greedy", "random", "ucb1")


def make_policy(
    kind: str,
    dimension: int,
    alpha: float = 0.1,
    epsilon: float = 0.1,
    ucb1_c: float = 1.0,
    rng_seed: int = 0,
):
    """Instantiate a policy by kind name. Greedy is LinUCB with alpha = 0."""
    if kind == "linucb":
        return BanditPolicy(dimension, alpha=alpha, rng_seed=rng_seed)
    if kind == "greedy":
        return BanditPolicy(dimension, alpha=0.0, rng_seed=rng_seed)
    if kind == "epsilon_greedy":
        return EpsilonGreedyPolicy(dimension, epsilon=epsilon, rng_seed=rng_seed)
    if kind == "random":
        return RandomPolicy(dimension, rng_seed=rng_seed)
    if kind == "ucb1":
        return Ucb1Policy(dimension, c=ucb1_c, rng_seed=rng_seed)
    raise ValueError(f"unknown policy kind {kind!r}; expected one of {POLICY_KINDS}")


POLICY_CLASSES = {
    "linucb": BanditPolicy,
    "random": RandomPolicy,
    "epsilon_greedy": EpsilonGreedyPolicy,
    "ucb1": Ucb1Policy,
}
